#!/usr/bin/env python3


"""

Non-intermediate fusion baselines

    no_fusion   - the ego's own detections
    late_fusion - every agent's detections moved into the ego frame and
                  merged with NMS

"""


from lib_detection.boxes import Detection
from lib_detection.nms import nms, NMS_THRESHOLD


def no_fusion(ego_detections):
    return list(ego_detections)


def late_fusion(detections_per_agent, poses, ego_index=0, iou_thresh=NMS_THRESHOLD):
    """
    Inputs:
        detections_per_agent: list of lists of Detection, each in its own
        agent's frame

        poses: list of Pose2, one per agent

        ego_index: Which agent receives

    Returns:
        list of Detection in the ego frame
    """
    ego_pose = poses[ego_index]
    merged = []
    for index, (detections, pose) in enumerate(zip(detections_per_agent, poses)):
        for item in detections:
            box = item.box if index == ego_index else item.box.to_frame(pose, ego_pose)
            merged.append(Detection(box, item.score))
    return nms(merged, iou_thresh)
