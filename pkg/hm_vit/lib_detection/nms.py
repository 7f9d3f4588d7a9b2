#!/usr/bin/env python3


"""

Greedy non-maximum suppression on rotated BEV boxes

"""


from lib_detection.rotated_iou import rotated_iou


NMS_THRESHOLD = 0.15


def _rank_key(detection):
    # Equal scores fall back to the box values so the input order never matters
    return (-detection.score,) + detection.box.as_tuple()


def nms(detections, iou_thresh=NMS_THRESHOLD):
    """
    Keeps the best scoring box of every overlapping cluster

    Inputs:
        detections: list of Detection

        iou_thresh: A box is dropped when its IoU with a kept box is at
        least this

    Returns:
        list of Detection, scores descending
    """
    kept = []
    for candidate in sorted(detections, key=_rank_key):
        if all(rotated_iou(candidate.box, other.box) < iou_thresh for other in kept):
            kept.append(candidate)
    return kept
