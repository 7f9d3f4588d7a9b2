#!/usr/bin/env python3


"""

Average precision over a set of scenes

Detections from every scene are ranked together by score. Each one, best
first, is matched to the unmatched ground truth box of its own scene with
the highest IoU; it counts as a true positive when that IoU reaches the
threshold. AP is the area under the precision envelope at every recall
step (all-point interpolation).

"""


import numpy as np

from lib_autodiff.errors import DimensionError
from lib_detection.rotated_iou import iou_matrix


IOU_THRESHOLDS = (0.5, 0.7)


def match_detections(detections_per_scene, truths_per_scene, iou_thresh):
    """
    Inputs:
        detections_per_scene: list (one per scene) of lists of Detection

        truths_per_scene: list (one per scene) of lists of BoxBEV

        iou_thresh: Minimum IoU for a match

    Returns:
        (scores [D], true_positive bool [D]) sorted by descending score, and
        the total number of ground truth boxes
    """
    if len(detections_per_scene) != len(truths_per_scene):
        raise DimensionError(
            f"{len(detections_per_scene)} detection lists for {len(truths_per_scene)} scenes"
        )

    ranked = []
    overlaps = []
    for scene, (detections, truths) in enumerate(zip(detections_per_scene, truths_per_scene)):
        overlaps.append(iou_matrix([item.box for item in detections], truths))
        for index, item in enumerate(detections):
            ranked.append((-item.score, scene, index))
    ranked.sort()

    taken = [np.zeros(len(truths), dtype=bool) for truths in truths_per_scene]
    scores = np.zeros(len(ranked))
    true_positive = np.zeros(len(ranked), dtype=bool)
    for position, (neg_score, scene, index) in enumerate(ranked):
        scores[position] = -neg_score
        row = np.where(taken[scene], -1.0, overlaps[scene][index])
        if row.size == 0:
            continue
        best = int(np.argmax(row))
        if row[best] >= iou_thresh:
            taken[scene][best] = True
            true_positive[position] = True

    total = sum(len(truths) for truths in truths_per_scene)
    return scores, true_positive, total


def precision_recall(true_positive, total):
    hits = np.cumsum(true_positive)
    precision = hits / np.arange(1, len(true_positive) + 1)
    recall = hits / total
    return precision, recall


def interpolated_ap(precision, recall):
    """
    All-point interpolated area under a precision / recall curve
    """
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    for index in range(len(mpre) - 2, -1, -1):
        mpre[index] = max(mpre[index], mpre[index + 1])
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def average_precision(detections_per_scene, truths_per_scene, iou_thresh):
    """
    Returns:
        AP in [0, 1]. With no ground truth at all it is 1 when there are
        no detections either and 0 otherwise
    """
    _, true_positive, total = match_detections(detections_per_scene, truths_per_scene, iou_thresh)
    if total == 0:
        return 1.0 if len(true_positive) == 0 else 0.0
    if len(true_positive) == 0:
        return 0.0
    precision, recall = precision_recall(true_positive, total)
    return interpolated_ap(precision, recall)
