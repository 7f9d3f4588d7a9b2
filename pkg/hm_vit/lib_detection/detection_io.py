#!/usr/bin/env python3


"""

Detections export

Tab separated, one header line, one box per line:

    scene  kind  score  cx  cy  w  l  yaw

kind is 'det' for a detection and 'gt' for a ground truth box (score 1).
Reals are written with 6 decimals so reruns diff cleanly

"""


import csv

from lib_autodiff.errors import ConfigurationError
from lib_detection.boxes import BoxBEV, Detection


FIELDS = ('scene', 'kind', 'score', 'cx', 'cy', 'w', 'l', 'yaw')


def _row(scene, kind, score, box):
    return [str(scene), kind] + [f"{value:.6f}" for value in (score,) + box.as_tuple()]


def write_detections(path, detections_per_scene, truths_per_scene=None):
    """
    Inputs:
        path: Output file

        detections_per_scene: list (scene order) of lists of Detection

        truths_per_scene: Optional ground truth boxes to store alongside
    """
    with open(path, 'w', encoding='utf-8', newline='') as file:
        writer = csv.writer(file, delimiter='\t', lineterminator='\n')
        writer.writerow(FIELDS)
        for scene, detections in enumerate(detections_per_scene):
            for item in detections:
                writer.writerow(_row(scene, 'det', item.score, item.box))
            if truths_per_scene is not None:
                for box in truths_per_scene[scene]:
                    writer.writerow(_row(scene, 'gt', 1.0, box))


def read_detections(path):
    """
    Returns:
        (detections_per_scene, truths_per_scene), both as lists indexed by
        scene id
    """
    detections = {}
    truths = {}
    with open(path, 'r', encoding='utf-8', newline='') as file:
        reader = csv.DictReader(file, delimiter='\t')
        if tuple(reader.fieldnames or ()) != FIELDS:
            raise ConfigurationError(f"{path} is not a detections file, header: {reader.fieldnames}")
        for line in reader:
            try:
                scene = int(line['scene'])
                box = BoxBEV(*(float(line[key]) for key in ('cx', 'cy', 'w', 'l', 'yaw')))
                score = float(line['score'])
            except (TypeError, ValueError) as msg:
                raise ConfigurationError(f"Bad detections record in {path}: {msg}") from msg
            if line['kind'] == 'det':
                detections.setdefault(scene, []).append(Detection(box, score))
            elif line['kind'] == 'gt':
                truths.setdefault(scene, []).append(box)
            else:
                raise ConfigurationError(f"Unknown record kind in {path}: {line['kind']}")

    count = max(list(detections) + list(truths), default=-1) + 1
    return ([detections.get(scene, []) for scene in range(count)],
            [truths.get(scene, []) for scene in range(count)])
