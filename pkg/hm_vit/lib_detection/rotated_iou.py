#!/usr/bin/env python3


"""

Rotated box IoU by convex polygon clipping (Sutherland-Hodgman)

"""


import numpy as np


AREA_EPS = 1e-12


def polygon_area(points):
    """
    Shoelace area of a simple polygon given as an [n, 2] array
    """
    points = np.asarray(points, dtype=float)
    if len(points) < 3:
        return 0.0
    x = points[:, 0]
    y = points[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _cross(edge_start, edge_end, point):
    return ((edge_end[0] - edge_start[0]) * (point[1] - edge_start[1])
            - (edge_end[1] - edge_start[1]) * (point[0] - edge_start[0]))


def _line_hit(start, end, edge_start, edge_end):
    """
    Point where segment start->end crosses the line through the clip edge
    """
    d_start = _cross(edge_start, edge_end, start)
    d_end = _cross(edge_start, edge_end, end)
    t = d_start / (d_start - d_end)
    return (start[0] + t * (end[0] - start[0]), start[1] + t * (end[1] - start[1]))


def clip_polygon(subject, clipper):
    """
    Clips a polygon against a convex counter-clockwise clipper

    Inputs:
        subject: sequence of (x, y) vertices

        clipper: convex polygon, counter-clockwise

    Returns:
        list of (x, y) vertices of the intersection, possibly empty
    """
    output = [tuple(point) for point in subject]
    clipper = [tuple(point) for point in clipper]

    for index, edge_start in enumerate(clipper):
        edge_end = clipper[(index + 1) % len(clipper)]
        candidates = output
        output = []
        if not candidates:
            break

        previous = candidates[-1]
        previous_inside = _cross(edge_start, edge_end, previous) >= 0.0
        for current in candidates:
            current_inside = _cross(edge_start, edge_end, current) >= 0.0
            if current_inside:
                if not previous_inside:
                    output.append(_line_hit(previous, current, edge_start, edge_end))
                output.append(current)
            elif previous_inside:
                output.append(_line_hit(previous, current, edge_start, edge_end))
            previous, previous_inside = current, current_inside

    return output


def intersection_area(first, second):
    overlap = clip_polygon(first.corners(), second.corners())
    return polygon_area(overlap) if len(overlap) >= 3 else 0.0


def rotated_iou(first, second):
    """
    Intersection over union of two BoxBEV

    Returns:
        float in [0, 1], 0 for degenerate boxes
    """
    area_a = first.area
    area_b = second.area
    if area_a < AREA_EPS or area_b < AREA_EPS:
        return 0.0
    inter = intersection_area(first, second)
    union = area_a + area_b - inter
    if union < AREA_EPS:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def iou_matrix(boxes_a, boxes_b):
    """
    Pairwise IoU, [len(boxes_a), len(boxes_b)]
    """
    out = np.zeros((len(boxes_a), len(boxes_b)))
    for row, first in enumerate(boxes_a):
        for col, second in enumerate(boxes_b):
            out[row, col] = rotated_iou(first, second)
    return out
