"""
Geometry Utilities
Distances between lattice points and the finite sets used by weight functions.
"""

import math
from typing import Sequence, Tuple

import numpy as np
import shapely
from shapely.geometry import LineString, Point

Point2 = Tuple[float, float]
Segment2 = Tuple[Point2, Point2]


def calculate_distance(point1: Point2, point2: Point2) -> float:
    """
    Calculate the Euclidean distance between two points.

    Args:
        point1: First point (x, y)
        point2: Second point (x, y)

    Returns:
        Distance in length units
    """
    x1, y1 = point1
    x2, y2 = point2
    return math.hypot(x2 - x1, y2 - y1)


def distance_to_set(
    x: np.ndarray,
    y: np.ndarray,
    points: Sequence[Point2] = (),
    segments: Sequence[Segment2] = (),
) -> np.ndarray:
    """
    Distance from every (x, y) pair to the union of a point set and a segment set.

    Args:
        x, y: Coordinate arrays of identical shape
        points: Finite list of points
        segments: Finite list of segments ((x0, y0), (x1, y1))

    Returns:
        Array of distances with the shape of ``x``
    """
    geoms = [Point(p) for p in points] + [LineString(s) for s in segments]
    if not geoms:
        raise ValueError("distance_to_set needs at least one point or segment")

    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nodes = shapely.points(x.ravel(), y.ravel())
    dist = np.minimum.reduce([shapely.distance(nodes, g) for g in geoms])
    return np.asarray(dist, dtype=float).reshape(x.shape)
