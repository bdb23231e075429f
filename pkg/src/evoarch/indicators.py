"""Hypervolume of a minimized point set, used as a run diagnostic only."""

from __future__ import annotations

from typing import Sequence


def hypervolume_2d(points: Sequence[tuple[float, float]],
                   ref: tuple[float, float]) -> float:
    """Area dominated by ``points`` and bounded by ``ref`` (minimization)."""
    pts = [p for p in points if p[0] < ref[0] and p[1] < ref[1]]
    if not pts:
        return 0.0
    # keep the non-dominated staircase, sweeping x ascending
    pts.sort()
    stairs: list[tuple[float, float]] = []
    best_y = float("inf")
    for x, y in pts:
        if y < best_y:
            stairs.append((x, y))
            best_y = y
    area = 0.0
    prev_y = ref[1]
    for x, y in stairs:
        area += (ref[0] - x) * (prev_y - y)
        prev_y = y
    return area


def hypervolume_3d(points: Sequence[tuple[float, float, float]],
                   ref: tuple[float, float, float]) -> float:
    """Volume dominated by ``points`` and bounded by ``ref`` (minimization).

    Exact sweep over the third coordinate: between consecutive z levels the
    dominated cross-section is the 2D hypervolume of the points already
    introduced, so the volume is the sum of slab areas times slab heights.
    """
    pts = [p for p in points if all(p[i] < ref[i] for i in range(3))]
    if not pts:
        return 0.0
    levels = sorted({p[2] for p in pts})
    levels.append(ref[2])
    volume = 0.0
    for lo, hi in zip(levels[:-1], levels[1:]):
        sl = [(p[0], p[1]) for p in pts if p[2] <= lo]
        volume += hypervolume_2d(sl, (ref[0], ref[1])) * (hi - lo)
    return volume
