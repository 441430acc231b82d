"""Frenet-frame conventions and vehicle-footprint distances.

The weaving segment is treated as a straightened corridor: ``s`` runs along the
road, ``d`` is measured from the outermost (off-ramp side) road boundary and
grows toward the inner lanes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class FrenetPoint:
    s: float
    d: float


@dataclass(frozen=True)
class Footprint:
    length: float
    width: float

    def __post_init__(self):
        if not (self.length > 0 and self.width > 0):
            raise ValueError(f"footprint dimensions must be positive, got {self.length}x{self.width}")


@dataclass(frozen=True)
class BodyPoint:
    x: float
    y: float


def to_body_frame(p: FrenetPoint, center: FrenetPoint, yaw: float) -> BodyPoint:
    """Translate ``p`` to ``center`` and rotate into the vehicle axes (x forward, y left)."""
    ds = p.s - center.s
    dd = p.d - center.d
    c, sn = math.cos(yaw), math.sin(yaw)
    return BodyPoint(c * ds + sn * dd, -sn * ds + c * dd)


def from_body_frame(bp: BodyPoint, center: FrenetPoint, yaw: float) -> FrenetPoint:
    c, sn = math.cos(yaw), math.sin(yaw)
    return FrenetPoint(center.s + c * bp.x - sn * bp.y, center.d + sn * bp.x + c * bp.y)


def footprint_distance(bp: BodyPoint, fp: Footprint) -> float:
    """Euclidean distance from a body-frame point to the footprint rectangle (0 inside)."""
    hl, hw = fp.length / 2.0, fp.width / 2.0
    ax, ay = abs(bp.x), abs(bp.y)
    if ax <= hl and ay <= hw:
        return 0.0
    if ay <= hw:
        return ax - hl
    if ax <= hl:
        return ay - hw
    return min(
        math.hypot(bp.x - hl, bp.y - hw),
        math.hypot(bp.x - hl, bp.y + hw),
        math.hypot(bp.x + hl, bp.y - hw),
        math.hypot(bp.x + hl, bp.y + hw),
    )
