"""
Two-dimensional ray tracing between vehicles.

Vehicles are axis-aligned rectangles driving along +x.  A hop has one LOS
ray between the facing ends of the two vehicles, blocked when any other
vehicle's rectangle crosses it, plus one specular reflection per outward
facing side surface of every other vehicle (image-source construction).
Amplitudes follow free space with path loss exponent 2.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import constants
from shapely.geometry import LineString, Polygon, box

from app.channel.mobility import MobilityTrace
from app.channel.paths import BlockState, Path, PathSet

DEFAULT_VEHICLE_WIDTH = 1.8


def _angle(dx: float, dy: float) -> float:
    """Angle between a ray direction and the x-aligned array axis, in [0, pi]."""
    norm = math.hypot(dx, dy)
    return float(np.arccos(np.clip(dx / norm, -1.0, 1.0)))


def facing_ends(
    trace: MobilityTrace, tx: str, rx: str, t: float
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Antenna positions at the ends of the two vehicles that face each other."""
    tr_tx, tr_rx = trace.track(tx), trace.track(rx)
    (xt, yt), (xr, yr) = tr_tx.position(t), tr_rx.position(t)
    sign = 1.0 if xr >= xt else -1.0
    return (xt + sign * tr_tx.length / 2.0, yt), (xr - sign * tr_rx.length / 2.0, yr)


def raytrace_paths(
    trace: MobilityTrace,
    tx: str,
    rx: str,
    t: float,
    *,
    vehicle_width: float = DEFAULT_VEHICLE_WIDTH,
    carrier_freq: float = 28e9,
    d_ref: float = 1.0,
) -> PathSet:
    """
    Paths of the hop *tx* -> *rx* at time *t*.

    Gains are ``(d_ref / length) * exp(-j 2 pi length / lambda)``; delays
    are excess delays relative to the LOS ray.  The returned set is marked
    blocked when every path is blocked.
    """
    if tx == rx:
        raise ValueError("Transmitter and receiver must be different vehicles")
    p_tx, p_rx = facing_ends(trace, tx, rx, t)
    los_len = math.dist(p_tx, p_rx)
    if los_len == 0:
        raise ValueError(f"Vehicles {tx!r} and {rx!r} coincide at t={t}")

    obstacles: dict[str, Polygon] = {}
    for vid, track in trace.tracks.items():
        if vid in (tx, rx) or not track.present(t):
            continue
        x, y = track.position(t)
        obstacles[vid] = box(
            x - track.length / 2.0,
            y - vehicle_width / 2.0,
            x + track.length / 2.0,
            y + vehicle_width / 2.0,
        )

    def blocked(segment: LineString, skip: str | None = None) -> bool:
        return any(
            segment.intersects(poly) for vid, poly in obstacles.items() if vid != skip
        )

    wavelength = constants.c / carrier_freq

    def make_path(length: float, phi_d: float, phi_a: float, is_blocked: bool) -> Path:
        alpha = (d_ref / length) * np.exp(-2j * np.pi * length / wavelength)
        return Path(
            alpha=complex(alpha),
            phi_a=phi_a,
            phi_d=phi_d,
            tau=max(0.0, (length - los_len) / constants.c),
            c_bl=0 if is_blocked else 1,
        )

    los_blocked = blocked(LineString([p_tx, p_rx]))
    paths = [
        make_path(
            los_len,
            _angle(p_rx[0] - p_tx[0], p_rx[1] - p_tx[1]),
            _angle(p_tx[0] - p_rx[0], p_tx[1] - p_rx[1]),
            los_blocked,
        )
    ]

    for vid, poly in obstacles.items():
        x_min, y_low, x_max, y_high = poly.bounds
        for y_s, outward in ((y_low, -1.0), (y_high, 1.0)):
            # both endpoints must sit on the outward side of this surface
            if not ((p_tx[1] - y_s) * outward > 0 and (p_rx[1] - y_s) * outward > 0):
                continue
            image = (p_tx[0], 2.0 * y_s - p_tx[1])
            s = (y_s - image[1]) / (p_rx[1] - image[1])
            hit = (image[0] + s * (p_rx[0] - image[0]), y_s)
            if not x_min <= hit[0] <= x_max:
                continue
            length = math.dist(image, p_rx)
            leg_blocked = blocked(LineString([p_tx, hit]), skip=vid) or blocked(
                LineString([hit, p_rx]), skip=vid
            )
            paths.append(
                make_path(
                    length,
                    _angle(hit[0] - p_tx[0], hit[1] - p_tx[1]),
                    _angle(hit[0] - p_rx[0], hit[1] - p_rx[1]),
                    leg_blocked,
                )
            )

    all_blocked = all(p.c_bl == 0 for p in paths)
    return PathSet(
        paths=tuple(paths),
        block_state=BlockState.BLOCKED if all_blocked else BlockState.UNBLOCKED,
        block_timer=0,
    )
