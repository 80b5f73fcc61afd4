"""Deployment geometry and large-scale fading gains.

RRHs are placed on a configurable layout, UEs in a square cluster whose
nearest corner sits at distance ``d_ref`` from the reference (first) RRH
along the cluster axis.  Distances are 3-D Euclidean including antenna
heights, which keeps the pathloss finite even when a UE stands directly
under an RRH.
"""

from dataclasses import dataclass

import numpy as np

# 28 GHz urban model: -61 dB gain at 1 m, pathloss exponent 3.
_GAIN_AT_1M_DB = -61.0
_PATHLOSS_EXPONENT = 3.0

_MIN_SEPARATION_M = 1e-3


def pathloss_db(d):
    """Large-scale channel gain in dB at 3-D distance ``d`` meters.

    Accepts scalars or arrays; raises ValueError for non-positive distances.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("distance must be positive")
    return _GAIN_AT_1M_DB - 10.0 * _PATHLOSS_EXPONENT * np.log10(d)


def pathloss_gain(d):
    """Linear-scale version of :func:`pathloss_db`."""
    return 10.0 ** (pathloss_db(d) / 10.0)


@dataclass(frozen=True)
class SystemGeometry:
    """Fixed deployment: positions, distances and pathloss gains.

    ``d`` and ``delta`` are K x B (UE rows, RRH columns); ``delta_b_max[b]``
    is the largest gain any UE has toward RRH ``b``.
    """

    B: int
    M: int
    K: int
    rrh_positions: np.ndarray  # (B, 3) meters
    ue_positions: np.ndarray   # (K, 3) meters
    d_ref: float
    b_cluster: float
    d: np.ndarray              # (K, B) meters
    delta: np.ndarray          # (K, B) linear gains
    delta_b_max: np.ndarray    # (B,)


def _rrh_layout(n_rrh, layout, spacing, height, positions):
    if layout == "explicit":
        pos = np.asarray(positions, dtype=float)
        if pos.shape != (n_rrh, 3):
            raise ValueError("explicit RRH positions must have shape (B, 3)")
        return pos
    if layout == "line":
        pos = np.zeros((n_rrh, 3))
        pos[:, 0] = spacing * np.arange(n_rrh)
    elif layout == "square_grid":
        side = int(np.ceil(np.sqrt(n_rrh)))
        pos = np.zeros((n_rrh, 3))
        for b in range(n_rrh):
            pos[b, 0] = spacing * (b % side)
            pos[b, 1] = spacing * (b // side)
    else:
        raise ValueError(f"unknown RRH layout {layout!r}")
    pos[:, 2] = height
    return pos


def _cluster_axis(layout):
    # Cluster moves along the grid diagonal for square layouts and along the
    # RRH line otherwise, starting from the reference (first) RRH.
    if layout == "square_grid":
        return np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
    return np.array([1.0, 0.0, 0.0])


def _ue_layout(n_ue, center, radius, height):
    # K = 4 lands exactly on the corners of a b x b axis-aligned square
    # (circumradius b/sqrt(2), angles 45..315 degrees); other K are spread
    # evenly on the same circle.
    pos = np.zeros((n_ue, 3))
    angles = np.pi / 4.0 + 2.0 * np.pi * np.arange(n_ue) / max(n_ue, 1)
    pos[:, 0] = center[0] + radius * np.cos(angles)
    pos[:, 1] = center[1] + radius * np.sin(angles)
    pos[:, 2] = height
    return pos


def build_geometry(n_rrh, ants_per_rrh, n_ue, layout="square_grid",
                   spacing=100.0, d_ref=0.0, b_cluster=10.0,
                   rrh_height=5.0, ue_height=0.0,
                   rrh_positions=None, ue_positions=None):
    """Place RRHs and UEs and evaluate all pairwise pathloss gains.

    The UE cluster center sits at ``d_ref + b_cluster/sqrt(2)`` from the
    reference RRH along the cluster axis, so the nearest cluster corner is at
    ground distance ``d_ref``.  Explicit position arrays override the layout.
    """
    if n_rrh < 1 or ants_per_rrh < 1 or n_ue < 1:
        raise ValueError("counts B, M, K must all be >= 1")
    rrh = _rrh_layout(n_rrh, layout, spacing, rrh_height, rrh_positions)
    if ue_positions is not None:
        ue = np.asarray(ue_positions, dtype=float)
        if ue.shape != (n_ue, 3):
            raise ValueError("explicit UE positions must have shape (K, 3)")
    else:
        axis = _cluster_axis(layout)
        center = rrh[0] * np.array([1.0, 1.0, 0.0]) \
            + (d_ref + b_cluster / np.sqrt(2.0)) * axis
        radius = b_cluster / np.sqrt(2.0)
        ue = _ue_layout(n_ue, center, radius, ue_height)

    diff = ue[:, None, :] - rrh[None, :, :]
    d = np.linalg.norm(diff, axis=2)
    if np.any(d < _MIN_SEPARATION_M):
        raise ValueError("UE and RRH positions coincide")
    delta = pathloss_gain(d)
    return SystemGeometry(
        B=int(n_rrh), M=int(ants_per_rrh), K=int(n_ue),
        rrh_positions=rrh, ue_positions=ue,
        d_ref=float(d_ref), b_cluster=float(b_cluster),
        d=d, delta=delta, delta_b_max=delta.max(axis=0),
    )
