"""Rayleigh channel realizations and the CSI-error model.

Channels are uncorrelated Rayleigh: entry ``i`` of the UE-k / RRH-b block is
CN(0, delta[k, b]).  The estimation-error model is parametric: the error
covariance of UE k is block diagonal with block ``epsilon * delta[k, b] * I``,
and the estimate is ``h - h_err`` with ``h_err`` drawn from that covariance.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import SystemGeometry


@dataclass(frozen=True)
class ChannelState:
    """One channel realization: true channels, estimates, error covariances.

    ``h`` and ``h_hat`` are (K, B*M) with the per-RRH blocks concatenated;
    ``c_err`` is (K, B*M, B*M) Hermitian PSD.
    """

    h: np.ndarray
    h_hat: np.ndarray
    c_err: np.ndarray


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def draw_channels(geometry: SystemGeometry, seed) -> ChannelState:
    """Draw one Rayleigh realization (perfect CSI: estimates equal truth)."""
    if np.any(geometry.delta <= 0.0):
        raise ValueError("pathloss gains must be strictly positive")
    rng = _as_rng(seed)
    B, M, K = geometry.B, geometry.M, geometry.K
    n = B * M
    h = np.empty((K, n), dtype=complex)
    for k in range(K):
        # Per-entry variance delta[k, b], split evenly between I and Q.
        scale = np.repeat(np.sqrt(geometry.delta[k] / 2.0), M)
        h[k] = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    c_err = np.zeros((K, n, n), dtype=complex)
    return ChannelState(h=h, h_hat=h.copy(), c_err=c_err)


def apply_csi_model(state: ChannelState, geometry: SystemGeometry,
                    mode="perfect", epsilon=0.0, seed=None) -> ChannelState:
    """Attach channel estimates to a realization.

    ``mode="perfect"`` copies the truth and zeroes the error covariance.
    ``mode="synthetic"`` uses error variance ``epsilon * delta`` per entry,
    0 <= epsilon < 1.
    """
    if mode == "perfect":
        n = state.h.shape[1]
        return ChannelState(h=state.h, h_hat=state.h.copy(),
                            c_err=np.zeros((state.h.shape[0], n, n), dtype=complex))
    if mode != "synthetic":
        raise ValueError(f"unknown CSI mode {mode!r}")
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must lie in [0, 1)")
    if epsilon == 0.0:
        return apply_csi_model(state, geometry, mode="perfect")
    rng = _as_rng(seed)
    B, M, K = geometry.B, geometry.M, geometry.K
    n = B * M
    h_hat = np.empty_like(state.h)
    c_err = np.zeros((K, n, n), dtype=complex)
    for k in range(K):
        var = np.repeat(epsilon * geometry.delta[k], M)
        err = np.sqrt(var / 2.0) * (rng.standard_normal(n)
                                    + 1j * rng.standard_normal(n))
        h_hat[k] = state.h[k] - err
        c_err[k][np.diag_indices(n)] = var
    return ChannelState(h=state.h, h_hat=h_hat, c_err=c_err)
