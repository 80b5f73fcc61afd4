"""1-bit quantizer and the Bussgang-decomposition second-order model.

Given the received-signal covariance, the quantizer output decomposes into a
diagonal linear gain acting on the input plus uncorrelated distortion.  The
output covariance follows the arcsine law, so everything downstream (receivers,
SINDR, derivatives) only needs the quantities assembled here.
"""

from dataclasses import dataclass

import numpy as np

from .channels import ChannelState
from .errors import NumericalConsistencyError

# Hermitian round-off can push normalized correlations slightly past 1.
ARCSINE_CLIP_TOL = 1e-9

SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


@dataclass(frozen=True)
class PowerDitherPoint:
    """Operating point: UE transmit powers and per-RRH dithering levels.

    ``rho`` is in watts, ``sigma`` in sqrt-watts (``sigma**2`` is the total
    noise-plus-dithering power at each RRH antenna).  ``rho_ue_max`` caps the
    per-UE power in the max-min design; ``rho_max`` is the cap used by the
    infeasibility penalty of the joint min-power search.
    """

    rho: np.ndarray
    sigma: np.ndarray
    sigma_min: float
    rho_ue_max: float = np.inf
    rho_max: float = np.inf

    def __post_init__(self):
        object.__setattr__(self, "rho", np.asarray(self.rho, dtype=float))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))
        if np.any(self.rho < 0.0):
            raise ValueError("UE powers must be nonnegative")
        if np.any(self.sigma < self.sigma_min * (1.0 - 1e-12)):
            raise ValueError("dithering levels must not fall below sigma_min")

    @property
    def n_ue(self):
        return self.rho.shape[0]

    @property
    def n_rrh(self):
        return self.sigma.shape[0]

    def scaled(self, rho=None, sigma=None):
        """Copy with replaced power or dithering vectors."""
        return PowerDitherPoint(
            rho=self.rho if rho is None else rho,
            sigma=self.sigma if sigma is None else sigma,
            sigma_min=self.sigma_min,
            rho_ue_max=self.rho_ue_max, rho_max=self.rho_max)


@dataclass(frozen=True)
class QuantizedModel:
    """Second-order quantities of the quantized uplink at one operating point.

    ``a_hat`` holds the diagonal of the (real, positive) linear gain matrix.
    With ``bypass=True`` the quantizer is replaced by identity (gain one, zero
    distortion, ``c_r_hat == c_y_hat``); that mode exists purely as a test
    fixture for the termination detectors and models an unquantized system.
    """

    c_y_hat: np.ndarray   # (N, N) Hermitian received covariance
    a_hat: np.ndarray     # (N,) linear-gain diagonal
    c_r_hat: np.ndarray   # (N, N) Hermitian quantizer-output covariance
    c_q_hat: np.ndarray   # (N, N) Hermitian distortion covariance
    point: PowerDitherPoint
    n_rrh: int
    ants_per_rrh: int
    bypass: bool = False

    def antenna_block(self, b):
        """Index slice of RRH ``b``'s antennas in the stacked vector."""
        m = self.ants_per_rrh
        return slice(b * m, (b + 1) * m)

    def noise_mask(self, b):
        """Boolean selector of RRH ``b``'s antennas (diagonal of E_b)."""
        mask = np.zeros(self.n_rrh * self.ants_per_rrh, dtype=bool)
        mask[self.antenna_block(b)] = True
        return mask


def quantize(y):
    """Elementwise 1-bit quantization of I and Q: (sgn(Re) + j sgn(Im))/sqrt(2).

    sgn(0) := +1 so that ties are deterministic.
    """
    y = np.asarray(y)
    re = np.where(y.real >= 0.0, 1.0, -1.0)
    im = np.where(y.imag >= 0.0, 1.0, -1.0)
    return (re + 1j * im) / np.sqrt(2.0)


def covariance_y(channels: ChannelState, point: PowerDitherPoint):
    """Received-signal covariance from channel estimates and error covariances.

    Sum over UEs of rho_k (h_hat_k h_hat_k^H + C_err_k) plus the block-diagonal
    noise covariance diag(sigma_b^2 I_M).
    """
    h_hat = channels.h_hat
    n = h_hat.shape[1]
    m = n // point.n_rrh
    c = (h_hat.T * point.rho) @ h_hat.conj()
    if channels.c_err.size:
        c = c + np.tensordot(point.rho, channels.c_err, axes=1)
    c[np.diag_indices(n)] += np.repeat(point.sigma ** 2, m)
    return 0.5 * (c + c.conj().T)


def bussgang_gain(c_y_hat):
    """Diagonal of the linear gain: sqrt(2/pi) / sqrt(diag(C_y))."""
    d = np.real(np.diag(c_y_hat))
    if np.any(d <= 0.0):
        raise ValueError("received covariance has a non-positive diagonal entry")
    return SQRT_2_OVER_PI / np.sqrt(d)


def _normalized_parts(c_y_hat):
    d = np.real(np.diag(c_y_hat))
    if np.any(d <= 0.0):
        raise ValueError("received covariance has a non-positive diagonal entry")
    s = 1.0 / np.sqrt(d)
    x_re = s[:, None] * c_y_hat.real * s[None, :]
    x_im = s[:, None] * c_y_hat.imag * s[None, :]
    return x_re, x_im


def arcsine_covariance(c_y_hat):
    """Quantizer-output covariance via the arcsine law.

    Correlation arguments are clamped to [-1, 1]; anything beyond the clamp
    tolerance indicates an invalid input covariance.
    """
    x_re, x_im = _normalized_parts(c_y_hat)
    worst = max(np.abs(x_re).max(), np.abs(x_im).max())
    if worst > 1.0 + ARCSINE_CLIP_TOL:
        raise NumericalConsistencyError(
            f"normalized correlation {worst!r} exceeds 1 beyond tolerance")
    c_r = (2.0 / np.pi) * (np.arcsin(np.clip(x_re, -1.0, 1.0))
                           + 1j * np.arcsin(np.clip(x_im, -1.0, 1.0)))
    # Unit-modulus outputs: the diagonal is exactly 1.
    np.fill_diagonal(c_r, 1.0)
    return c_r


def qd_covariance(c_y_hat, a_hat, c_r_hat):
    """Distortion covariance: C_r - A C_y A^H."""
    return c_r_hat - np.outer(a_hat, a_hat) * c_y_hat


def build_model(channels: ChannelState, point: PowerDitherPoint,
                bypass=False) -> QuantizedModel:
    """Assemble all second-order quantities at one operating point."""
    c_y = covariance_y(channels, point)
    n = c_y.shape[0]
    b = point.n_rrh
    if bypass:
        a = np.ones(n)
        c_r = c_y.copy()
        c_q = np.zeros_like(c_y)
    else:
        a = bussgang_gain(c_y)
        c_r = arcsine_covariance(c_y)
        c_q = qd_covariance(c_y, a, c_r)
    return QuantizedModel(c_y_hat=c_y, a_hat=a, c_r_hat=c_r, c_q_hat=c_q,
                          point=point, n_rrh=b, ants_per_rrh=n // b,
                          bypass=bypass)
