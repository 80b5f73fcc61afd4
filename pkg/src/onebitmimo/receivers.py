"""Linear receivers and the per-UE SINDR.

Both receivers act on the quantized output: MRC applies the linear gain to
the channel estimate, MMSE additionally whitens by the quantizer-output
covariance.  The SINDR uses the compact ratio form

    rho_k |w^H A h_k|^2 / (w^H C_r w - rho_k |w^H A h_k|^2),

whose denominator collects estimation error, interference, noise and
quantization distortion in one piece.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channels import ChannelState
from .errors import DegenerateSindrError, IllConditionedMatrixError
from .quantization import QuantizedModel, build_model

_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class ReceiverBank:
    """Per-UE combining vectors, stacked as rows of ``w`` (K, N)."""

    kind: str   # "bmrc" or "bmmse"
    w: np.ndarray


@dataclass(frozen=True)
class SindrReport:
    """Achieved SINDRs next to the targets they are measured against."""

    sindr: np.ndarray
    gamma_target: np.ndarray


def factor_output_covariance(c_r_hat):
    """Cholesky factor of the quantizer-output covariance.

    Adds a diagonal jitter of 1e-12 * trace / N once if the factorization
    fails, and rejects matrices with 1-norm condition estimate above 1e12.
    """
    n = c_r_hat.shape[0]
    anorm = np.linalg.norm(c_r_hat, 1)
    try:
        factor = scipy.linalg.cho_factor(c_r_hat, lower=True)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * np.real(np.trace(c_r_hat)) / n
        try:
            factor = scipy.linalg.cho_factor(
                c_r_hat + jitter * np.eye(n), lower=True)
        except np.linalg.LinAlgError as exc:
            raise IllConditionedMatrixError(
                "output covariance is not positive definite") from exc
    rcond, info = scipy.linalg.lapack.zpocon(factor[0], anorm, uplo=b"L")
    if info == 0 and rcond < 1.0 / _MAX_CONDITION:
        raise IllConditionedMatrixError(
            f"output covariance condition number ~{1.0 / max(rcond, 1e-300):.2e}")
    return factor


def bmrc(model: QuantizedModel, channels: ChannelState) -> ReceiverBank:
    """Gain-weighted MRC: w_k = A h_hat_k."""
    return ReceiverBank(kind="bmrc", w=model.a_hat[None, :] * channels.h_hat)


def bmmse(model: QuantizedModel, channels: ChannelState, rho) -> ReceiverBank:
    """MMSE combining: w_k = sqrt(rho_k) C_r^{-1} A h_hat_k."""
    rho = np.asarray(rho, dtype=float)
    u = (model.a_hat[None, :] * channels.h_hat)
    factor = factor_output_covariance(model.c_r_hat)
    solved = scipy.linalg.cho_solve(factor, u.T)
    w = np.sqrt(rho)[:, None] * solved.T
    return ReceiverBank(kind="bmmse", w=w)


def sindr(model: QuantizedModel, channels: ChannelState, rho,
          bank: ReceiverBank) -> np.ndarray:
    """Per-UE SINDR for arbitrary combining vectors (compact ratio form)."""
    rho = np.asarray(rho, dtype=float)
    u = model.a_hat[None, :] * channels.h_hat
    out = np.empty(rho.shape[0])
    for k in range(rho.shape[0]):
        w = bank.w[k]
        num = rho[k] * np.abs(np.vdot(w, u[k])) ** 2
        if num == 0.0:
            out[k] = 0.0
            continue
        den = np.real(np.vdot(w, model.c_r_hat @ w)) - num
        if den <= 0.0:
            raise DegenerateSindrError(
                f"non-positive SINDR denominator {den!r} for UE {k}")
        out[k] = num / den
    return out


def sindr_bmrc(model: QuantizedModel, channels: ChannelState, rho) -> np.ndarray:
    """Closed-form SINDR with the MRC receiver."""
    rho = np.asarray(rho, dtype=float)
    u = model.a_hat[None, :] * channels.h_hat
    s = np.sum(np.abs(u) ** 2, axis=1)
    cu = model.c_r_hat @ u.T
    quad = np.real(np.einsum("ik,ik->k", u.conj().T, cu))
    num = rho * s ** 2
    out = np.empty_like(num)
    for k in range(num.shape[0]):
        if num[k] == 0.0:
            out[k] = 0.0
            continue
        den = quad[k] - num[k]
        if den <= 0.0:
            raise DegenerateSindrError(
                f"non-positive SINDR denominator {den!r} for UE {k}")
        out[k] = num[k] / den
    return out


def sindr_bmmse(model: QuantizedModel, channels: ChannelState, rho) -> np.ndarray:
    """Closed-form SINDR with the MMSE receiver."""
    rho = np.asarray(rho, dtype=float)
    u = model.a_hat[None, :] * channels.h_hat
    factor = factor_output_covariance(model.c_r_hat)
    v = scipy.linalg.cho_solve(factor, u.T)
    t = np.real(np.einsum("ik,ik->k", u.conj().T, v))
    num = rho * t ** 2
    out = np.empty_like(num)
    for k in range(num.shape[0]):
        if num[k] == 0.0:
            out[k] = 0.0
            continue
        den = t[k] - num[k]
        if den <= 0.0:
            raise DegenerateSindrError(
                f"non-positive SINDR denominator {den!r} for UE {k}")
        out[k] = num[k] / den
    return out


def sindr_for_kind(model, channels, rho, kind):
    if kind == "bmrc":
        return sindr_bmrc(model, channels, rho)
    if kind == "bmmse":
        return sindr_bmmse(model, channels, rho)
    raise ValueError(f"unknown receiver kind {kind!r}")


def build_receivers(model, channels, rho, kind) -> ReceiverBank:
    if kind == "bmrc":
        return bmrc(model, channels)
    if kind == "bmmse":
        return bmmse(model, channels, rho)
    raise ValueError(f"unknown receiver kind {kind!r}")


def evaluate_sindr(channels, point, kind="bmmse", bypass=False):
    """Convenience: rebuild the quantized model and return per-UE SINDRs."""
    model = build_model(channels, point, bypass=bypass)
    return sindr_for_kind(model, channels, point.rho, kind)


def sindr_constraint_margin(model, channels, rho, gamma_targets, kind):
    """Constraint slack per UE; >= 0 exactly when the SINDR meets its target.

    MRC:  (gamma+1) rho_k s_k^2 - gamma u_k^H C_r u_k  with s_k = u_k^H u_k,
    MMSE: (gamma+1) rho_k t_k - gamma            with t_k = u_k^H C_r^{-1} u_k,
    where u_k = A h_hat_k.
    """
    rho = np.asarray(rho, dtype=float)
    gamma = np.asarray(gamma_targets, dtype=float)
    u = model.a_hat[None, :] * channels.h_hat
    if kind == "bmrc":
        s = np.sum(np.abs(u) ** 2, axis=1)
        quad = np.real(np.einsum("ki,ik->k", u.conj(), model.c_r_hat @ u.T))
        return (gamma + 1.0) * rho * s ** 2 - gamma * quad
    if kind == "bmmse":
        factor = factor_output_covariance(model.c_r_hat)
        v = scipy.linalg.cho_solve(factor, u.T)
        t = np.real(np.einsum("ki,ik->k", u.conj(), v))
        return (gamma + 1.0) * rho * t - gamma
    raise ValueError(f"unknown receiver kind {kind!r}")
