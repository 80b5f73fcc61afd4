"""Analytic derivatives of the quantized model and the design Lagrangians.

Everything here is exact chain-rule differentiation of the pipeline
received-covariance -> linear gain -> arcsine law, with respect to one UE
power or one RRH dithering level.  Each off-diagonal entry of the output
covariance is (2/pi) arcsin of a normalized correlation, so its derivative
carries a 1/sqrt(1 - x^2) factor evaluated at the real- and imaginary-part
arguments separately; the diagonal is constant and its derivative is zero.

The derivative entries blow up at |x| -> 1 (the arcsine branch edge); they
are clamped at |x| = 1 - 1e-6 with a warning since unbounded gradients would
destabilize the dual updates downstream.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DerivativeSingularityError
from .quantization import QuantizedModel
from .receivers import factor_output_covariance

_CLAMP_EDGE = 1.0 - 1e-6


@dataclass(frozen=True)
class DerivativeBundle:
    """All model derivatives at one operating point.

    ``d_a_*`` store diagonals only ((K, N) resp. (B, N)); the ``d_cr_*``
    matrices are Hermitian with exactly zero diagonal.
    """

    d_a_d_rho: np.ndarray      # (K, N)
    d_cr_d_rho: np.ndarray     # (K, N, N)
    d_a_d_sigma: np.ndarray    # (B, N)
    d_cr_d_sigma: np.ndarray   # (B, N, N)


@dataclass
class DualState:
    """Nonnegative Lagrange multipliers and their step sizes."""

    mu: np.ndarray        # (K,) SINDR duals, min-power design
    upsilon: np.ndarray   # (B,) dithering-floor duals
    eta: np.ndarray       # (K,) SINDR duals, max-min design
    zeta_rho: float = 1e-3
    zeta_sigma: float = 1e-3
    nu: float = 1e-3
    kappa: float = 1e-2


def _singular_factors(x):
    """1/sqrt(1-x^2) with branch-edge clamping; raises at |x| >= 1."""
    worst = np.abs(x).max() if x.size else 0.0
    if worst >= 1.0:
        raise DerivativeSingularityError(
            f"arcsine derivative at branch edge, |argument| = {worst!r}")
    if worst > _CLAMP_EDGE:
        warnings.warn("arcsine derivative clamped near branch edge",
                      RuntimeWarning, stacklevel=3)
        x = np.clip(x, -_CLAMP_EDGE, _CLAMP_EDGE)
    return 1.0 / np.sqrt(1.0 - x * x)


def _d_gain(model: QuantizedModel, d_diag):
    """Derivative of the gain diagonal given d diag(C_y): -a * g / (2 d)."""
    d = np.real(np.diag(model.c_y_hat))
    return -0.5 * model.a_hat * d_diag / d


def _d_arcsine_cov(model: QuantizedModel, d_cy):
    """Derivative of the output covariance given the Hermitian d C_y."""
    c_y = model.c_y_hat
    a = model.a_hat
    d = np.real(np.diag(c_y))
    s = 1.0 / np.sqrt(d)
    x_re = np.clip(s[:, None] * c_y.real * s[None, :], -1.0, 1.0)
    x_im = np.clip(s[:, None] * c_y.imag * s[None, :], -1.0, 1.0)
    np.fill_diagonal(x_re, 0.0)  # diagonal excluded from the edge check
    np.fill_diagonal(x_im, 0.0)
    aa = np.outer(a, a)
    pre_re = aa * _singular_factors(x_re)
    pre_im = aa * _singular_factors(x_im)
    g = np.real(np.diag(d_cy))
    # Normalization term: (pi/4) * C_y(i,j) * (g_i a_i^2 + g_j a_j^2).
    ga2 = g * a ** 2
    norm = (np.pi / 4.0) * (ga2[:, None] + ga2[None, :])
    out = (pre_re * (d_cy.real - c_y.real * norm)
           + 1j * pre_im * (d_cy.imag - c_y.imag * norm))
    np.fill_diagonal(out, 0.0)
    return out


def d_bussgang_d_rho(model: QuantizedModel, channels, k):
    """Gain-diagonal derivative w.r.t. the power of UE ``k``."""
    g = np.abs(channels.h_hat[k]) ** 2
    if channels.c_err.size:
        g = g + np.real(np.diagonal(channels.c_err[k]))
    return _d_gain(model, g)


def d_cr_d_rho(model: QuantizedModel, channels, k):
    """Output-covariance derivative w.r.t. the power of UE ``k``."""
    hk = channels.h_hat[k]
    d_cy = np.outer(hk, hk.conj())
    if channels.c_err.size:
        d_cy = d_cy + channels.c_err[k]
    return _d_arcsine_cov(model, d_cy)


def d_bussgang_d_sigma(model: QuantizedModel, b):
    """Gain-diagonal derivative w.r.t. the dithering level of RRH ``b``."""
    mask = model.noise_mask(b)
    g = np.where(mask, 2.0 * model.point.sigma[b], 0.0)
    return _d_gain(model, g)


def d_cr_d_sigma(model: QuantizedModel, b):
    """Output-covariance derivative w.r.t. the dithering level of RRH ``b``."""
    mask = model.noise_mask(b)
    n = mask.shape[0]
    d_cy = np.zeros((n, n), dtype=complex)
    d_cy[np.diag_indices(n)] = np.where(mask, 2.0 * model.point.sigma[b], 0.0)
    return _d_arcsine_cov(model, d_cy)


def derivative_bundle(model: QuantizedModel, channels,
                      which="both") -> DerivativeBundle:
    """Evaluate power and/or dithering derivatives at the model's point.

    ``which`` restricts the work to "rho" or "sigma" when the caller only
    needs one family (the unused arrays come back empty).
    """
    K = channels.h_hat.shape[0]
    B = model.n_rrh
    n = channels.h_hat.shape[1]
    d_a_rho = np.empty((0, n))
    d_cr_rho = np.empty((0, n, n), dtype=complex)
    d_a_sig = np.empty((0, n))
    d_cr_sig = np.empty((0, n, n), dtype=complex)
    if which in ("rho", "both"):
        d_a_rho = np.empty((K, n))
        d_cr_rho = np.empty((K, n, n), dtype=complex)
        for k in range(K):
            d_a_rho[k] = d_bussgang_d_rho(model, channels, k)
            d_cr_rho[k] = d_cr_d_rho(model, channels, k)
    if which in ("sigma", "both"):
        d_a_sig = np.empty((B, n))
        d_cr_sig = np.empty((B, n, n), dtype=complex)
        for b in range(B):
            d_a_sig[b] = d_bussgang_d_sigma(model, b)
            d_cr_sig[b] = d_cr_d_sigma(model, b)
    return DerivativeBundle(d_a_d_rho=d_a_rho, d_cr_d_rho=d_cr_rho,
                            d_a_d_sigma=d_a_sig, d_cr_d_sigma=d_cr_sig)


def _constraint_derivatives_bmrc(model, channels, rho, gamma, d_a, d_cr):
    """d xi_kbar / d theta for the MRC constraint, one direction (d_a, d_cr).

    xi = (gamma+1) rho s^2 - gamma u^H C_r u with u = A h, s = u^H u; the
    product-rule pieces are 2 Re[h^H dA (A h)] inside s, 2 Re[h^H dA C_r A h]
    and u^H dC_r u inside the quadratic form.
    """
    h = channels.h_hat
    u = model.a_hat[None, :] * h
    s = np.sum(np.abs(u) ** 2, axis=1)
    cu = (model.c_r_hat @ u.T).T                    # rows: C_r u_k
    t1 = np.sum(d_a[None, :] * model.a_hat[None, :] * np.abs(h) ** 2, axis=1)
    t2 = np.real(np.sum(h.conj() * d_a[None, :] * cu, axis=1))
    t3 = np.real(np.einsum("ki,ij,kj->k", u.conj(), d_cr, u))
    return (gamma + 1.0) * rho * 4.0 * s * t1 - gamma * (2.0 * t2 + t3)


def _constraint_derivatives_bmmse(model, channels, rho, gamma, d_a, d_cr, v):
    """d xi_kbar / d theta for the MMSE constraint; ``v`` holds C_r^{-1} u."""
    h = channels.h_hat
    dt = (2.0 * np.real(np.sum(h.conj() * d_a[None, :] * v, axis=1))
          - np.real(np.einsum("ki,ij,kj->k", v.conj(), d_cr, v)))
    return (gamma + 1.0) * rho * dt


def lagrangian_grad_rho(model: QuantizedModel, channels, rho, gamma_targets,
                        mu, kind, bundle: DerivativeBundle = None):
    """Gradient of the min-power Lagrangian w.r.t. each UE power.

    The Lagrangian is sum_k (rho_k - mu_k xi_k); the direct term of UE k's own
    constraint plus the cross-UE chain terms through the shared gain and
    output covariance are all included.
    """
    rho = np.asarray(rho, dtype=float)
    gamma = np.asarray(gamma_targets, dtype=float)
    mu = np.asarray(mu, dtype=float)
    K = rho.shape[0]
    if bundle is None:
        bundle = derivative_bundle(model, channels)
    u = model.a_hat[None, :] * channels.h_hat
    grad = np.ones(K)
    if kind == "bmrc":
        s = np.sum(np.abs(u) ** 2, axis=1)
        # Direct term of each UE's own constraint.
        direct = mu * (gamma + 1.0) * s ** 2
        for k in range(K):
            dxi = _constraint_derivatives_bmrc(
                model, channels, rho, gamma,
                bundle.d_a_d_rho[k], bundle.d_cr_d_rho[k])
            grad[k] -= direct[k] + np.dot(mu, dxi)
        return grad
    if kind == "bmmse":
        factor = factor_output_covariance(model.c_r_hat)
        v = scipy.linalg.cho_solve(factor, u.T).T
        t = np.real(np.sum(u.conj() * v, axis=1))
        direct = mu * (gamma + 1.0) * t
        for k in range(K):
            dxi = _constraint_derivatives_bmmse(
                model, channels, rho, gamma,
                bundle.d_a_d_rho[k], bundle.d_cr_d_rho[k], v)
            grad[k] -= direct[k] + np.dot(mu, dxi)
        return grad
    raise ValueError(f"unknown receiver kind {kind!r}")


def lagrangian_grad_sigma(model: QuantizedModel, channels, rho, gamma_targets,
                          mu, upsilon, kind, bundle: DerivativeBundle = None):
    """Gradient of the dithering Lagrangian w.r.t. each RRH level.

    Covers both designs: the max-min variant passes the shared SINDR value
    for every target and its own duals in place of ``mu``.  The floor
    constraint contributes ``-upsilon``.
    """
    rho = np.asarray(rho, dtype=float)
    gamma = np.asarray(gamma_targets, dtype=float)
    mu = np.asarray(mu, dtype=float)
    upsilon = np.asarray(upsilon, dtype=float)
    B = model.n_rrh
    if bundle is None:
        bundle = derivative_bundle(model, channels)
    grad = -upsilon.copy()
    if kind == "bmrc":
        for b in range(B):
            dxi = _constraint_derivatives_bmrc(
                model, channels, rho, gamma,
                bundle.d_a_d_sigma[b], bundle.d_cr_d_sigma[b])
            grad[b] -= np.dot(mu, dxi)
        return grad
    if kind == "bmmse":
        u = model.a_hat[None, :] * channels.h_hat
        factor = factor_output_covariance(model.c_r_hat)
        v = scipy.linalg.cho_solve(factor, u.T).T
        for b in range(B):
            dxi = _constraint_derivatives_bmmse(
                model, channels, rho, gamma,
                bundle.d_a_d_sigma[b], bundle.d_cr_d_sigma[b], v)
            grad[b] -= np.dot(mu, dxi)
        return grad
    raise ValueError(f"unknown receiver kind {kind!r}")
