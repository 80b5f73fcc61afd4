"""Monte Carlo simulation of the actual quantized uplink.

Used both as the measurement path (16-QAM symbol error rates) and as the
independent oracle for the arcsine-law covariance and the Bussgang
orthogonality property.  Propagation always uses the true channels; the
receivers and rescaling gains use the estimates, exactly as a deployed
system would.
"""

from dataclasses import dataclass

import numpy as np

from .channels import ChannelState
from .errors import DegenerateGainError
from .quantization import PowerDitherPoint, QuantizedModel, build_model, quantize
from .receivers import ReceiverBank

_BATCH = 10_000

# Unit-average-power 16-QAM: levels {-3,-1,1,3}/sqrt(10) per rail.
_QAM16_LEVELS = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(10.0)


@dataclass(frozen=True)
class SymbolBatch:
    """Transmitted and soft-combined symbols for every UE (K, n_symbols)."""

    tx: np.ndarray
    soft: np.ndarray
    constellation: str


@dataclass(frozen=True)
class SerResult:
    """Per-UE symbol error rates with 95% binomial half-widths."""

    ser: np.ndarray
    half_width: np.ndarray
    max_ser: float
    max_ser_half_width: float
    n_symbols: int


def _draw_symbols(rng, constellation, k, n):
    if constellation == "gaussian":
        return (rng.standard_normal((k, n))
                + 1j * rng.standard_normal((k, n))) / np.sqrt(2.0)
    if constellation == "qam16":
        re = _QAM16_LEVELS[rng.integers(0, 4, (k, n))]
        im = _QAM16_LEVELS[rng.integers(0, 4, (k, n))]
        return re + 1j * im
    raise ValueError(f"unknown constellation {constellation!r}")


def simulate_symbols(channels: ChannelState, point: PowerDitherPoint,
                     bank: ReceiverBank, n_symbols, constellation, seed,
                     bypass=False) -> SymbolBatch:
    """Transmit, quantize and combine ``n_symbols`` uplink symbols.

    Per symbol: draw unit-power data, add per-RRH noise/dithering, quantize
    (skipped in bypass mode) and combine with the given receivers.  Fixed
    seeds give bit-identical streams.
    """
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    h = channels.h
    k, n_dim = h.shape
    m = n_dim // point.n_rrh
    amp = np.sqrt(point.rho)                       # (K,)
    noise_scale = np.repeat(point.sigma, m) / np.sqrt(2.0)
    tx = np.empty((k, n_symbols), dtype=complex)
    soft = np.empty((k, n_symbols), dtype=complex)
    w_conj = bank.w.conj()
    for start in range(0, n_symbols, _BATCH):
        stop = min(start + _BATCH, n_symbols)
        nb = stop - start
        d = _draw_symbols(rng, constellation, k, nb)
        y = (h.T * amp) @ d
        y += noise_scale[:, None] * (rng.standard_normal((n_dim, nb))
                                     + 1j * rng.standard_normal((n_dim, nb)))
        r = y if bypass else quantize(y)
        tx[:, start:stop] = d
        soft[:, start:stop] = w_conj @ r
    return SymbolBatch(tx=tx, soft=soft, constellation=constellation)


def _nearest_qam16(values):
    """Indices of the nearest constellation rail level per I/Q component."""
    scaled = values * np.sqrt(10.0)
    idx = np.clip(np.round((scaled + 3.0) / 2.0), 0, 3).astype(int)
    return idx


def analytic_gain(model: QuantizedModel, channels: ChannelState,
                  point: PowerDitherPoint, bank: ReceiverBank):
    """Complex soft-symbol gains sqrt(rho_k) w_k^H A h_hat_k."""
    u = model.a_hat[None, :] * channels.h_hat
    return np.sqrt(point.rho) * np.einsum("ki,ki->k", bank.w.conj(), u)


def detect_qam16(batch: SymbolBatch, channels: ChannelState,
                 point: PowerDitherPoint, bank: ReceiverBank,
                 model: QuantizedModel = None,
                 empirical_gain=False) -> SerResult:
    """Rescale soft symbols, slice to the nearest 16-QAM point, count errors.

    Rescaling uses the analytic soft-symbol gain by default; the
    least-squares fit per UE is available for sensitivity checks.
    """
    if batch.constellation != "qam16":
        raise ValueError("detection requires a 16-QAM batch")
    if model is None:
        model = build_model(channels, point)
    if empirical_gain:
        g = (np.sum(batch.soft * batch.tx.conj(), axis=1)
             / np.sum(np.abs(batch.tx) ** 2, axis=1))
    else:
        g = analytic_gain(model, channels, point, bank)
    if np.any(np.abs(g) < 1e-12):
        raise DegenerateGainError(f"soft-symbol gain underflow: {g!r}")
    rescaled = batch.soft / g[:, None]
    errors = ((_nearest_qam16(rescaled.real) != _nearest_qam16(batch.tx.real))
              | (_nearest_qam16(rescaled.imag) != _nearest_qam16(batch.tx.imag)))
    n = batch.tx.shape[1]
    ser = errors.mean(axis=1)
    half = 1.96 * np.sqrt(ser * (1.0 - ser) / n)
    worst = int(np.argmax(ser))
    return SerResult(ser=ser, half_width=half, max_ser=float(ser[worst]),
                     max_ser_half_width=float(half[worst]), n_symbols=n)


def _gaussian_samples(c_y, n_samples, rng):
    try:
        chol = np.linalg.cholesky(c_y)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance is not positive definite") from exc
    dim = c_y.shape[0]
    x = (rng.standard_normal((n_samples, dim))
         + 1j * rng.standard_normal((n_samples, dim))) / np.sqrt(2.0)
    return x @ chol.T   # rows are samples L x


def empirical_cr(c_y, n_samples, seed):
    """Sample covariance of quantized Gaussian vectors with covariance c_y.

    Independent oracle for the arcsine law: draw, quantize, average.
    """
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    dim = c_y.shape[0]
    acc = np.zeros((dim, dim), dtype=complex)
    done = 0
    while done < n_samples:
        nb = min(100_000, n_samples - done)
        r = quantize(_gaussian_samples(c_y, nb, rng))
        acc += r.T @ r.conj()
        done += nb
    return acc / n_samples


def empirical_bussgang_moments(c_y, a_hat, n_samples, seed):
    """Monte Carlo distortion covariance and distortion/input cross-covariance.

    Returns (cov of q = r - A y, cross-covariance E[q y^H]); the cross term
    should vanish by Bussgang orthogonality.
    """
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    dim = c_y.shape[0]
    acc_qq = np.zeros((dim, dim), dtype=complex)
    acc_qy = np.zeros((dim, dim), dtype=complex)
    done = 0
    while done < n_samples:
        nb = min(100_000, n_samples - done)
        y = _gaussian_samples(c_y, nb, rng)
        q = quantize(y) - a_hat[None, :] * y
        acc_qq += q.T @ q.conj()
        acc_qy += q.T @ y.conj()
        done += nb
    return acc_qq / n_samples, acc_qy / n_samples


def empirical_sindr(batch: SymbolBatch):
    """Measured per-UE SINDR of the soft symbols against the sent data."""
    g = (np.sum(batch.soft * batch.tx.conj(), axis=1)
         / np.sum(np.abs(batch.tx) ** 2, axis=1))
    resid = batch.soft - g[:, None] * batch.tx
    sig = np.abs(g) ** 2 * np.mean(np.abs(batch.tx) ** 2, axis=1)
    err = np.mean(np.abs(resid) ** 2, axis=1)
    return sig / err
