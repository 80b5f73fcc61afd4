"""Self-check suites behind the ``validate`` CLI command.

Each suite re-derives a core property through an independent route (finite
differences, Monte Carlo sampling, brute-force comparison) and reports one
pass/fail line.  Deterministic for a fixed seed.
"""

import numpy as np

from . import derivatives as deriv
from .channels import ChannelState
from .dithering import ternary_maximize, ternary_minimize
from .linksim import empirical_cr
from .power_control import (DesignProblem, OptimizerConfig, maxmin_bcd,
                            minpower_bcd)
from .quantization import (PowerDitherPoint, arcsine_covariance, build_model,
                           covariance_y)
from .receivers import sindr_bmmse, sindr_bmrc, sindr_constraint_margin


def random_instance(rng, n_rrh=2, ants=2, n_ue=2, snr_span=(0.05, 3.0)):
    """Small synthetic channel state and operating point for property checks.

    Per-antenna SNRs land in ``snr_span`` so correlations stay away from the
    arcsine branch edge.
    """
    n = n_rrh * ants
    h = (rng.standard_normal((n_ue, n))
         + 1j * rng.standard_normal((n_ue, n))) / np.sqrt(2.0)
    sigma = rng.uniform(0.5, 2.0, n_rrh)
    snr = rng.uniform(*snr_span, n_ue)
    rho = snr * np.mean(sigma ** 2) / np.mean(np.abs(h) ** 2, axis=1) / n_ue
    channels = ChannelState(h=h, h_hat=h.copy(),
                            c_err=np.zeros((n_ue, n, n), dtype=complex))
    point = PowerDitherPoint(rho=rho, sigma=sigma, sigma_min=0.5)
    return channels, point


def _fd_cr(channels, point, bump, h_rel=1e-6):
    """Central difference of the output covariance along ``bump``.

    ``bump`` maps a scalar step to a new operating point; the full pipeline
    is re-evaluated on both sides.
    """
    hi = arcsine_covariance(covariance_y(channels, bump(+h_rel)))
    lo = arcsine_covariance(covariance_y(channels, bump(-h_rel)))
    return hi, lo


def check_gradient_fd(seed=0, n_instances=5, tol=1e-4):
    """Analytic model derivatives and Lagrangian gradients vs finite differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        channels, point = random_instance(rng)
        model = build_model(channels, point)
        K = point.rho.shape[0]
        B = point.sigma.shape[0]
        gamma = rng.uniform(0.5, 3.0, K)
        mu = rng.uniform(0.1, 1.0, K)
        upsilon = rng.uniform(0.1, 1.0, B)
        bundle = deriv.derivative_bundle(model, channels)

        for k in range(K):
            step = point.rho[k] * 1e-6
            hi, lo = _fd_cr(channels, point,
                            lambda h, k=k: point.scaled(
                                rho=point.rho + h * point.rho[k]
                                * np.eye(K)[k]))
            fd = (hi - lo) / (2.0 * step)
            err = np.max(np.abs(fd - bundle.d_cr_d_rho[k])) \
                / max(np.max(np.abs(fd)), 1e-12)
            worst = max(worst, err)
        for b in range(B):
            step = point.sigma[b] * 1e-6
            hi, lo = _fd_cr(channels, point,
                            lambda h, b=b: point.scaled(
                                sigma=point.sigma + h * point.sigma[b]
                                * np.eye(B)[b]))
            fd = (hi - lo) / (2.0 * step)
            err = np.max(np.abs(fd - bundle.d_cr_d_sigma[b])) \
                / max(np.max(np.abs(fd)), 1e-12)
            worst = max(worst, err)

        for kind in ("bmrc", "bmmse"):
            grad = deriv.lagrangian_grad_rho(model, channels, point.rho,
                                             gamma, mu, kind, bundle)

            def lag_rho(rho_vec):
                m = build_model(channels, point.scaled(rho=rho_vec))
                xi = sindr_constraint_margin(m, channels, rho_vec, gamma, kind)
                return np.sum(rho_vec) - np.dot(mu, xi)

            for k in range(K):
                step = point.rho[k] * 1e-6
                e = np.eye(K)[k] * step
                fd = (lag_rho(point.rho + e) - lag_rho(point.rho - e)) \
                    / (2.0 * step)
                err = abs(fd - grad[k]) / max(abs(fd), 1e-12)
                worst = max(worst, err)

            sgrad = deriv.lagrangian_grad_sigma(model, channels, point.rho,
                                                gamma, mu, upsilon, kind,
                                                bundle)

            def lag_sigma(sigma_vec):
                m = build_model(channels, point.scaled(sigma=sigma_vec))
                xi = sindr_constraint_margin(m, channels, point.rho, gamma,
                                             kind)
                return (np.sum(point.rho) - np.dot(mu, xi)
                        - np.dot(upsilon, sigma_vec - point.sigma_min))

            for b in range(B):
                step = point.sigma[b] * 1e-6
                e = np.eye(B)[b] * step
                fd = (lag_sigma(point.sigma + e) - lag_sigma(point.sigma - e)) \
                    / (2.0 * step)
                err = abs(fd - sgrad[b]) / max(abs(fd), 1e-12)
                worst = max(worst, err)
    return worst < tol, f"max relative error {worst:.3e} (tol {tol})"


def check_cr_oracle(seed=0, n_matrices=3, n_samples=1_000_000, tol=5e-3):
    """Arcsine-law covariance vs Monte Carlo quantizer statistics."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_matrices):
        g = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
        c_y = g @ g.conj().T + 4.0 * np.eye(4)
        emp = empirical_cr(c_y, n_samples, rng)
        worst = max(worst, float(np.max(np.abs(emp - arcsine_covariance(c_y)))))
    return worst < tol, f"max entry deviation {worst:.3e} (tol {tol})"


def check_remark1(seed=0, tol=1e-10):
    """Joint (rho, sigma^2) rescaling leaves C_r and every SINDR unchanged."""
    rng = np.random.default_rng(seed)
    channels, point = random_instance(rng, n_rrh=2, ants=3, n_ue=3)
    base = build_model(channels, point)
    ref_rc = sindr_bmrc(base, channels, point.rho)
    ref_ms = sindr_bmmse(base, channels, point.rho)
    worst = 0.0
    for c in (0.1, 10.0, 1000.0):
        scaled = PowerDitherPoint(rho=c * point.rho,
                                  sigma=np.sqrt(c) * point.sigma,
                                  sigma_min=np.sqrt(c) * point.sigma_min)
        model = build_model(channels, scaled)
        worst = max(worst, float(np.max(
            np.abs(model.c_r_hat - base.c_r_hat)
            / np.maximum(np.abs(base.c_r_hat), 1e-30))))
        worst = max(worst, float(np.max(
            np.abs(sindr_bmrc(model, channels, scaled.rho) - ref_rc) / ref_rc)))
        worst = max(worst, float(np.max(
            np.abs(sindr_bmmse(model, channels, scaled.rho) - ref_ms) / ref_ms)))
    return worst < tol, f"max relative change {worst:.3e} (tol {tol})"


def check_receiver_order(seed=0, n_instances=20, slack=1e-9):
    """MMSE combining never trails MRC combining in SINDR."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        channels, point = random_instance(
            rng, n_rrh=int(rng.integers(1, 4)), ants=int(rng.integers(2, 8)),
            n_ue=int(rng.integers(1, 4)))
        model = build_model(channels, point)
        gap = sindr_bmrc(model, channels, point.rho) \
            - sindr_bmmse(model, channels, point.rho)
        worst = max(worst, float(np.max(gap)))
    return worst <= slack, f"max (MRC - MMSE) gap {worst:.3e} (slack {slack})"


def check_bcd_detectors(seed=0, n_runs=100):
    """Distortion-region stops never fire with the quantizer bypassed."""
    rng = np.random.default_rng(seed)
    cfg = OptimizerConfig(max_iters=60)
    bad = 0
    for _ in range(n_runs):
        channels, point = random_instance(rng)
        K = point.rho.shape[0]
        problem_mp = DesignProblem(
            channels=channels, sigma_min=point.sigma_min, receiver="bmmse",
            gamma_targets=np.full(K, 1e9), bypass=True)
        rec = minpower_bcd(problem_mp, point.sigma, cfg)
        if rec.termination.startswith("qd_region"):
            bad += 1
        problem_mm = DesignProblem(
            channels=channels, sigma_min=point.sigma_min, receiver="bmrc",
            rho_ue_max=1e6, bypass=True)
        rec = maxmin_bcd(problem_mm, point.sigma, cfg)
        if rec.termination.startswith("qd_region"):
            bad += 1
    return bad == 0, f"{bad} spurious distortion-region stops in {n_runs} runs"


def check_ternary(seed=0):
    """Stubbed unimodal objectives: both search directions find the optimum."""
    theta_min, trace_min = ternary_minimize(lambda t: (t - 2.2) ** 2,
                                            1.0, 4.0, 0.03)
    theta_max, trace_max = ternary_maximize(lambda t: -(t - 2.8) ** 2,
                                            1.0, 4.0, 0.03)
    ok = abs(theta_min - 2.2) <= 0.03 and abs(theta_max - 2.8) <= 0.03
    return ok, (f"minimize -> {theta_min:.4f} (target 2.2), "
                f"maximize -> {theta_max:.4f} (target 2.8)")


SUITES = {
    "gradient-fd": check_gradient_fd,
    "cr-oracle": check_cr_oracle,
    "remark1": check_remark1,
    "receiver-order": check_receiver_order,
    "bcd-detectors": check_bcd_detectors,
    "ternary": check_ternary,
}


def validate(only=None, seed=0, stream=None):
    """Run the self-check suites; returns 0 on success, 1 on any failure."""
    import sys
    stream = stream or sys.stdout
    names = [only] if only else list(SUITES)
    if only and only not in SUITES:
        raise ValueError(f"unknown suite {only!r}; choose from {list(SUITES)}")
    failures = 0
    for name in names:
        passed, detail = SUITES[name](seed=seed)
        stream.write(f"{'PASS' if passed else 'FAIL'} {name}: {detail}\n")
        failures += 0 if passed else 1
    return 0 if failures == 0 else 1
