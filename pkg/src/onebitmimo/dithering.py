"""Joint optimization of RRH dithering levels with the UE powers.

The per-RRH levels are first collapsed onto a single search variable: each
RRH gets ``sigma_min * max(1, sqrt(delta_b_max) * theta)``, which raises the
dithering of RRHs with nearby UEs so that every RRH sees a comparable
noise-to-signal ratio.  A ternary line search over theta (the objective is
unimodal in it) gives the coarse solution; alternating projected-gradient
steps on the levels and single power updates then fine-tune it.  The
fine-tuning never discards the coarse result: the best solution seen so far
is what gets returned.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .derivatives import (derivative_bundle, lagrangian_grad_rho,
                          lagrangian_grad_sigma)
from .errors import DerivativeSingularityError, NonFiniteGradientError
from .power_control import (POWER_UNIT_W, DesignProblem, OptimizerConfig,
                            _evaluate, _targets_met, _to_internal,
                            maxmin_bcd, minpower_bcd, minpower_gradient)
from .receivers import factor_output_covariance, sindr_constraint_margin


@dataclass(frozen=True)
class ThetaInterval:
    """Search range of the dithering parameter, derived from the best gains."""

    low: float
    high: float

    def __post_init__(self):
        if not 0.0 < self.low <= self.high:
            raise ValueError("interval must satisfy 0 < low <= high")

    @classmethod
    def from_geometry(cls, geometry):
        best = np.sqrt(geometry.delta_b_max)
        return cls(low=1.0 / best.max(), high=1.0 / best.min())


@dataclass
class ProbeRecord:
    iteration: int
    theta: float
    score: float
    feasible: bool = True
    width: float = np.nan   # interval width after the iteration's shrink


@dataclass
class SolutionTrace:
    probes: list = field(default_factory=list)
    fine_objectives: list = field(default_factory=list)
    sigma_history: list = field(default_factory=list)


@dataclass
class JointSolution:
    """A (powers, dithering) pair with its objective and search trace."""

    rho: np.ndarray          # (K,) watts
    sigma: np.ndarray        # (B,) sqrt-watts
    objective: float         # sum power (min-power) or min SINDR (max-min)
    sindr: np.ndarray
    feasible: bool
    theta: float
    trace: SolutionTrace


def coarse_dither(theta, geometry, sigma_min):
    """Per-RRH dithering levels from the single search variable."""
    interval = ThetaInterval.from_geometry(geometry)
    if not interval.low * (1.0 - 1e-9) <= theta <= interval.high * (1.0 + 1e-9):
        raise ValueError(
            f"theta {theta!r} outside [{interval.low!r}, {interval.high!r}]")
    return sigma_min * np.maximum(1.0, np.sqrt(geometry.delta_b_max) * theta)


def _ternary_core(low, high, eps, evaluate, maximize):
    """Shrink [low, high] by exactly 2/3 per iteration toward the better probe.

    Probes sit at the interval's thirds.  The loop always runs at least once
    and stops once the width is at most ``eps``; returns the midpoint of the
    final interval and the per-iteration probe records.
    """
    records = []
    iteration = 0
    while True:
        iteration += 1
        t1 = (2.0 * low + high) / 3.0
        t2 = (low + 2.0 * high) / 3.0
        s1 = evaluate(t1)
        s2 = evaluate(t2)
        better_is_low = (s1 < s2) if not maximize else (s1 > s2)
        if better_is_low:
            high = t2
        else:
            low = t1
        width = high - low
        records.append(ProbeRecord(iteration, t1, float(s1), width=width))
        records.append(ProbeRecord(iteration, t2, float(s2), width=width))
        if width <= eps:
            return 0.5 * (low + high), records


def ternary_minimize(f, low, high, eps):
    """Line search for the minimizer of a unimodal scalar function."""
    return _ternary_core(low, high, eps, f, maximize=False)


def ternary_maximize(f, low, high, eps):
    """Line search for the maximizer of a unimodal scalar function."""
    return _ternary_core(low, high, eps, f, maximize=True)


def _solve_inner(objective, problem, sigma, config, rng):
    if objective == "maxmin":
        return maxmin_bcd(problem, sigma, config)
    if config.inner_solver == "gradient":
        return minpower_gradient(problem, sigma, config, rng)
    return minpower_bcd(problem, sigma, config)


def ternary_search(objective, problem: DesignProblem, config: OptimizerConfig,
                   seed=0) -> JointSolution:
    """Coarse joint design: line search over theta with full inner solves.

    Min-power probes score by sum power; an infeasible probe is scored with
    the penalty K * rho_max / theta instead, which steers the search toward
    stronger dithering without ever being returned as a solution.  Max-min
    probes score by the achieved minimum SINDR.  The final solve happens at
    the midpoint of the converged interval; the best candidate over every
    probe is returned.
    """
    if objective not in ("minpower", "maxmin"):
        raise ValueError(f"unknown objective {objective!r}")
    if problem.geometry is None:
        raise ValueError("ternary search needs the deployment geometry")
    interval = ThetaInterval.from_geometry(problem.geometry)
    eps = config.eps_sigma_frac * max(interval.high - interval.low,
                                      np.finfo(float).tiny)
    rng = np.random.default_rng(seed)
    candidates = []

    def evaluate(theta):
        sigma = coarse_dither(theta, problem.geometry, problem.sigma_min)
        try:
            record = _solve_inner(objective, problem, sigma, config, rng)
        except NonFiniteGradientError as exc:
            raise NonFiniteGradientError(
                f"inner solve aborted at theta={theta!r}: {exc}") from exc
        best = record.best
        if objective == "minpower":
            feasible = record.feasible
            score = best.objective if feasible \
                else best.rho.shape[0] * problem.penalty_cap() / theta
        else:
            feasible = True
            score = best.objective
        candidates.append((feasible, best, sigma, theta))
        return score

    theta_mid, probes = _ternary_core(interval.low, interval.high, eps,
                                      evaluate, maximize=objective == "maxmin")
    evaluate(theta_mid)
    probes.append(ProbeRecord(probes[-1].iteration + 1, theta_mid,
                              candidates[-1][1].objective,
                              feasible=candidates[-1][0], width=0.0))
    for rec, cand in zip(probes, candidates):
        rec.feasible = cand[0]

    minimize = objective == "minpower"

    def rank(entry):
        feasible, best, _, _ = entry
        return (feasible, -best.objective if minimize else best.objective)

    feasible, best, sigma, theta = max(candidates, key=rank)
    trace = SolutionTrace(probes=probes)
    return JointSolution(rho=best.rho.copy(), sigma=sigma,
                         objective=best.objective, sindr=best.sindr.copy(),
                         feasible=feasible, theta=theta, trace=trace)


def _gamma_refresh(model, channels, rho, eta, kind):
    """Shared-SINDR value from the complementary-slackness balance.

    Returns None when the dual weights or the denominator degenerate, in
    which case the caller keeps its previous value.
    """
    u = model.a_hat[None, :] * channels.h_hat
    if kind == "bmrc":
        s = np.sum(np.abs(u) ** 2, axis=1)
        a_k = rho * s ** 2
        b_k = np.real(np.einsum("ki,ik->k", u.conj(), model.c_r_hat @ u.T))
    else:
        factor = factor_output_covariance(model.c_r_hat)
        v = scipy.linalg.cho_solve(factor, u.T)
        a_k = rho * np.real(np.einsum("ki,ik->k", u.conj(), v))
        b_k = np.ones_like(a_k)
    if np.sum(eta) <= 0.0:
        return None
    den = float(np.dot(eta, b_k - a_k))
    if den <= 0.0:
        return None
    return float(np.dot(eta, a_k)) / den


def gamma_from_slackness(a_k, b_k, eta):
    """Bare complementary-slackness update, exposed for direct checks."""
    eta = np.asarray(eta, dtype=float)
    num = float(np.dot(eta, np.asarray(a_k, dtype=float)))
    den = float(np.dot(eta, np.asarray(b_k, dtype=float)
                       - np.asarray(a_k, dtype=float)))
    if den <= 0.0:
        raise ValueError("slackness denominator must be positive")
    return num / den


def fine_tune(objective, problem: DesignProblem, coarse: JointSolution,
              config: OptimizerConfig, seed=0) -> JointSolution:
    """Alternating refinement of the coarse joint solution.

    Each iteration takes one projected gradient step on every dithering
    level (floored at sigma_min), refreshes the duals, then applies a single
    power update (one coordinate pass by default, one gradient step when
    ``inner_solver="gradient"``).  Stops when an iteration improves the
    objective by less than the configured dB tolerance; on a gradient
    singularity the best solution so far is returned unchanged.
    """
    if objective not in ("minpower", "maxmin"):
        raise ValueError(f"unknown objective {objective!r}")
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    kind = problem.receiver
    minimize = objective == "minpower"
    K = coarse.rho.shape[0]
    B = coarse.sigma.shape[0]

    rho_mw = coarse.rho / POWER_UNIT_W
    sigma_mw, sigma_min_mw = _to_internal(coarse.sigma, problem.sigma_min)
    cap_mw = problem.rho_ue_max / POWER_UNIT_W
    zeta_sigma = config.zeta_sigma_rel * sigma_min_mw

    # SINDR duals (mu for min-power, eta for max-min) and floor duals, all
    # positive at start and re-projected after every update.  They persist
    # across iterations (warm start).
    duals = 1.0 - rng.uniform(0.0, 1.0, K)
    upsilon = 1.0 - rng.uniform(0.0, 1.0, B)

    trace = coarse.trace
    best = JointSolution(rho=coarse.rho.copy(), sigma=coarse.sigma.copy(),
                         objective=coarse.objective, sindr=coarse.sindr.copy(),
                         feasible=coarse.feasible, theta=coarse.theta,
                         trace=trace)
    gamma_val = float(np.min(coarse.sindr))
    prev_obj = coarse.objective

    for _ in range(config.fine_max_iters):
        try:
            model, vals = _evaluate(problem, rho_mw, sigma_mw, sigma_min_mw)
            targets = (np.asarray(problem.gamma_targets, dtype=float)
                       if minimize else np.full(K, gamma_val))
            bundle = derivative_bundle(model, problem.channels, which="sigma")
            grad = lagrangian_grad_sigma(model, problem.channels, rho_mw,
                                         targets, duals, upsilon, kind, bundle)
            if not np.all(np.isfinite(grad)):
                raise NonFiniteGradientError(f"sigma gradient {grad!r}")
            sigma_mw = np.maximum(sigma_min_mw, sigma_mw - zeta_sigma * grad)

            model, vals = _evaluate(problem, rho_mw, sigma_mw, sigma_min_mw)
            margins = sindr_constraint_margin(model, problem.channels, rho_mw,
                                              targets, kind)
            duals = np.maximum(0.0, duals - config.nu * margins)
            upsilon = np.maximum(0.0, upsilon
                                 - config.kappa * (sigma_mw - sigma_min_mw))
            if not minimize:
                refreshed = _gamma_refresh(model, problem.channels, rho_mw,
                                           duals, kind)
                if refreshed is not None:
                    gamma_val = refreshed

            # Single power update at the new dithering levels.
            if minimize:
                if config.inner_solver == "gradient":
                    rbundle = derivative_bundle(model, problem.channels,
                                                which="rho")
                    rgrad = lagrangian_grad_rho(model, problem.channels,
                                                rho_mw, targets, duals, kind,
                                                rbundle)
                    if not np.all(np.isfinite(rgrad)):
                        raise NonFiniteGradientError(f"power gradient {rgrad!r}")
                    rho_mw = np.maximum(0.0, rho_mw - config.zeta_rho * rgrad)
                else:
                    ratios = np.asarray(problem.gamma_targets) / vals
                    k = int(np.argmax(ratios))
                    rho_mw = rho_mw.copy()
                    rho_mw[k] *= min(config.alpha, ratios[k])
            else:
                kbar = int(np.argmin(vals))
                rho_mw = rho_mw.copy()
                rho_mw[kbar] = min(config.beta * rho_mw[kbar], cap_mw)

            _, vals = _evaluate(problem, rho_mw, sigma_mw, sigma_min_mw)
        except (DerivativeSingularityError, NonFiniteGradientError):
            break

        if minimize:
            objective_val = float(np.sum(rho_mw) * POWER_UNIT_W)
            feasible = _targets_met(vals, np.asarray(problem.gamma_targets),
                                    config.sindr_tol)
            improved = feasible and (not best.feasible
                                     or objective_val < best.objective)
        else:
            objective_val = float(np.min(vals))
            feasible = bool(np.max(rho_mw) <= cap_mw * (1.0 + 1e-12))
            improved = feasible and objective_val > best.objective
        trace.fine_objectives.append(objective_val)
        trace.sigma_history.append(sigma_mw * np.sqrt(POWER_UNIT_W))
        if improved:
            best = JointSolution(rho=rho_mw * POWER_UNIT_W,
                                 sigma=sigma_mw * np.sqrt(POWER_UNIT_W),
                                 objective=objective_val, sindr=vals.copy(),
                                 feasible=feasible, theta=best.theta,
                                 trace=trace)

        ratio = max(objective_val, np.finfo(float).tiny) \
            / max(prev_obj, np.finfo(float).tiny)
        gain_db = -10.0 * np.log10(ratio) if minimize else 10.0 * np.log10(ratio)
        tol = config.eps_rho_db if minimize else config.eps_gamma_db
        prev_obj = objective_val
        if gain_db <= tol:
            break
    return best


def joint_design(objective, problem: DesignProblem, config: OptimizerConfig,
                 seed=0) -> JointSolution:
    """Full pipeline: coarse ternary search followed by fine-tuning."""
    coarse = ternary_search(objective, problem, config, seed=seed)
    return fine_tune(objective, problem, coarse, config, seed=seed)
