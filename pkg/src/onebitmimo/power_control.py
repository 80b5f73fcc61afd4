"""UE transmit-power optimization at fixed dithering levels.

Two families: a projected primal-dual gradient method for the min-power
design, and block-coordinate updates (one UE power rescaled per iteration)
for both the min-power and max-min designs.  The SINDR is non-monotonic in
the powers, so the coordinate methods carry two extra stop rules: a per-UE
check (the scaled UE's SINDR dropped although its power grew) and an all-UE
check against the iterate history (every UE is worse than some earlier
point), both of which flag entry into the distortion-dominated region.

Gradient iterations run internally in milliwatt units; jointly rescaling
powers and noise variances leaves every SINDR unchanged, and it makes the
documented default step sizes dimensionless-sane.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelState
from .derivatives import derivative_bundle, lagrangian_grad_rho
from .errors import NonFiniteGradientError
from .geometry import SystemGeometry
from .quantization import PowerDitherPoint, build_model
from .receivers import sindr_constraint_margin, sindr_for_kind
from .units import watt_to_dbm

POWER_UNIT_W = 1e-3   # internal normalization: 1 mW

TERMINATIONS = ("targets_met", "max_iters", "qd_region_per_ue",
                "qd_region_all_ues", "power_cap_hit")


@dataclass
class OptimizerConfig:
    """Step sizes, scaling factors and tolerances for all optimizers.

    ``zeta_rho``/``nu`` act on milliwatt-normalized quantities.  ``alpha``
    caps one min-power BCD step, ``beta`` is the fixed max-min scaling.
    ``eps_sigma_frac`` is the ternary-search stop width as a fraction of the
    initial interval; ``eps_rho_db``/``eps_gamma_db`` stop the fine-tuning
    when one iteration improves the objective by less than that many dB.
    """

    alpha: float = 1.5
    beta: float = 10.0 ** 0.1
    zeta_rho: float = 1e-3
    nu: float = 1e-3
    zeta_sigma_rel: float = 1e-3   # times sigma_min (milliwatt units)
    kappa: float = 1e-2
    max_iters: int = 500
    sindr_tol: float = 1e-2
    rho_init_dbm: float = -30.0
    rho_init_range_dbm: tuple = (-30.0, 0.0)
    eps_sigma_frac: float = 0.01
    eps_rho_db: float = 0.01
    eps_gamma_db: float = 0.05
    fine_max_iters: int = 200
    inner_solver: str = "bcd"      # "bcd" or "gradient"

    def __post_init__(self):
        if not self.alpha > 1.0:
            raise ValueError("alpha must exceed 1")
        if not self.beta > 1.0:
            raise ValueError("beta must exceed 1")
        for name in ("zeta_rho", "nu", "zeta_sigma_rel", "kappa"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        if self.max_iters < 1 or self.fine_max_iters < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.inner_solver not in ("bcd", "gradient"):
            raise ValueError("inner_solver must be 'bcd' or 'gradient'")


@dataclass(frozen=True)
class DesignProblem:
    """One optimization instance: channels, objective data and caps."""

    channels: ChannelState
    sigma_min: float                      # sqrt-watts
    receiver: str                         # "bmrc" or "bmmse"
    gamma_targets: np.ndarray = None      # (K,), min-power design
    rho_ue_max: float = np.inf            # watts, max-min cap
    rho_max: float = None                 # watts, infeasibility penalty cap
    geometry: SystemGeometry = None
    bypass: bool = False                  # unquantized test fixture

    def penalty_cap(self):
        if self.rho_max is not None:
            return self.rho_max
        if np.isfinite(self.rho_ue_max):
            return self.rho_ue_max
        return 1.0  # 30 dBm fallback when no cap is configured


@dataclass(frozen=True)
class Iterate:
    """One optimizer step: powers (watts), SINDRs and the objective value."""

    rho: np.ndarray
    sindr: np.ndarray
    objective: float
    selected: int = -1    # UE whose power changed; -1 for gradient steps


@dataclass
class OptRunRecord:
    """Full trace of one optimization run plus the returned solution."""

    iterates: list
    termination: str
    best: Iterate
    feasible: bool
    receiver: str

    def to_csv(self, target):
        """Write the iterate trace as CSV (powers in dBm)."""
        own = isinstance(target, (str,)) or hasattr(target, "__fspath__")
        fh = open(target, "w", encoding="utf-8") if own else target
        try:
            k = self.iterates[0].rho.shape[0]
            cols = ["iteration"]
            cols += [f"rho_dbm_{i}" for i in range(k)]
            cols += [f"sindr_{i}" for i in range(k)]
            cols += ["objective", "termination"]
            fh.write(",".join(cols) + "\n")
            for i, it in enumerate(self.iterates):
                row = [str(i)]
                with np.errstate(divide="ignore"):
                    row += [f"{v:.17g}" for v in watt_to_dbm(it.rho)]
                row += [f"{v:.17g}" for v in it.sindr]
                row += [f"{it.objective:.17g}", self.termination]
                fh.write(",".join(row) + "\n")
        finally:
            if own:
                fh.close()

    def to_csv_string(self):
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def _to_internal(sigma_w, sigma_min_w):
    scale = np.sqrt(POWER_UNIT_W)
    return np.asarray(sigma_w, dtype=float) / scale, sigma_min_w / scale


def _point(rho_mw, sigma_mw, sigma_min_mw):
    return PowerDitherPoint(rho=rho_mw, sigma=sigma_mw, sigma_min=sigma_min_mw)


def _evaluate(problem, rho_mw, sigma_mw, sigma_min_mw):
    point = _point(rho_mw, sigma_mw, sigma_min_mw)
    model = build_model(problem.channels, point, bypass=problem.bypass)
    vals = sindr_for_kind(model, problem.channels, rho_mw, problem.receiver)
    return model, vals


def _targets_met(sindr, gamma_targets, tol):
    return bool(np.all(sindr >= gamma_targets * (1.0 - tol)))


def minpower_gradient(problem: DesignProblem, sigma, config: OptimizerConfig,
                      seed) -> OptRunRecord:
    """Primal-dual gradient descent on the min-power Lagrangian.

    Powers start from random positive values in the configured dBm range and
    move against the Lagrangian gradient (projected onto rho >= 0); the SINDR
    duals follow their constraint slacks.  Stops once every UE meets its
    target within ``sindr_tol`` or after ``max_iters``.
    """
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    gamma = np.asarray(problem.gamma_targets, dtype=float)
    K = gamma.shape[0]
    sigma_mw, sigma_min_mw = _to_internal(sigma, problem.sigma_min)
    lo, hi = config.rho_init_range_dbm
    rho_mw = 10.0 ** rng.uniform((lo - 30.0) / 10.0 + 3.0,
                                 (hi - 30.0) / 10.0 + 3.0, K)
    mu = 1.0 - rng.uniform(0.0, 1.0, K)   # in (0, 1]

    iterates = []
    termination = "max_iters"
    for i in range(config.max_iters + 1):
        model, vals = _evaluate(problem, rho_mw, sigma_mw, sigma_min_mw)
        iterates.append(Iterate(rho=rho_mw * POWER_UNIT_W, sindr=vals,
                                objective=float(np.sum(rho_mw) * POWER_UNIT_W)))
        if _targets_met(vals, gamma, config.sindr_tol):
            termination = "targets_met"
            break
        if i == config.max_iters:
            break
        bundle = derivative_bundle(model, problem.channels, which="rho")
        grad = lagrangian_grad_rho(model, problem.channels, rho_mw, gamma,
                                   mu, problem.receiver, bundle)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(
                f"non-finite power gradient at iteration {i}: {grad!r}")
        xi = sindr_constraint_margin(model, problem.channels, rho_mw, gamma,
                                     problem.receiver)
        rho_mw = np.maximum(0.0, rho_mw - config.zeta_rho * grad)
        mu = np.maximum(0.0, mu - config.nu * xi)

    feasible = termination == "targets_met"
    return OptRunRecord(iterates=iterates, termination=termination,
                        best=iterates[-1], feasible=feasible,
                        receiver=problem.receiver)


def minpower_bcd(problem: DesignProblem, sigma,
                 config: OptimizerConfig) -> OptRunRecord:
    """Coordinate descent: scale the worst-deficit UE toward its target.

    Each iteration picks the UE with the largest target/achieved ratio and
    multiplies its power by min(alpha, ratio).  Powers must start in the
    noise-dominated region (default -30 dBm) so the first accepted steps
    increase the SINDR.
    """
    gamma = np.asarray(problem.gamma_targets, dtype=float)
    K = gamma.shape[0]
    sigma_mw, sigma_min_mw = _to_internal(sigma, problem.sigma_min)
    rho_mw = np.full(K, 10.0 ** ((config.rho_init_dbm - 30.0) / 10.0 + 3.0))

    _, vals = _evaluate(problem, rho_mw, sigma_mw, sigma_min_mw)
    iterates = [Iterate(rho=rho_mw * POWER_UNIT_W, sindr=vals,
                        objective=float(np.sum(rho_mw) * POWER_UNIT_W))]
    history = [vals]
    termination = "targets_met"
    i = 0
    while np.min(vals - gamma) < 0.0:
        if i >= config.max_iters:
            termination = "max_iters"
            break
        i += 1
        ratios = gamma / vals
        k = int(np.argmax(ratios))
        rho_mw = rho_mw.copy()
        rho_mw[k] *= min(config.alpha, ratios[k])
        prev = vals
        _, vals = _evaluate(problem, rho_mw, sigma_mw, sigma_min_mw)
        iterates.append(Iterate(rho=rho_mw * POWER_UNIT_W, sindr=vals,
                                objective=float(np.sum(rho_mw) * POWER_UNIT_W),
                                selected=k))
        history.append(vals)
        if vals[k] < prev[k]:
            termination = "qd_region_per_ue"
            break
        # All-UE check against iterates 1..i-1: fires when each earlier point
        # has at least one UE that is now worse.
        if i >= 2:
            deltas = vals[None, :] - np.stack(history[1:i])
            if np.max(np.min(deltas, axis=1)) < 0.0:
                termination = "qd_region_all_ues"
                break

    final = iterates[-1]
    feasible = _targets_met(final.sindr, gamma, config.sindr_tol)
    return OptRunRecord(iterates=iterates, termination=termination,
                        best=final, feasible=feasible,
                        receiver=problem.receiver)


def maxmin_bcd(problem: DesignProblem, sigma,
               config: OptimizerConfig) -> OptRunRecord:
    """Coordinate ascent on the worst UE's SINDR under per-UE power caps.

    Each iteration multiplies the minimum-SINDR UE's power by ``beta``.
    Stops when any UE exceeds its cap, on either distortion-region check, or
    at the iteration limit; returns the iterate with the best minimum SINDR
    among those respecting the cap.
    """
    K = problem.channels.h_hat.shape[0]
    sigma_mw, sigma_min_mw = _to_internal(sigma, problem.sigma_min)
    cap_mw = problem.rho_ue_max / POWER_UNIT_W
    rho_mw = np.full(K, 10.0 ** ((config.rho_init_dbm - 30.0) / 10.0 + 3.0))

    _, vals = _evaluate(problem, rho_mw, sigma_mw, sigma_min_mw)
    iterates = [Iterate(rho=rho_mw * POWER_UNIT_W, sindr=vals,
                        objective=float(np.min(vals)))]
    gamma_trace = [float(np.min(vals))]
    termination = "power_cap_hit"
    i = 0
    while np.max(rho_mw) <= cap_mw:
        if i >= config.max_iters:
            termination = "max_iters"
            break
        i += 1
        kbar = int(np.argmin(vals))
        rho_mw = rho_mw.copy()
        rho_mw[kbar] *= config.beta
        prev = vals
        _, vals = _evaluate(problem, rho_mw, sigma_mw, sigma_min_mw)
        gamma_trace.append(float(np.min(vals)))
        iterates.append(Iterate(rho=rho_mw * POWER_UNIT_W, sindr=vals,
                                objective=gamma_trace[-1], selected=kbar))
        if vals[kbar] < prev[kbar]:
            termination = "qd_region_per_ue"
            break
        if np.max(vals) < np.max(gamma_trace):
            termination = "qd_region_all_ues"
            break

    # The final iterate may have stepped past the cap; the returned solution
    # never does.
    cap_w = problem.rho_ue_max * (1.0 + 1e-12)
    candidates = [it for it in iterates if np.max(it.rho) <= cap_w]
    best = max(candidates, key=lambda it: it.objective)
    return OptRunRecord(iterates=iterates, termination=termination,
                        best=best, feasible=True, receiver=problem.receiver)
