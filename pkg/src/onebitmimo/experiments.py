"""Experiment orchestration: sweeps, CSV artifacts and re-derivation checks.

Every run writes one CSV per (receiver x dithering-mode) series, a canonical
copy of the resolved configuration, and a manifest with content hashes.  No
timestamps anywhere: identical config and seeds give byte-identical output.
Each row logs the powers, dithering levels and seeds it was computed from,
so a checker can rebuild the channel realization and re-evaluate the SINDRs
it claims.
"""

import hashlib
import os

import numpy as np

from . import __version__
from .channels import apply_csi_model, draw_channels
from .config import ScenarioConfig, sweep_grid
from .dithering import ThetaInterval, coarse_dither, joint_design
from .errors import ConfigError
from .linksim import detect_qam16, simulate_symbols
from .power_control import (DesignProblem, maxmin_bcd, minpower_bcd,
                            minpower_gradient)
from .quantization import PowerDitherPoint, build_model
from .receivers import build_receivers, sindr_for_kind
from .units import dbm_to_watt, watt_to_dbm

SWEEP_KINDS = ("sndr", "minpower", "maxmin", "ser")

_GEOMETRY_SWEEPS = {"d_ref_m": ("geometry", "d_ref_m"),
                    "b_cluster_m": ("geometry", "b_cluster_m"),
                    "n_ue": ("geometry", "n_ue"),
                    "ants_per_rrh": ("geometry", "ants_per_rrh")}


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return f"{value:.17g}"
    return str(value)


def _geometry_for_point(cfg: ScenarioConfig, variable, value):
    if variable not in _GEOMETRY_SWEEPS:
        return cfg.build_geometry(), False
    import copy
    local = copy.deepcopy(cfg)
    name = _GEOMETRY_SWEEPS[variable][1]
    cast = int if name in ("n_ue", "ants_per_rrh") else float
    setattr(local.geometry, name, cast(value))
    return local.build_geometry(), True


def channels_for_point(cfg: ScenarioConfig, geometry, seed_index, point_key):
    """Deterministic channel realization for one sweep point.

    ``point_key`` is the point index for geometry-altering sweeps and 0
    otherwise, so power sweeps reuse one realization per seed.
    """
    ss = np.random.SeedSequence(entropy=cfg.experiment.seed,
                                spawn_key=(seed_index, point_key))
    state = draw_channels(geometry, np.random.default_rng(ss))
    if cfg.csi.mode == "synthetic" and cfg.csi.epsilon > 0.0:
        ss_err = np.random.SeedSequence(entropy=cfg.experiment.seed,
                                        spawn_key=(seed_index, point_key, 3))
        state = apply_csi_model(state, geometry, mode="synthetic",
                                epsilon=cfg.csi.epsilon,
                                seed=np.random.default_rng(ss_err))
    return state


def _opt_rng(cfg, seed_index, point_index):
    ss = np.random.SeedSequence(entropy=cfg.experiment.seed,
                                spawn_key=(seed_index, point_index, 1))
    return np.random.default_rng(ss)


def _symbol_rng(cfg, seed_index, point_index):
    ss = np.random.SeedSequence(entropy=cfg.experiment.seed,
                                spawn_key=(seed_index, point_index, 2))
    return np.random.default_rng(ss)


def _dither_levels(mode, geometry, sigma_min):
    if mode == "off":
        return np.full(geometry.B, sigma_min)
    # Strongest shaping: every RRH raised relative to the farthest one.
    interval = ThetaInterval.from_geometry(geometry)
    return coarse_dither(interval.high, geometry, sigma_min)


def _sigma2_dbm(sigma):
    return watt_to_dbm(np.asarray(sigma) ** 2)


def _series_header(kind, k, b, sweep_name):
    cols = ["point_index", "seed_index", sweep_name]
    if kind == "sndr":
        cols += [f"rho_dbm_{i}" for i in range(k)]
        cols += [f"sindr_{i}" for i in range(k)]
    elif kind == "minpower":
        cols += ["sum_power_dbm", "feasible", "termination"]
        cols += [f"rho_dbm_{i}" for i in range(k)]
        cols += [f"sindr_{i}" for i in range(k)]
    elif kind == "maxmin":
        cols += ["maxmin_sindr", "termination"]
        cols += [f"rho_dbm_{i}" for i in range(k)]
        cols += [f"sindr_{i}" for i in range(k)]
    elif kind == "ser":
        cols += ["max_ser", "max_ser_half_width", "n_symbols"]
        cols += [f"ser_{i}" for i in range(k)]
        cols += [f"rho_dbm_{i}" for i in range(k)]
    cols += [f"sigma2_dbm_{j}" for j in range(b)]
    return cols


def _problem(cfg, channels, geometry, receiver, gamma_target=None,
             rho_ue_dbm=None):
    k = channels.h_hat.shape[0]
    targets = None if gamma_target is None else np.full(k, float(gamma_target))
    cap = np.inf if rho_ue_dbm is None else float(dbm_to_watt(rho_ue_dbm))
    rho_max = cap if np.isfinite(cap) \
        else float(dbm_to_watt(cfg.experiment.rho_ue_dbm))
    return DesignProblem(channels=channels, sigma_min=cfg.sigma_min,
                         receiver=receiver, gamma_targets=targets,
                         rho_ue_max=cap, rho_max=rho_max, geometry=geometry)


def _sweep_rows(cfg, kind, receiver, dither_mode):
    """Yield CSV rows (lists of strings) for one series."""
    e = cfg.experiment
    grid = sweep_grid(cfg)
    for point_index, value in enumerate(grid):
        geometry, varies = _geometry_for_point(cfg, e.sweep, value)
        point_key = point_index if varies else 0
        for seed_index in range(e.n_seeds):
            channels = channels_for_point(cfg, geometry, seed_index, point_key)
            row = [str(point_index), str(seed_index), _fmt(value)]
            if kind == "sndr":
                if e.sweep != "rho_dbm":
                    raise ConfigError("sndr sweeps use the rho_dbm variable")
                sigma = _dither_levels(dither_mode, geometry, cfg.sigma_min)
                rho = np.full(geometry.K, dbm_to_watt(value))
                point = PowerDitherPoint(rho=rho, sigma=sigma,
                                         sigma_min=cfg.sigma_min)
                model = build_model(channels, point)
                vals = sindr_for_kind(model, channels, rho, receiver)
                row += [_fmt(v) for v in watt_to_dbm(rho)]
                row += [_fmt(v) for v in vals]
            elif kind == "minpower":
                gamma = value if e.sweep == "gamma_target" else e.gamma_target
                problem = _problem(cfg, channels, geometry, receiver,
                                   gamma_target=gamma)
                if dither_mode == "on":
                    sol = joint_design("minpower", problem, cfg.optimizer,
                                       seed=_opt_rng(cfg, seed_index,
                                                     point_index))
                    rho, sigma = sol.rho, sol.sigma
                    vals, feasible = sol.sindr, sol.feasible
                    termination = "joint"
                else:
                    sigma = np.full(geometry.B, cfg.sigma_min)
                    if cfg.optimizer.inner_solver == "gradient":
                        rec = minpower_gradient(problem, sigma, cfg.optimizer,
                                                _opt_rng(cfg, seed_index,
                                                         point_index))
                    else:
                        rec = minpower_bcd(problem, sigma, cfg.optimizer)
                    rho, vals = rec.best.rho, rec.best.sindr
                    feasible, termination = rec.feasible, rec.termination
                row += [_fmt(watt_to_dbm(np.sum(rho))), str(feasible),
                        termination]
                with np.errstate(divide="ignore"):
                    row += [_fmt(v) for v in watt_to_dbm(rho)]
                row += [_fmt(v) for v in vals]
            elif kind == "maxmin":
                cap = value if e.sweep == "rho_ue_dbm" else e.rho_ue_dbm
                problem = _problem(cfg, channels, geometry, receiver,
                                   rho_ue_dbm=cap)
                if dither_mode == "on":
                    sol = joint_design("maxmin", problem, cfg.optimizer,
                                       seed=_opt_rng(cfg, seed_index,
                                                     point_index))
                    rho, sigma, vals = sol.rho, sol.sigma, sol.sindr
                    objective, termination = sol.objective, "joint"
                else:
                    sigma = np.full(geometry.B, cfg.sigma_min)
                    rec = maxmin_bcd(problem, sigma, cfg.optimizer)
                    rho, vals = rec.best.rho, rec.best.sindr
                    objective, termination = rec.best.objective, rec.termination
                row += [_fmt(objective), termination]
                with np.errstate(divide="ignore"):
                    row += [_fmt(v) for v in watt_to_dbm(rho)]
                row += [_fmt(v) for v in vals]
            elif kind == "ser":
                cap = value if e.sweep == "rho_ue_dbm" else e.rho_ue_dbm
                problem = _problem(cfg, channels, geometry, receiver,
                                   rho_ue_dbm=cap)
                if dither_mode == "on":
                    sol = joint_design("maxmin", problem, cfg.optimizer,
                                       seed=_opt_rng(cfg, seed_index,
                                                     point_index))
                    rho, sigma = sol.rho, sol.sigma
                else:
                    sigma = np.full(geometry.B, cfg.sigma_min)
                    rec = maxmin_bcd(problem, sigma, cfg.optimizer)
                    rho = rec.best.rho
                point = PowerDitherPoint(rho=rho, sigma=sigma,
                                         sigma_min=cfg.sigma_min)
                model = build_model(channels, point)
                bank = build_receivers(model, channels, rho, receiver)
                batch = simulate_symbols(channels, point, bank, e.n_symbols,
                                         "qam16",
                                         _symbol_rng(cfg, seed_index,
                                                     point_index))
                result = detect_qam16(batch, channels, point, bank, model)
                row += [_fmt(result.max_ser), _fmt(result.max_ser_half_width),
                        str(result.n_symbols)]
                row += [_fmt(v) for v in result.ser]
                with np.errstate(divide="ignore"):
                    row += [_fmt(v) for v in watt_to_dbm(rho)]
            row += [_fmt(v) for v in _sigma2_dbm(sigma)]
            yield geometry, row


def run_sweep(cfg: ScenarioConfig, out_dir, kind) -> list:
    """Run one sweep and write its artifacts; returns the CSV paths."""
    if kind not in SWEEP_KINDS:
        raise ConfigError(f"unknown sweep kind {kind!r}")
    os.makedirs(out_dir, exist_ok=True)
    config_path = os.path.join(out_dir, "config.txt")
    with open(config_path, "w", encoding="utf-8") as fh:
        fh.write(cfg.to_text())
    paths = []
    for receiver in cfg.experiment.receivers:
        for mode in cfg.experiment.dithering:
            name = f"{kind}_{receiver}_dither-{mode}.csv"
            path = os.path.join(out_dir, name)
            rows = list(_sweep_rows(cfg, kind, receiver, mode))
            k = rows[0][0].K
            b = rows[0][0].B
            header = _series_header(kind, k, b, cfg.experiment.sweep)
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(",".join(header) + "\n")
                for _, row in rows:
                    fh.write(",".join(row) + "\n")
            paths.append(path)
    _write_manifest(cfg, out_dir, [config_path] + paths)
    return paths


def _write_manifest(cfg, out_dir, paths):
    lines = [f"config_sha256 = {cfg.digest()}",
             f"package_version = {__version__}"]
    for path in sorted(paths):
        with open(path, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
        lines.append(f"file {os.path.basename(path)} sha256 {digest}")
    with open(os.path.join(out_dir, "manifest.txt"), "w",
              encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def rederive_check(out_dir, tol=1e-8) -> float:
    """Re-evaluate every logged SINDR from its logged (rho, sigma, seed).

    Returns the worst relative error across all rows; raises AssertionError
    beyond ``tol``.  SER files carry no SINDR column and are skipped.
    """
    from .config import load_config
    cfg = load_config(os.path.join(out_dir, "config.txt"))
    worst = 0.0
    for name in sorted(os.listdir(out_dir)):
        if not name.endswith(".csv") or name.startswith("ser_"):
            continue
        kind, receiver = name.split("_")[0], name.split("_")[1]
        with open(os.path.join(out_dir, name), encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            idx = {col: i for i, col in enumerate(header)}
            k = sum(1 for col in header if col.startswith("sindr_"))
            b = sum(1 for col in header if col.startswith("sigma2_dbm_"))
            for line in fh:
                cells = line.strip().split(",")
                point_index = int(cells[idx["point_index"]])
                seed_index = int(cells[idx["seed_index"]])
                value = float(cells[idx[cfg.experiment.sweep]])
                geometry, varies = _geometry_for_point(
                    cfg, cfg.experiment.sweep, value)
                channels = channels_for_point(
                    cfg, geometry, seed_index,
                    point_index if varies else 0)
                rho = dbm_to_watt(np.array(
                    [float(cells[idx[f"rho_dbm_{i}"]]) for i in range(k)]))
                sigma = np.sqrt(dbm_to_watt(np.array(
                    [float(cells[idx[f"sigma2_dbm_{j}"]]) for j in range(b)])))
                logged = np.array(
                    [float(cells[idx[f"sindr_{i}"]]) for i in range(k)])
                point = PowerDitherPoint(rho=rho, sigma=sigma,
                                         sigma_min=min(cfg.sigma_min,
                                                       float(sigma.min())))
                model = build_model(channels, point)
                vals = sindr_for_kind(model, channels, rho, receiver)
                err = np.max(np.abs(vals - logged)
                             / np.maximum(np.abs(logged), 1e-30))
                worst = max(worst, float(err))
    if worst > tol:
        raise AssertionError(f"re-derived SINDR mismatch: {worst:.3e} > {tol}")
    return worst
