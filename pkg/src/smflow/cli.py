"""Command line interface: scenario runs, convergence studies, check suites.

Commands::

    smflow run --config <file> [--set key=value ...]
    smflow converge --config <file> --levels <N[:dt],N[:dt],...>
    smflow check <suite> [--seed S]

Configuration is JSON; ``--set`` overrides use dotted keys with JSON
values (``--set domain.n=128``). The environment variable SMFLOW_OUT
overrides the output root. Every artifact embeds a schema string; CSV
floats use shortest round-trip formatting, so identical configurations
produce bit-identical files. Exit codes: 0 pass, 1 check or invariant
failure, 2 usage or configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import flow_direct as fd
from . import frame_reduction as fr
from .checks import SUITE_NAMES, run_suite
from .errors import (
    BlowUpSuspectedError,
    ConfigError,
    NoConvergenceError,
    SmflowError,
)
from .geometry import bump_warp, flat_torus, hyperbolic_disk, round_sphere, warped_sphere
from .holonomy import (
    connection_matrix_samples,
    holonomy_ode,
    holonomy_rate,
    lift_to_branch,
    product_integral,
    swept_angle_increment,
    x_independence_check,
)
from .spectral import SpectralGrid

SCHEMA_CONFIG = "smflow.config.v1"
SCHEMA_TIMESERIES = "smflow.timeseries.v1"
SCHEMA_SNAPSHOT = "smflow.snapshot.v1"
SCHEMA_HOLONOMY = "smflow.holonomy.v1"
SCHEMA_SUMMARY = "smflow.summary.v1"
SCHEMA_CONVERGENCE = "smflow.convergence.v1"
SCHEMA_CHECKS = "smflow.checks.v1"

TIMESERIES_COLUMNS = ("t", "energy", "a_l2", "theta_transport", "theta_ode",
                      "theta_gb", "theta_rate", "phi_l4", "cross_error")

_TARGETS = ("round_sphere", "warped_sphere", "hyperbolic_disk", "flat_torus")
_SPHERE_INITS = ("constant", "great_circle", "latitude", "perturbed_latitude",
                 "fourier")
_CHART_INITS = ("constant", "fourier")

DEFAULT_CONFIG = {
    "target": {"kind": "round_sphere", "radius": 1.0,
               "warp": {"amplitude": 0.1, "width": 0.5,
                        "center": [0.0, 0.0, 1.0]}},
    "domain": {"kind": "circle", "n": 64, "half_width": 6.0},
    "init": {"kind": "latitude", "alpha": 0.7853981633974483},
    "time": {"dt": 0.0, "t_final": 0.01},
    "reduction": {"mode": "coupled"},
    "diagnostics": {"cadence": 1, "snapshot_cadence": 0, "l4_window": 32},
    "output": {"dir": "smflow-run"},
    "study": {"error": "auto"},
    "seed": 0,
}

# -- configuration --------------------------------------------------------------


def _merge(base, override, path=""):
    violations = []
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            if path in ("init",):
                base[key] = value
                continue
            violations.append(f"unknown configuration key {where!r}")
            continue
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                violations.append(f"{where} must be an object")
                continue
            violations.extend(_merge(base[key], value, where))
        else:
            base[key] = value
    return violations


def _apply_override(cfg, item):
    key, sep, raw = item.partition("=")
    if not sep or not key:
        return [f"override {item!r} is not of the form key=value"]
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            if isinstance(node, dict) and p not in node and parts[0] == "init":
                node[p] = {}
            else:
                return [f"override {key!r} does not match a configuration section"]
        node = node[p]
    leaf = parts[-1]
    if leaf not in node and parts[0] != "init":
        return [f"unknown configuration key {key!r}"]
    node[leaf] = value
    return []


def load_config(path=None, overrides=()):
    """Defaults, overlaid by a JSON file, overlaid by --set items."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    violations = []
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError([f"config file not found: {path}"])
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config file is not valid JSON: {exc}"])
        if not isinstance(user, dict):
            raise ConfigError(["config file must contain a JSON object"])
        user.pop("schema", None)
        user.pop("derived", None)  # echoed configs can be re-run as-is
        if isinstance(user.get("init"), dict):
            # init parameters are preset-specific; a user init section
            # replaces the default outright instead of merging into it
            cfg["init"] = dict(user.pop("init"))
        violations.extend(_merge(cfg, user))
    for item in overrides:
        violations.extend(_apply_override(cfg, item))
    violations.extend(_validate_structure(cfg))
    if violations:
        raise ConfigError(violations)
    return cfg


def _validate_structure(cfg):
    v = []
    target = cfg["target"]
    if target["kind"] not in _TARGETS:
        v.append(f"target.kind must be one of {_TARGETS}; got {target['kind']!r}")
    if not isinstance(target["radius"], (int, float)) or target["radius"] <= 0:
        v.append("target.radius must be a positive number")
    warp = target["warp"]
    if not isinstance(warp.get("amplitude"), (int, float)):
        v.append("target.warp.amplitude must be a number")
    if not isinstance(warp.get("width"), (int, float)) or warp.get("width", 0) <= 0:
        v.append("target.warp.width must be a positive number")
    if not (isinstance(warp.get("center"), list) and len(warp["center"]) == 3):
        v.append("target.warp.center must be a list of three numbers")

    dom = cfg["domain"]
    if dom["kind"] not in ("circle", "line"):
        v.append(f"domain.kind must be 'circle' or 'line'; got {dom['kind']!r}")
    n = dom["n"]
    if not (isinstance(n, int) and n >= 16 and (n & (n - 1)) == 0):
        v.append(f"domain.n must be a power of two >= 16; got {n!r}")
    if not isinstance(dom["half_width"], (int, float)) or dom["half_width"] <= 0:
        v.append("domain.half_width must be a positive number")

    embedded = target["kind"] in ("round_sphere", "warped_sphere")
    inits = _SPHERE_INITS if embedded else _CHART_INITS
    if cfg["init"].get("kind") not in inits:
        v.append(f"init.kind must be one of {inits} for target "
                 f"{target['kind']!r}; got {cfg['init'].get('kind')!r}")

    tm = cfg["time"]
    if not isinstance(tm["t_final"], (int, float)) or tm["t_final"] < 0:
        v.append("time.t_final must be >= 0")
    if not isinstance(tm["dt"], (int, float)) or tm["dt"] < 0:
        v.append("time.dt must be >= 0 (0 selects the stability limit)")

    mode = cfg["reduction"]["mode"]
    if mode not in ("coupled", "autonomous"):
        v.append(f"reduction.mode must be 'coupled' or 'autonomous'; got {mode!r}")
    if mode == "autonomous" and (not embedded or dom["kind"] != "circle"):
        v.append("reduction.mode 'autonomous' requires an embedded sphere "
                 "target on the circle domain")

    diag = cfg["diagnostics"]
    if not (isinstance(diag["cadence"], int) and diag["cadence"] >= 1):
        v.append("diagnostics.cadence must be an integer >= 1")
    if not (isinstance(diag["snapshot_cadence"], int)
            and diag["snapshot_cadence"] >= 0):
        v.append("diagnostics.snapshot_cadence must be an integer >= 0")
    if not (isinstance(diag["l4_window"], int) and diag["l4_window"] >= 1):
        v.append("diagnostics.l4_window must be an integer >= 1")
    if cfg["study"]["error"] not in ("auto", "analytic", "cross", "reference"):
        v.append("study.error must be one of 'auto', 'analytic', 'cross', "
                 "'reference'")
    if not isinstance(cfg["seed"], int):
        v.append("seed must be an integer")
    if not isinstance(cfg["output"]["dir"], str) or not cfg["output"]["dir"]:
        v.append("output.dir must be a non-empty string")
    return v


def _build_surface(cfg):
    target = cfg["target"]
    kind = target["kind"]
    if kind == "round_sphere":
        return round_sphere(float(target["radius"]))
    if kind == "warped_sphere":
        warp = target["warp"]
        return warped_sphere(*bump_warp(amplitude=float(warp["amplitude"]),
                                        width=float(warp["width"]),
                                        center=tuple(warp["center"])))
    if kind == "hyperbolic_disk":
        return hyperbolic_disk()
    return flat_torus()


def _build_grid(cfg):
    dom = cfg["domain"]
    if dom["kind"] == "circle":
        return SpectralGrid(int(dom["n"]))
    return SpectralGrid(int(dom["n"]), kind="line",
                        half_width=float(dom["half_width"]))


def _materialize(cfg):
    """Surface, grid, initial loop, and the resolved (dt, n_steps)."""
    surface = _build_surface(cfg)
    grid = _build_grid(cfg)
    init = dict(cfg["init"])
    kind = init.pop("kind")
    loop = fd.initial_loop(surface, grid, kind, **init)
    dt_req = float(cfg["time"]["dt"])
    t_final = float(cfg["time"]["t_final"])
    dt_max = fd.admissible_dt(loop)
    if dt_req > dt_max * (1.0 + 1e-12):
        raise ConfigError(
            [f"time.dt={dt_req:.6e} exceeds the stability limit "
             f"{dt_max:.6e} for domain.n={grid.n}"])
    dt0 = dt_max if dt_req == 0.0 else dt_req
    if t_final == 0.0:
        return surface, grid, loop, dt0, 0
    n_steps = max(1, math.ceil(t_final / dt0 - 1e-9))
    return surface, grid, loop, t_final / n_steps, n_steps


def output_root():
    return Path(os.environ.get("SMFLOW_OUT", "."))


# -- artifact writers -----------------------------------------------------------


def _fmt(value) -> str:
    return repr(float(value))


def _write_csv(path, schema, columns, rows, comments=()):
    lines = [f"# schema={schema}"]
    lines.extend(comments)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path, payload):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _complex_matrix_json(matrix):
    return [[[float(z.real), float(z.imag)] for z in row] for row in matrix]


def _write_snapshot(path, t, grid, points, big_phi, small_phi):
    d = points.shape[1]
    columns = (["x"] + [f"u{j}" for j in range(d)]
               + ["Phi_re", "Phi_im", "phi_re", "phi_im", "Phi_abs"])
    rows = []
    for j in range(grid.n):
        row = [grid.nodes[j], *points[j],
               big_phi[j].real, big_phi[j].imag,
               small_phi[j].real, small_phi[j].imag, abs(big_phi[j])]
        rows.append(row)
    _write_csv(path, SCHEMA_SNAPSHOT, columns, rows, comments=[f"# t={_fmt(t)}"])


def _row_indices(n_steps, cadence):
    rows = list(range(0, n_steps + 1, cadence))
    if rows[-1] != n_steps:
        rows.append(n_steps)
    return rows


def _snapshot_indices(n_steps, snapshot_cadence):
    if snapshot_cadence == 0:
        return sorted({0, n_steps})
    out = set(range(0, n_steps + 1, snapshot_cadence))
    out.add(n_steps)
    return sorted(out)


def _holonomy_payload(surface, grid, points, theta, theta_ode, theta_gb):
    samples = connection_matrix_samples(surface, grid, points)
    H = product_integral(samples, period=grid.period)
    eye = np.eye(H.shape[0])
    spectral, aligned = x_independence_check(samples, period=grid.period,
                                             n_bases=8)
    return {
        "schema": SCHEMA_HOLONOMY,
        "matrix": _complex_matrix_json(H),
        "unitarity_defect": float(np.abs(H @ H.conj().T - eye).max()),
        "base_independence_spectral": float(spectral),
        "base_independence_aligned": float(aligned),
        "theta_transport": float(theta),
        "theta_ode": float(theta_ode),
        "theta_gauss_bonnet": float(theta_gb),
    }


# -- scenario runner ------------------------------------------------------------


def _summary_invariants(rows, circle, mode, res=None, skip_cross=False):
    inv = {}

    def add(name, value, threshold):
        value = float(value)
        inv[name] = {"value": value, "threshold": float(threshold),
                     "passed": bool(value <= threshold)}

    arr = np.asarray([[r[c] for c in range(len(TIMESERIES_COLUMNS))]
                      for r in rows], dtype=float)
    t = arr[:, 0]
    add("nonmonotone_time_count", int(np.sum(np.diff(t) <= 0)), 0)
    finite_cols = list(range(len(TIMESERIES_COLUMNS)))
    if skip_cross:
        finite_cols.remove(TIMESERIES_COLUMNS.index("cross_error"))
    add("nonfinite_count",
        int(np.sum(~np.isfinite(arr[:, finite_cols]))), 0)
    e = arr[:, 1]
    scale = max(abs(e[0]), 1e-300)
    drift_tol = 1e-6 if mode == "coupled" else 1e-4
    add("energy_drift_rel", np.abs(e - e[0]).max() / scale, drift_tol)
    a = arr[:, 2]
    add("a_norm_drift_rel",
        np.abs(a - a[0]).max() / max(abs(a[0]), 1e-300), drift_tol)
    if circle:
        add("theta_method_disagreement",
            np.abs(arr[:, 5] - arr[:, 3]).max(), 1e-3)
    if res is not None:
        add("cross_error_max", res.max_sup_error, 10.0 * res.tolerance)
        if circle:
            add("twist_residual_max", res.twist_residual_ode.max(),
                10.0 * res.tolerance)
            add("untwisted_periodicity_max", res.phi_closure.max(), 1e-10)
        else:
            add("edge_decay_max", res.twist_residual_ode.max(), 1e-4)
    return inv


def _run_coupled(surface, grid, loop, cfg, dt, n_steps, out_dir):
    circle = cfg["domain"]["kind"] == "circle"
    diag = cfg["diagnostics"]
    row_ids = _row_indices(n_steps, diag["cadence"])
    snap_ids = _snapshot_indices(n_steps, diag["snapshot_cadence"])
    row_set, snap_set = set(row_ids), set(snap_ids)
    ode_raw = {}
    snapshots = {}

    def observer(k, state, coeffs):
        if circle and k in row_set:
            ode_raw[k] = holonomy_ode(surface, grid, state.points)
        if k in snap_set:
            snapshots[k] = state.points.copy()

    res = fr.coupled_evolve(loop, dt, n_steps, domain=cfg["domain"]["kind"],
                            l4_window=diag["l4_window"], observer=observer)

    rows = []
    for k in row_ids:
        theta_ode = (lift_to_branch(ode_raw[k], res.theta[k])
                     if circle else 0.0)
        rows.append([res.times[k], res.energy[k],
                     math.sqrt(2.0 * res.energy[k]), res.theta[k], theta_ode,
                     res.theta_gb[k], res.theta_rate[k], res.l4_window[k],
                     res.sup_error[k]])
    _write_csv(out_dir / "timeseries.csv", SCHEMA_TIMESERIES,
               TIMESERIES_COLUMNS, rows)

    for k in snap_ids:
        _write_snapshot(out_dir / f"snapshot_{k:06d}.csv", res.times[k], grid,
                        snapshots[k], res.coeffs_history[k], res.phi_nls[k])

    if circle:
        payload = _holonomy_payload(
            surface, grid, res.final_state.points, res.theta[-1],
            lift_to_branch(ode_raw[n_steps], res.theta[-1]), res.theta_gb[-1])
    else:
        payload = {"schema": SCHEMA_HOLONOMY, "matrix": None,
                   "note": "holonomy is defined for closed loops; "
                           "line-domain runs carry none"}
    _write_json(out_dir / "holonomy.json", payload)

    invariants = _summary_invariants(rows, circle, "coupled", res=res)
    metrics = {
        "n_steps": n_steps, "dt": dt, "t_final": float(res.times[-1]),
        "solver_tolerance": res.tolerance,
        "cross_error_max": res.max_sup_error,
        "energy_initial": float(res.energy[0]),
        "energy_final": float(res.energy[-1]),
        "theta_final": float(res.theta[-1]),
        "theta_gauss_bonnet_final": float(res.theta_gb[-1]),
        "phi_l4_final": float(res.l4_window[-1]),
    }
    return rows, invariants, metrics


def _run_autonomous(surface, grid, loop, cfg, dt, n_steps, out_dir):
    diag = cfg["diagnostics"]
    row_ids = _row_indices(n_steps, diag["cadence"])
    snap_ids = _snapshot_indices(n_steps, diag["snapshot_cadence"])
    needed = sorted(set(row_ids) | set(snap_ids))

    frame = fr.parallel_frame(surface, loop)
    coeffs = fr.coefficients(loop, frame)
    theta0 = lift_to_branch(frame.transport_angle(),
                            holonomy_ode(surface, grid, loop.points))
    phi0 = fr.untwist(coeffs, theta0)
    state = fr.AutonomousState(grid, phi0, loop.points[0].copy(),
                               frame.e1[0].copy(), theta0)

    recorded = {}  # step -> (t, points, phi, theta)
    recorded[0] = (0.0, loop.points.copy(), phi0.copy(), theta0)
    k_done = 0
    for k in needed:
        if k > k_done:
            state = fr.autonomous_evolve(surface, state, dt, k - k_done)
            k_done = k
        if k not in recorded:
            pts, _, _, _ = fr.reconstruct_loop(surface, grid, state.phi,
                                               state.base_point,
                                               state.e1_base, state.theta)
            recorded[k] = (state.time, pts, state.phi.copy(), state.theta)

    rows = []
    phi_hist, t_hist = [], []
    theta_gb = theta0
    prev = None
    for k in row_ids:
        t, pts, phi, theta = recorded[k]
        if prev is not None:
            gap = t - prev[0]
            theta_gb += swept_angle_increment(surface, grid, prev[1], pts, gap)
        prev = (t, pts)
        phi_hist.append(phi)
        t_hist.append(t)
        st = fd.LoopState(grid=grid, surface=surface, points=pts, time=t)
        energy = fd.energy(st)
        theta_ode = lift_to_branch(holonomy_ode(surface, grid, pts), theta)
        rate = holonomy_rate(surface, grid, pts)
        l4 = fr._windowed_l4(grid, np.asarray(phi_hist), np.asarray(t_hist),
                             len(phi_hist) - 1, diag["l4_window"])
        rows.append([t, energy, math.sqrt(2.0 * energy), theta, theta_ode,
                     theta_gb, rate, l4, np.nan])
    _write_csv(out_dir / "timeseries.csv", SCHEMA_TIMESERIES,
               TIMESERIES_COLUMNS, rows)

    for k in snap_ids:
        t, pts, phi, theta = recorded[k]
        big_phi = np.exp(-1j * theta * grid.nodes) * phi
        _write_snapshot(out_dir / f"snapshot_{k:06d}.csv", t, grid, pts,
                        big_phi, phi)

    t, pts, phi, theta = recorded[n_steps]
    payload = _holonomy_payload(surface, grid, pts, theta,
                                lift_to_branch(holonomy_ode(surface, grid, pts),
                                               theta), theta_gb)
    _write_json(out_dir / "holonomy.json", payload)

    invariants = _summary_invariants(rows, True, "autonomous", skip_cross=True)
    metrics = {
        "n_steps": n_steps, "dt": dt, "t_final": float(t),
        "theta_final": float(theta),
        "theta_gauss_bonnet_final": float(theta_gb),
        "energy_initial": float(rows[0][1]), "energy_final": float(rows[-1][1]),
        "phi_l4_final": float(rows[-1][7]),
    }
    return rows, invariants, metrics


def run_scenario(cfg):
    """Run one configured scenario; returns (artifact dir, summary dict)."""
    surface, grid, loop, dt, n_steps = _materialize(cfg)
    out_dir = output_root() / cfg["output"]["dir"]
    out_dir.mkdir(parents=True, exist_ok=True)

    echo = copy.deepcopy(cfg)
    echo["schema"] = SCHEMA_CONFIG
    echo["derived"] = {"dt": dt, "n_steps": n_steps}
    _write_json(out_dir / "config.json", echo)

    runner = _run_coupled if cfg["reduction"]["mode"] == "coupled" \
        else _run_autonomous
    rows, invariants, metrics = runner(surface, grid, loop, cfg, dt, n_steps,
                                       out_dir)
    summary = {
        "schema": SCHEMA_SUMMARY,
        "invariants": invariants,
        "metrics": metrics,
        "passed": all(item["passed"] for item in invariants.values()),
    }
    _write_json(out_dir / "summary.json", summary)
    return out_dir, summary


# -- convergence studies ----------------------------------------------------------


def _parse_levels(spec):
    levels = []
    violations = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        n_part, sep, dt_part = item.partition(":")
        try:
            n = int(n_part)
        except ValueError:
            violations.append(f"level {item!r}: sample count must be an integer")
            continue
        dt = None
        if sep:
            try:
                dt = float(dt_part)
            except ValueError:
                violations.append(f"level {item!r}: dt must be a number")
                continue
            if dt <= 0:
                violations.append(f"level {item!r}: dt must be positive")
        levels.append((n, dt))
    if violations:
        raise ConfigError(violations)
    return levels


def _latitude_exact(alpha, grid, t, radius=1.0):
    omega = 4.0 * np.pi**2 * np.cos(alpha) / radius**2
    phase = 2.0 * np.pi * grid.nodes / grid.period + omega * t
    return radius * np.stack(
        [np.sin(alpha) * np.cos(phase), np.sin(alpha) * np.sin(phase),
         np.full(grid.n, np.cos(alpha))], axis=-1)


def _study_error_kind(cfg):
    kind = cfg["study"]["error"]
    if kind != "auto":
        return kind
    if (cfg["target"]["kind"] == "round_sphere"
            and cfg["target"]["radius"] == 1.0
            and cfg["init"].get("kind") == "latitude"
            and cfg["domain"]["kind"] == "circle"):
        return "analytic"
    if cfg["reduction"]["mode"] == "coupled":
        return "cross"
    return "reference"


def convergence_study(cfg, levels):
    """Errors and observed orders over a list of (n, dt) refinement levels.

    Writes convergence.csv; errors are measured against the analytic
    precession solution, the internal cross-formulation disagreement, or
    the finest level, depending on study.error.
    """
    violations = []
    if len(levels) < 3:
        violations.append(f"need at least 3 levels; got {len(levels)}")
    resolved = []
    t_final = float(cfg["time"]["t_final"])
    if t_final <= 0:
        violations.append("time.t_final must be positive for a convergence study")
    if violations:
        raise ConfigError(violations)

    for n, dt in levels:
        level_cfg = copy.deepcopy(cfg)
        level_cfg["domain"]["n"] = n
        level_cfg["time"]["dt"] = 0.0 if dt is None else dt
        err = _validate_structure(level_cfg)
        if err:
            violations.extend(f"level n={n}: {e}" for e in err)
            continue
        try:
            surface, grid, loop, dt_run, n_steps = _materialize(level_cfg)
        except ConfigError as exc:
            violations.extend(f"level n={n}: {e}" for e in exc.violations)
            continue
        resolved.append((n, dt_run, n_steps, surface, grid, loop))
    for (n0, dt0, *_), (n1, dt1, *_) in zip(resolved, resolved[1:]):
        if n1 < n0 or dt1 > dt0 * (1.0 + 1e-12):
            violations.append(
                f"levels must refine monotonically: ({n0}, {dt0:.3e}) "
                f"-> ({n1}, {dt1:.3e})")
    kind = _study_error_kind(cfg)
    if kind == "analytic" and cfg["init"].get("kind") != "latitude":
        violations.append("study.error 'analytic' requires the latitude preset")
    if kind == "reference":
        n_fine = resolved[-1][0] if resolved else 0
        for n, *_ in resolved:
            if n_fine % n:
                violations.append(
                    f"reference study needs every n to divide the finest "
                    f"({n_fine}); {n} does not")
    if violations:
        raise ConfigError(violations)

    errors = []
    finals = []
    for n, dt_run, n_steps, surface, grid, loop in resolved:
        if kind == "cross":
            res = fr.coupled_evolve(loop, dt_run, n_steps,
                                    domain=cfg["domain"]["kind"])
            errors.append(res.max_sup_error)
            finals.append(None)
        else:
            state = fd.evolve(loop, dt_run, n_steps)
            finals.append(state.points)
            if kind == "analytic":
                exact = _latitude_exact(float(cfg["init"].get("alpha", np.pi / 3)),
                                        grid, state.time)
                errors.append(float(np.abs(state.points - exact).max()))
            else:
                errors.append(np.nan)  # filled below against the finest
    if kind == "reference":
        fine_pts = finals[-1]
        n_fine = resolved[-1][0]
        for i, (n, *_rest) in enumerate(resolved):
            stride = n_fine // n
            errors[i] = float(np.abs(finals[i] - fine_pts[::stride]).max())

    rows = []
    for i, ((n, dt_run, n_steps, *_), err) in enumerate(zip(resolved, errors)):
        order = np.nan
        if i > 0:
            n_prev, dt_prev = resolved[i - 1][0], resolved[i - 1][1]
            e_prev = errors[i - 1]
            if e_prev > 0 and err > 0:
                if n != n_prev:
                    order = math.log(e_prev / err) / math.log(n / n_prev)
                elif dt_run != dt_prev:
                    order = math.log(e_prev / err) / math.log(dt_prev / dt_run)
        rows.append([i, n, dt_run, n_steps, err, order])

    out_dir = output_root() / cfg["output"]["dir"]
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = copy.deepcopy(cfg)
    echo["schema"] = SCHEMA_CONFIG
    _write_json(out_dir / "config.json", echo)
    _write_csv(out_dir / "convergence.csv", SCHEMA_CONVERGENCE,
               ("level", "n", "dt", "n_steps", "error", "order"), rows,
               comments=[f"# error={kind}"])
    return out_dir, rows


# -- entry point ------------------------------------------------------------------


def _cmd_run(args):
    cfg = load_config(args.config, args.overrides)
    out_dir, summary = run_scenario(cfg)
    status = "pass" if summary["passed"] else "FAIL"
    print(f"run {status}: artifacts in {out_dir}")
    for name, item in sorted(summary["invariants"].items()):
        flag = "PASS" if item["passed"] else "FAIL"
        print(f"  [{flag}] {name}: {item['value']:.3e} <= "
              f"{item['threshold']:.1e}")
    return 0 if summary["passed"] else 1


def _cmd_converge(args):
    cfg = load_config(args.config, args.overrides)
    levels = _parse_levels(args.levels)
    out_dir, rows = convergence_study(cfg, levels)
    print(f"convergence table in {out_dir / 'convergence.csv'}")
    print("level  n      dt            error         order")
    for level, n, dt, n_steps, err, order in rows:
        otxt = f"{order:7.3f}" if np.isfinite(order) else "    -  "
        print(f"{level:5d}  {n:5d}  {dt:.6e}  {err:.6e}  {otxt}")
    return 0


def _cmd_check(args):
    results = run_suite(args.suite, seed=args.seed)
    for r in results:
        print(r.line())
    passed = all(r.passed for r in results)
    out_dir = output_root()
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "schema": SCHEMA_CHECKS,
        "suite": args.suite,
        "seed": args.seed,
        "passed": passed,
        "results": [
            {"suite": r.suite, "name": r.name, "value": r.value,
             "threshold": r.threshold, "passed": r.passed, "detail": r.detail}
            for r in results
        ],
    }
    _write_json(out_dir / f"check_{args.suite}.json", report)
    print("all checks passed" if passed else "CHECK FAILURES")
    return 0 if passed else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smflow",
        description="Schrodinger map flow simulator and verification lab")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one configured scenario")
    run_p.add_argument("--config", default=None, help="JSON configuration file")
    run_p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config entry")
    run_p.set_defaults(func=_cmd_run)

    conv_p = sub.add_parser("converge", help="run a refinement study")
    conv_p.add_argument("--config", default=None)
    conv_p.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE")
    conv_p.add_argument("--levels", required=True,
                        help="comma-separated N[:dt] levels, coarse to fine")
    conv_p.set_defaults(func=_cmd_converge)

    check_p = sub.add_parser("check", help="run a named verification suite")
    check_p.add_argument("suite", choices=(*SUITE_NAMES, "all"))
    check_p.add_argument("--seed", type=int, default=0)
    check_p.set_defaults(func=_cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return 2
    except BlowUpSuspectedError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except NoConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except SmflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
