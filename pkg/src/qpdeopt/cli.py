"""Command-line front end: landscape, optimize and forward runs from a JSON config.

Exit codes: 0 success, 2 configuration error, 1 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import apps, objective, odesolver, oracle, qhd
from .blockenc import ProjectorPattern
from .objective import MAXIMIZE, MINIMIZE, ObjectiveSpec
from .odesolver import DesignGrid, OdeFamily
from .qcore import StateVector

PROBLEMS = ("black_scholes", "wave", "custom")
SOLVER_KEYS = ("k_max", "delta_k", "trotter_dt")
QHD_DEFAULTS = {"delta_s_factor": 0.01, "n_steps": 1000, "nu_override": None, "seed": 0, "snapshot_steps": []}
CUSTOM_DEFAULTS = {
    "matrix_file": None,
    "T": 1.0,
    "m": 2,
    "kind": "quad",
    "pattern": None,
    "sense": MINIMIZE,
    "forward": "lchs",
    "psd_tol": 1e-9,
}
TOP_KEYS = ("problem", "params", "solver", "qhd", "forward", "output_dir")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    problem: str
    params: dict
    solver: dict
    qhd: dict
    forward: dict = field(default_factory=dict)
    output_dir: str | None = None
    base_dir: Path = Path(".")


def _finite(path: str, v: Any, kind=float, positive: bool = False, allow_none: bool = False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {v!r}")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"{path}: expected an integer, got {v!r}")
        v = int(v)
    elif not math.isfinite(v):
        raise ConfigError(f"{path}: must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{path}: must be positive")
    return kind(v)


def _check_keys(path: str, d: Any, allowed) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(extra)}")
    return d


def _dataclass_params(path: str, cls, d: dict, exclude=()) -> dict:
    fields = {f.name: f for f in dataclasses.fields(cls) if f.name not in exclude}
    _check_keys(path, d, fields)
    out = {}
    for k, v in d.items():
        kind = int if fields[k].type in ("int", int) else float
        out[k] = _finite(f"{path}.{k}", v, kind)
    return out


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    return parse_config(raw, path.parent)


def parse_config(raw: Any, base_dir: Path = Path(".")) -> RunConfig:
    _check_keys("config", raw, TOP_KEYS)
    problem = raw.get("problem")
    if problem not in PROBLEMS:
        raise ConfigError(f"problem: must be one of {', '.join(PROBLEMS)}, got {problem!r}")
    params = raw.get("params", {})
    solver = _check_keys("solver", raw.get("solver", {}), SOLVER_KEYS)
    solver = {k: _finite(f"solver.{k}", v, float, positive=True) for k, v in solver.items()}
    if problem == "black_scholes":
        params = _dataclass_params("params", apps.BlackScholesParams, params, SOLVER_KEYS)
    elif problem == "wave":
        params = _dataclass_params("params", apps.WaveParams, params, SOLVER_KEYS)
        bad = sorted(set(solver) - {"trotter_dt"})
        if bad:
            raise ConfigError(f"solver: key(s) {', '.join(bad)} do not apply to the wave problem")
    else:
        params = _parse_custom(params, base_dir)
        if params["forward"] == "hamiltonian":
            bad = sorted(set(solver) - {"trotter_dt"})
            if bad:
                raise ConfigError(f"solver: key(s) {', '.join(bad)} do not apply to a hamiltonian forward")
    q = dict(QHD_DEFAULTS)
    q.update(_check_keys("qhd", raw.get("qhd", {}), QHD_DEFAULTS))
    q["delta_s_factor"] = _finite("qhd.delta_s_factor", q["delta_s_factor"], float, positive=True)
    q["n_steps"] = _finite("qhd.n_steps", q["n_steps"], int, positive=True)
    q["nu_override"] = _finite("qhd.nu_override", q["nu_override"], float, positive=True, allow_none=True)
    q["seed"] = _finite("qhd.seed", q["seed"], int)
    if not 0 <= q["seed"] < 2**64:
        raise ConfigError("qhd.seed: must fit in an unsigned 64-bit integer")
    if not isinstance(q["snapshot_steps"], list):
        raise ConfigError("qhd.snapshot_steps: expected a list")
    q["snapshot_steps"] = [_finite(f"qhd.snapshot_steps[{i}]", s, int) for i, s in enumerate(q["snapshot_steps"])]
    if any(not 0 <= s <= q["n_steps"] for s in q["snapshot_steps"]):
        raise ConfigError("qhd.snapshot_steps: steps must lie in [0, n_steps]")
    fwd = _check_keys("forward", raw.get("forward", {}), ("time_slices",))
    if "time_slices" in fwd:
        if not isinstance(fwd["time_slices"], list) or not fwd["time_slices"]:
            raise ConfigError("forward.time_slices: expected a non-empty list")
        fwd = {"time_slices": [_finite(f"forward.time_slices[{i}]", t, float) for i, t in enumerate(fwd["time_slices"])]}
    out = raw.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output_dir: expected a string")
    cfg = RunConfig(problem, params, solver, q, fwd, out, base_dir)
    try:
        build_problem(cfg)
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(f"params: {e}") from None
    return cfg


def _parse_custom(d: dict, base_dir: Path) -> dict:
    _check_keys("params", d, CUSTOM_DEFAULTS)
    p = dict(CUSTOM_DEFAULTS)
    p.update(d)
    if not isinstance(p["matrix_file"], str):
        raise ConfigError("params.matrix_file: required path to an .npz file")
    f = Path(p["matrix_file"])
    if not f.is_absolute():
        f = base_dir / f
    if not f.exists():
        raise ConfigError(f"params.matrix_file: {f} does not exist")
    p["matrix_file"] = str(f)
    p["T"] = _finite("params.T", p["T"], float, positive=True)
    p["m"] = _finite("params.m", p["m"], int, positive=True)
    p["psd_tol"] = _finite("params.psd_tol", p["psd_tol"], float)
    if p["kind"] not in ("quad", "err"):
        raise ConfigError("params.kind: must be 'quad' or 'err'")
    if p["sense"] not in (MINIMIZE, MAXIMIZE):
        raise ConfigError("params.sense: must be 'minimize' or 'maximize'")
    if p["forward"] not in ("lchs", "hamiltonian"):
        raise ConfigError("params.forward: must be 'lchs' or 'hamiltonian'")
    if p["pattern"] is not None and not (isinstance(p["pattern"], str) and set(p["pattern"]) <= set("01I")):
        raise ConfigError("params.pattern: string of '0', '1', 'I' (qubit 0 first)")
    return p


def build_problem(cfg: RunConfig) -> apps.Problem:
    if cfg.problem == "black_scholes":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return apps.build_black_scholes(apps.BlackScholesParams(**cfg.params, **cfg.solver))
    if cfg.problem == "wave":
        return apps.build_wave(apps.WaveParams(**cfg.params, **cfg.solver))
    return _custom_problem(cfg.params)


def _custom_problem(p: dict) -> apps.Problem:
    try:
        data = np.load(p["matrix_file"])
    except Exception as e:
        raise ConfigError(f"params.matrix_file: cannot read ({e})") from None
    for key in ("A0", "A_terms", "u0"):
        if key not in data:
            raise ConfigError(f"params.matrix_file: missing array {key!r}")
    A0 = np.asarray(data["A0"], dtype=complex)
    terms = np.asarray(data["A_terms"], dtype=complex)
    if terms.ndim == 2:
        terms = terms[None]
    u0 = np.asarray(data["u0"], dtype=complex).ravel()
    u0_norm = float(np.linalg.norm(u0))
    if u0_norm == 0:
        raise ConfigError("params.matrix_file: u0 is zero")
    n = int(round(np.log2(max(u0.size, 1))))
    ode = OdeFamily(A0, tuple(terms), u0 / u0_norm, p["T"], u0_norm, None, p["psd_tol"], p["forward"], {})
    pattern = ProjectorPattern(tuple(p["pattern"])) if p["pattern"] else ProjectorPattern.identity(n)
    if len(pattern) != n:
        raise ConfigError(f"params.pattern: needs {n} entries")
    if p["kind"] == "err":
        if "u_ref" not in data:
            raise ConfigError("params.matrix_file: err objective needs array 'u_ref'")
        u_ref = np.asarray(data["u_ref"], dtype=complex).ravel() / u0_norm
        r = float(np.linalg.norm(u_ref))
        ref = u_ref / r if r > 0 else np.eye(u0.size, dtype=complex)[0]
        spec = ObjectiveSpec("err", pattern, ref, r, p["sense"])
    else:
        spec = ObjectiveSpec("quad", pattern, None, 0.0, p["sense"])
    return apps.Problem(ode, spec, DesignGrid(ode.M, p["m"]))


# ---- pipelines -------------------------------------------------------------

def _solver_knobs(cfg: RunConfig, prob: apps.Problem) -> dict:
    if cfg.problem == "black_scholes":
        bp = prob.ode.meta["params"]
        return {"k_max": bp.k_max, "delta_k": bp.delta_k, "trotter_dt": bp.trotter_dt}
    if cfg.problem == "wave":
        return {"trotter_dt": prob.ode.meta["params"].trotter_dt}
    knobs = {"k_max": 8.0, "delta_k": 0.5, "trotter_dt": 0.05}
    knobs.update(cfg.solver)
    return knobs


def forward_oracle(prob: apps.Problem, knobs: dict, T: float | None = None):
    ode = prob.ode if T is None else dataclasses.replace(prob.ode, T=T)
    if ode.forward == "hamiltonian":
        return odesolver.hamiltonian_forward(ode, prob.grid, knobs["trotter_dt"])
    quad = odesolver.lchs_quadrature(knobs["k_max"], knobs["delta_k"])
    return odesolver.build_forward_oracle(ode, prob.grid, quad, knobs["trotter_dt"])


@dataclass
class LandscapeRun:
    prob: apps.Problem
    enc: objective.EncodedObjective
    table: oracle.LandscapeTable
    wall_time: float


def run_landscape(cfg: RunConfig) -> LandscapeRun:
    t0 = time.perf_counter()
    prob = build_problem(cfg)
    u_for = forward_oracle(prob, _solver_knobs(cfg, prob))
    enc = objective.build_objective(u_for, prob.objective)
    f_enc = objective.extract_objective_diagonal(enc, prob.grid)
    f_orc = oracle.oracle_objective(prob.ode, prob.objective, prob.grid)
    table = oracle.compare_landscapes(f_enc, f_orc, prob.grid, prob.objective.sense)
    return LandscapeRun(prob, enc, table, time.perf_counter() - t0)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n")


def _xi_cols(M: int) -> list[str]:
    return [f"xi_{mu + 1}" for mu in range(M)]


def cmd_landscape(cfg: RunConfig, out: Path, plot: bool = False) -> dict:
    run = run_landscape(cfg)
    t = run.table
    M = run.prob.grid.M
    write_csv(
        out / "landscape.csv",
        ["xi_index", *_xi_cols(M), "f_blockenc", "f_oracle", "abs_diff"],
        ([i, *t.xi[i], t.f_encoded[i], t.f_oracle[i], t.abs_diff[i]] for i in t.index),
    )
    summary = {
        "max_diff": t.max_diff,
        "mean_diff": t.mean_diff,
        "argextremum_index": t.argextremum_index,
        "argextremum_agrees": t.argextremum_agrees,
        "alpha_obj": run.enc.alpha_obj,
        "alpha_for": run.enc.alpha_for,
        "wall_time": run.wall_time,
        "oracle_argextremum_index": t.oracle_argextremum_index,
        "sense": t.sense,
    }
    write_json(out / "summary.json", summary)
    if plot:
        from . import plotting
        plotting.plot_landscape(t, out / "landscape.png")
    return summary


def cmd_optimize(cfg: RunConfig, out: Path, plot: bool = False) -> dict:
    run = run_landscape(cfg)
    grid, enc = run.prob.grid, run.enc
    f = run.table.f_encoded
    potential = enc.to_potential(f)
    psi0 = StateVector.uniform(grid.num_qubits)
    f_bar = objective.mean_objective(enc, psi0)
    q = cfg.qhd
    nu = q["nu_override"] if q["nu_override"] is not None else qhd.friction_from_mean(f_bar)
    ds = q["delta_s_factor"] / math.sqrt(f_bar) if f_bar > 0 else None
    if ds is None:
        raise ValueError("mean objective is not positive; cannot scale the QHD step")
    qc = qhd.QhdConfig(nu, ds, q["n_steps"], q["seed"])
    final, hist = qhd.qhd_evolve(potential, grid, qc, psi0, observable=f, snapshot_steps=q["snapshot_steps"])
    dist = qhd.distribution(final, grid)
    sampled = qhd.sample(dist, q["seed"])
    M = grid.M
    write_csv(
        out / "history.csv",
        ["step", "s", "expectation", "stddev"],
        zip(hist.step, hist.s, hist.expectation, hist.stddev),
    )
    cols = ["xi_index", *_xi_cols(M), "probability"]
    write_csv(out / "distribution.csv", cols, ([i, *dist.xi[i], dist.probabilities[i]] for i in range(grid.size)))
    for k, p in sorted(hist.snapshots.items()):
        write_csv(out / f"distribution_step{k}.csv", cols, ([i, *dist.xi[i], p[i]] for i in range(grid.size)))
    modal = dist.modal_index
    result = {
        "nu": nu,
        "f_bar": f_bar,
        "modal_index": modal,
        "modal_xi": [float(v) for v in dist.xi[modal]],
        "sampled_xi": [float(v) for v in dist.xi[sampled]],
        "agrees_with_landscape": modal == run.table.argextremum_index,
        "sampled_index": sampled,
        "seed": q["seed"],
        "delta_s": ds,
        "n_steps": q["n_steps"],
        "modal_probability": float(dist.probabilities[modal]),
        "landscape_argextremum_index": run.table.argextremum_index,
        "alpha_obj": enc.alpha_obj,
        "expectation_quantity": "objective in its own sense; QHD evolves under alpha_obj*(block+1)"
        + (" = 2*alpha_obj - F" if enc.sense == MAXIMIZE else " = F"),
        "f_bar_quantity": "mean of the QHD potential alpha_obj*(block+1) over the uniform state",
    }
    write_json(out / "result.json", result)
    if plot:
        from . import plotting
        plotting.plot_history(hist, run.table, out / "history.png")
        plotting.plot_distribution(dist, out / "distribution.png")
    return result


def cmd_forward(cfg: RunConfig, out: Path, xi_index: int, plot: bool = False) -> dict:
    prob = build_problem(cfg)
    grid, ode = prob.grid, prob.ode
    if not 0 <= xi_index < grid.size:
        raise ConfigError(f"--xi: must lie in [0, {grid.size})")
    knobs = _solver_knobs(cfg, prob)
    u = odesolver.forward_states(forward_oracle(prob, knobs), [xi_index])[0] * ode.u0_norm
    N = ode.dimension
    header = ["node_index", "x", "re_u", "im_u"]
    extra_cols: list[np.ndarray] = []
    if cfg.problem == "black_scholes":
        x = ode.meta["x"]
        header.append("price")
        extra_cols.append(u.real + np.exp(x))
    elif cfg.problem == "wave":
        xs = ode.meta["x"]
        Ns = xs.size
        x = np.concatenate([xs, xs])
        header.append("component")
        extra_cols.append(np.repeat([0, 1], Ns))
        slices = cfg.forward.get("time_slices") or [ode.T * k / 4 for k in range(5)]
        for ts in slices:
            if ts == 0:
                v = ode.u0 * ode.u0_norm
            else:
                if ts < 0:
                    raise ConfigError("forward.time_slices: times must be non-negative")
                try:
                    uf = forward_oracle(prob, knobs, T=ts)
                except ValueError as e:
                    raise ConfigError(f"forward.time_slices: {e}") from None
                v = odesolver.forward_states(uf, [xi_index])[0] * ode.u0_norm
            energy = np.abs(v[:Ns]) ** 2 + np.abs(v[Ns:]) ** 2
            header.append(f"energy_t{ts:g}")
            extra_cols.append(np.concatenate([energy, energy]))
    else:
        x = np.arange(N, dtype=float)
    rows = ([j, x[j], u[j].real, u[j].imag, *[c[j] for c in extra_cols]] for j in range(N))
    write_csv(out / "forward.csv", header, rows)
    if plot:
        from . import plotting
        plotting.plot_forward(out / "forward.csv", out / "forward.png")
    return {"xi_index": xi_index, "rows": N}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qpdeopt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("landscape", "optimize", "forward"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides output_dir)")
        sp.add_argument("--seed", type=int, help="QHD sampling seed (overrides qhd.seed)")
        sp.add_argument("--plot", action="store_true", help="also render PNG figures (needs matplotlib)")
        if name == "forward":
            sp.add_argument("--xi", type=int, required=True, help="design index")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed: must fit in an unsigned 64-bit integer")
            cfg.qhd["seed"] = args.seed
        out_dir = args.out or cfg.output_dir
        if not out_dir:
            raise ConfigError("no output directory: pass --out or set output_dir")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "landscape":
            cmd_landscape(cfg, out, args.plot)
        elif args.command == "optimize":
            cmd_optimize(cfg, out, args.plot)
        else:
            cmd_forward(cfg, out, args.xi, args.plot)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
