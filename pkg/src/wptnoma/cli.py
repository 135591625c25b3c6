"""Command-line front end.

Two subcommands:

  run <config.toml>     one scenario through the full pipeline; writes
                        report.csv, dinkelbach_trace.csv, admm_trace.csv
  sweep <sweep.toml>    a parameter sweep, one CSV row per (value, seed,
                        csi, sigma_e2, mode); --aggregate averages seeds

Both accept overrides (--seed, --rho, --epsilon, --csi, --sigma-e2, --mode,
--solver). Outputs are plain CSV with no timestamps, so reruns with the same
inputs are byte-identical.
"""

import argparse
import copy
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import tomli

from . import admm as admm_mod
from . import dinkelbach as dink
from .config import config_from_dict, config_hash, load_config
from .scenario import build_scenario


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.rng_seed = args.seed
    if getattr(args, "rho", None) is not None:
        cfg.solver.rho = args.rho
    if getattr(args, "epsilon", None) is not None:
        cfg.solver.epsilon = args.epsilon
        cfg.solver.dinkelbach_epsilon = args.epsilon
    if getattr(args, "sigma_e2", None) is not None:
        cfg.csi_error_var = args.sigma_e2
        if getattr(args, "csi", None) is None and args.sigma_e2 > 0:
            cfg.csi = "imperfect"
    if getattr(args, "csi", None) is not None:
        cfg.csi = args.csi
    if getattr(args, "mode", None) is not None:
        cfg.mode = args.mode
    return cfg


def run_scenario(config_path, out_dir=None, solver="admm", seed=None, rho=None,
                 epsilon=None, csi=None, sigma_e2=None, mode=None):
    """Full pipeline for one config; returns the DinkelbachResult and writes
    the three CSVs when out_dir is given."""
    cfg = load_config(config_path)
    ns = argparse.Namespace(seed=seed, rho=rho, epsilon=epsilon, csi=csi,
                            sigma_e2=sigma_e2, mode=mode)
    _apply_overrides(cfg, ns)
    cfg.validate()
    scn = build_scenario(cfg)
    result = dink.dinkelbach_solve(scn, inner=solver)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        result.report.to_csv(os.path.join(out_dir, "report.csv"))
        dink.trace_csv(result, os.path.join(out_dir, "dinkelbach_trace.csv"))
        if result.inner_runs:
            admm_mod.trace_csv(result.inner_runs[-1],
                               os.path.join(out_dir, "admm_trace.csv"))
    return result, scn


@dataclass
class SweepSpec:
    parameter: str
    values: list
    config: dict               # base scenario config as a plain dict
    reps: int = 100
    solver: str = "admm"
    csi: list = field(default_factory=lambda: ["perfect"])
    sigma_e2: list = field(default_factory=lambda: [0.3])
    mode: list = field(default_factory=lambda: ["noma"])
    seed: int = 0
    aggregate: bool = False

    def validate(self):
        if not self.values:
            raise ValueError("sweep: empty value list")
        if not self.parameter:
            raise ValueError("sweep: missing parameter name")
        if self.reps < 1:
            raise ValueError("sweep: reps must be >= 1")
        if self.solver not in ("admm", "oracle"):
            raise ValueError("sweep: solver must be admm or oracle")
        for c in self.csi:
            if c not in ("perfect", "imperfect"):
                raise ValueError("sweep: csi entries must be perfect|imperfect")
        for m in self.mode:
            if m not in ("noma", "oma"):
                raise ValueError("sweep: mode entries must be noma|oma")
        probe = config_from_dict(copy.deepcopy(self.config))
        _set_param(probe, self.parameter, self.values[0])


def _set_param(cfg, name, value):
    """Sweep parameters address NetworkConfig fields first, solver fields next."""
    if name != "solver" and hasattr(cfg, name):
        setattr(cfg, name, value)
    elif hasattr(cfg.solver, name):
        setattr(cfg.solver, name, value)
    else:
        raise ValueError("unknown sweep parameter %r" % name)


def load_sweep(path):
    with open(path, "rb") as f:
        data = tomli.load(f)
    if "sweep" not in data:
        raise ValueError("%s: missing [sweep] table" % path)
    sw = dict(data["sweep"])
    base = sw.pop("base_config", None)
    if base is not None:
        base_path = os.path.join(os.path.dirname(os.path.abspath(path)), base)
        with open(base_path, "rb") as f:
            config = tomli.load(f)
    elif "config" in data:
        config = data["config"]
    else:
        raise ValueError("%s: need base_config = \"file\" or a [config] table" % path)
    known = {"parameter", "values", "reps", "solver", "csi", "sigma_e2",
             "mode", "seed", "aggregate"}
    unknown = set(sw) - known
    if unknown:
        raise ValueError("sweep: unknown keys %s" % sorted(unknown))
    for k in ("csi", "sigma_e2", "mode"):
        if k in sw and not isinstance(sw[k], list):
            sw[k] = [sw[k]]
    spec = SweepSpec(config=config, **sw)
    spec.validate()
    return spec


def _sweep_point(task):
    """One sweep point; returns a row dict. Runs inside worker processes, so
    every failure is captured as a status instead of raised."""
    cfg, solver, meta = task
    row = dict(meta)
    try:
        cfg.validate()
        scn = build_scenario(cfg)
        res = dink.dinkelbach_solve(scn, inner=solver)
        row.update(ee=res.ee, r_tot=res.report.r_tot, e_tot=res.report.e_tot,
                   eta=res.eta, iterations=res.iterations,
                   converged=res.converged, status="ok",
                   config_hash=scn.cfg_hash)
    except Exception as exc:
        msg = "%s: %s" % (type(exc).__name__, exc)
        row.update(ee=None, r_tot=None, e_tot=None, eta=None, iterations=None,
                   converged=False, status="error " + msg.replace(",", ";")
                   .replace("\n", " "), config_hash=config_hash(cfg))
    return row


def _sweep_tasks(spec):
    tasks = []
    for value in spec.values:
        for mode in spec.mode:
            for csi in spec.csi:
                sigmas = spec.sigma_e2 if csi == "imperfect" else [0.0]
                for sig in sigmas:
                    for rep in range(spec.reps):
                        cfg = config_from_dict(copy.deepcopy(spec.config))
                        _set_param(cfg, spec.parameter, value)
                        cfg.mode = mode
                        cfg.csi = csi
                        cfg.csi_error_var = sig
                        cfg.rng_seed = spec.seed + rep
                        meta = {"parameter": spec.parameter, "value": value,
                                "seed": spec.seed + rep, "csi": csi,
                                "sigma_e2": sig, "mode": mode,
                                "solver": spec.solver}
                        tasks.append((cfg, spec.solver, meta))
    return tasks


def _fmt_cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


ROW_COLUMNS = ["parameter", "value", "seed", "csi", "sigma_e2", "mode",
               "solver", "ee", "r_tot", "e_tot", "eta", "iterations",
               "converged", "status", "config_hash"]
AGG_COLUMNS = ["parameter", "value", "csi", "sigma_e2", "mode", "solver",
               "reps", "ok", "ee_mean"]


def run_sweep(sweep_path, out_dir=None, workers=1, aggregate=None, seed=None,
              reps=None, solver=None, rho=None, epsilon=None, csi=None,
              sigma_e2=None, mode=None):
    """Execute a sweep spec; returns the row dicts (always the long format)
    and writes sweep.csv when out_dir is given."""
    spec = load_sweep(sweep_path)
    if seed is not None:
        spec.seed = seed
    if reps is not None:
        spec.reps = reps
    if solver is not None:
        spec.solver = solver
    if aggregate is not None:
        spec.aggregate = aggregate
    if csi is not None:
        spec.csi = [csi]
    if sigma_e2 is not None:
        spec.sigma_e2 = [sigma_e2]
    if mode is not None:
        spec.mode = [mode]
    spec.validate()

    tasks = _sweep_tasks(spec)
    for cfg, _, _ in tasks:
        if rho is not None:
            cfg.solver.rho = rho
        if epsilon is not None:
            cfg.solver.epsilon = epsilon
            cfg.solver.dinkelbach_epsilon = epsilon

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "sweep.csv"), "w") as f:
            write_sweep_csv(rows, f, aggregate=spec.aggregate)
    return rows


def aggregate_rows(rows):
    """Seed-average the long rows; group order follows first appearance."""
    groups = {}
    order = []
    for r in rows:
        key = (r["parameter"], r["value"], r["csi"], r["sigma_e2"], r["mode"],
               r["solver"])
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)
    out = []
    for key in order:
        grp = groups[key]
        oks = [r["ee"] for r in grp if r["status"] == "ok"]
        mean = sum(oks) / len(oks) if oks else None
        out.append({"parameter": key[0], "value": key[1], "csi": key[2],
                    "sigma_e2": key[3], "mode": key[4], "solver": key[5],
                    "reps": len(grp), "ok": len(oks), "ee_mean": mean})
    return out


def write_sweep_csv(rows, f, aggregate=False):
    if aggregate:
        f.write(",".join(AGG_COLUMNS) + "\n")
        for r in aggregate_rows(rows):
            f.write(",".join(_fmt_cell(r[c]) for c in AGG_COLUMNS) + "\n")
    else:
        f.write(",".join(ROW_COLUMNS) + "\n")
        for r in rows:
            f.write(",".join(_fmt_cell(r[c]) for c in ROW_COLUMNS) + "\n")


def _add_common(p):
    p.add_argument("--seed", type=int, default=None, help="base RNG seed")
    p.add_argument("--rho", type=float, default=None, help="consensus penalty")
    p.add_argument("--epsilon", type=float, default=None,
                   help="stopping tolerance (consensus residual and outer loop)")
    p.add_argument("--csi", choices=["perfect", "imperfect"], default=None)
    p.add_argument("--sigma-e2", dest="sigma_e2", type=float, default=None,
                   help="channel estimation error variance (implies imperfect)")
    p.add_argument("--mode", choices=["noma", "oma"], default=None)
    p.add_argument("--solver", choices=["admm", "oracle"], default=None)
    p.add_argument("--out", default=".", help="output directory")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="wptnoma",
        description="Energy-efficiency optimization for wireless-powered "
                    "multicell NOMA networks: scenario runs and sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario config")
    p_run.add_argument("config")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep spec")
    p_sweep.add_argument("sweepspec")
    p_sweep.add_argument("--reps", type=int, default=None,
                         help="seeds per sweep point")
    p_sweep.add_argument("--workers", type=int, default=1,
                         help="parallel worker processes")
    p_sweep.add_argument("--aggregate", action="store_true", default=None,
                         help="emit seed-averaged rows instead of the long format")
    _add_common(p_sweep)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            result, scn = run_scenario(
                args.config, out_dir=args.out, solver=args.solver or "admm",
                seed=args.seed, rho=args.rho, epsilon=args.epsilon,
                csi=args.csi, sigma_e2=args.sigma_e2, mode=args.mode)
            print("ee=%r eta=%r outer_iterations=%d converged=%s" % (
                result.ee, result.eta, result.iterations, result.converged))
            print("wrote %s" % os.path.join(args.out, "report.csv"))
            return 0
        rows = run_sweep(
            args.sweepspec, out_dir=args.out, workers=args.workers,
            aggregate=args.aggregate, seed=args.seed, reps=args.reps,
            solver=args.solver, rho=args.rho, epsilon=args.epsilon,
            csi=args.csi, sigma_e2=args.sigma_e2, mode=args.mode)
        ok = sum(1 for r in rows if r["status"] == "ok")
        print("%d points (%d ok); wrote %s" % (
            len(rows), ok, os.path.join(args.out, "sweep.csv")))
        return 0
    except (ValueError, OSError, tomli.TOMLDecodeError, dink.DinkelbachError,
            admm_mod.AdmmDivergenceError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
