"""Command-line front end: ``mkvorder <command> --config run.toml``.

Exit status: 0 when every asserted check holds, 2 on a rejection or failed
check, 1 on configuration or runtime errors, 64 on usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import COMMANDS, RunConfig, build_run_config, diffusion_from, law_from, load_toml
from .errors import ConfigError, MkvError
from .io import SCHEMA_ID, SCHEMA_VERSION, atomic_write_text, csv_text, dumps

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECTED = 2
EXIT_USAGE = 64
THREADS_ENV = "MKVORDER_THREADS"


@dataclass
class Result:
    """One named outcome; ``ok`` is False for a rejection or a failed check."""

    name: str
    ok: bool = True
    data: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # file stem -> (columns, rows)


def exit_status(results: Sequence[Result]) -> int:
    return EXIT_OK if all(r.ok for r in results) else EXIT_REJECTED


def emit_report(results: Sequence[Result], out_dir: str | Path, formats: str = "both",
                config: dict | None = None, seed: int | None = None, command: str | None = None) -> list[Path]:
    """Write report.json and one CSV per table; contents depend only on the inputs."""
    out_dir = Path(out_dir)
    if out_dir.exists() and not out_dir.is_dir():
        raise OSError(f"output path {out_dir} is not a directory")
    written = []
    if formats in ("json", "both"):
        doc = {
            "schema": SCHEMA_ID,
            "schema_version": SCHEMA_VERSION,
            "package_version": __version__,
            "command": command,
            "seed": seed,
            "config": config or {},
            "passed": all(r.ok for r in results),
            "results": [{"name": r.name, "ok": r.ok, "data": r.data} for r in results],
        }
        written.append(atomic_write_text(out_dir / "report.json", dumps(doc)))
    if formats in ("csv", "both"):
        for r in results:
            for stem, (cols, rows) in sorted(r.tables.items()):
                written.append(atomic_write_text(out_dir / f"{stem}.csv", csv_text(cols, rows)))
    return written


# --------------------------------------------------------------------------
# commands


def _functionals(names):
    from .functionals import parse_path_functional

    try:
        return [parse_path_functional(n) for n in names]
    except (MkvError, ValueError) as exc:
        raise ConfigError(f"functional list: {exc}") from None


def cmd_simulate(rc: RunConfig) -> list[Result]:
    from .simulate import coupled_simulate

    sec = rc.section("simulate")
    xs, ys = coupled_simulate(rc.model, rc.grid, rc.N, rc.seed, rc.coupled_init)
    rows = []
    for ex, ey in zip(xs, ys):
        rows.append([ex.m, ex.t, *ex.summary.mean, *ey.summary.mean, ex.summary.m2, ey.summary.m2])
    d = rc.model.d
    cols = ["m", "t"] + [f"mean_X{i}" for i in range(d)] + [f"mean_Y{i}" for i in range(d)] + ["m2_X", "m2_Y"]
    tables = {"summary": (cols, rows)}
    if sec.get("ensembles", False):
        ecols = ["step", "t", "particle"] + [f"x{i}" for i in range(d)]
        for tag, ens in (("X", xs), ("Y", ys)):
            tables[f"ensembles_{tag}"] = (ecols, [(e.m, e.t, i, *x) for e in ens for i, x in enumerate(e.states)])
    data = {"N": rc.N, "M": rc.M, "final_mean_X": xs[-1].summary.mean, "final_mean_Y": ys[-1].summary.mean,
            "final_m2_X": xs[-1].summary.m2, "final_m2_Y": ys[-1].summary.m2}
    return [Result("simulate", True, data, tables)]


def cmd_order_test(rc: RunConfig) -> list[Result]:
    from .order import call_function_test_1d, functional_order_test
    from .simulate import coupled_paths

    sec = rc.section("order")
    names = sec.get("functionals", ["terminal-square", "running-max", "sup-norm"])
    xb, yb, xs, ys = coupled_paths(rc.model, rc.grid, rc.N, rc.seed, rc.refine, rc.coupled_init)
    results = []
    rows = []
    for F in _functionals(names):
        v = functional_order_test(xb, yb, F, rc.confidence)
        m = v.margins[0]
        rows.append([F.name, m.estimate, m.stderr, m.threshold, v.dominated])
        results.append(Result(f"functional:{F.name}", v.not_rejected, v.to_dict()))
    if sec.get("marginal", True) and rc.model.d == 1:
        v = call_function_test_1d(xs[-1].states[:, 0], ys[-1].states[:, 0], rc.strikes, rc.confidence,
                                  paired=True)
        data = v.to_dict()
        data["witness_strike"] = v.info.get("witness_strike")
        ctable = (["name", "estimate", "stderr", "threshold", "rejected"],
                  [[m.name, m.estimate, m.stderr, m.threshold, m.rejected] for m in v.margins])
        results.append(Result("terminal-calls", v.not_rejected, data, {"calls": ctable}))
    results.insert(0, Result("order-summary", True, {"N": rc.N, "M": rc.M, "refine": rc.refine},
                             {"margins": (["functional", "estimate", "stderr", "threshold", "dominated"], rows)}))
    return results


def cmd_converge(rc: RunConfig) -> list[Result]:
    from .experiments import convergence_study

    sec = rc.section("converge")
    g = rc.raw.get("grid", {})
    Ms = sec.get("M_list", g.get("M_list", [8, 16, 32, 64, 128]))
    M_ref = sec.get("M_ref", g.get("M_ref"))
    p = float(sec.get("p", 2.0))
    which = sec.get("which", "X")
    rep = convergence_study(rc.model, rc.N, Ms, p, rc.seed, M_ref, rc.T, which, threads=rc.threads)
    cols, rows = rep.table()
    cols = cols + ["slope", "constant", "residual"]
    rows = [r + [rep.slope, rep.constant, rep.residual] for r in rows]
    ok = True
    expect = sec.get("expect_slope")
    data = rep.to_dict()
    if expect is not None:
        lo, hi = float(expect[0]), float(expect[1])
        ok = lo <= rep.slope <= hi
        data["expected_slope"] = [lo, hi]
    return [Result("convergence", ok, data, {"convergence": (cols, rows)})]


def cmd_dpp_verify(rc: RunConfig) -> list[Result]:
    from .dpp import (QuadratureRule, as_separable, default_state_grid, fields_table, martingale_check,
                      phi_recursion, psi_recursion, verify_structural_lemmas)
    from .simulate import coupled_simulate

    if rc.model.d != 1:
        raise ConfigError("dpp-verify is one-dimensional")
    sec = rc.section("dpp")
    F = as_separable(_functionals([sec.get("functional", "terminal-call:1.0")])[0])
    rule = QuadratureRule.gauss_hermite(int(sec.get("quad_nodes", 32)))
    xs, ys = coupled_simulate(rc.model, rc.grid, rc.N, rc.seed, rc.coupled_init)
    g = default_state_grid([xs, ys], n=int(sec.get("grid_points", 513)), width=float(sec.get("width", 8.0)))
    flow_b = ys if sec.get("monotone_flow", False) else None
    tol = float(sec.get("tol", 1e-9))
    lem = verify_structural_lemmas(F, rc.model, rc.grid, xs, flow_b, rule, g, tol=tol)
    phi = phi_recursion(F, xs, rc.model, rc.grid, rule, g)
    psi = psi_recursion(F, xs, rc.model, rc.grid, rule, g)
    n_mart = int(sec.get("martingale_N", 100_000))
    mart = martingale_check(rc.model, rc.grid, n_mart, rc.seed, F, rule, None, sec.get("steps"),
                            k_sigma=float(sec.get("k_sigma", 4.0)))
    mrows = [[r.m, r.gap, r.stderr, r.within] for r in mart.rows]
    return [
        Result("structural-lemmas", lem.passed, lem.to_dict(), {"fields": fields_table(phi, psi)}),
        Result("martingale", mart.passed, mart.to_dict(), {"martingale": (["m", "gap", "stderr", "within"], mrows)}),
    ]


def _chain_config(rc: RunConfig, sec: dict):
    from .experiments import ChainConfig, default_battery
    from .model import drift_lookup
    from .validate import ProbeConfig

    chain = sec.get("chain")
    if not isinstance(chain, list) or len(chain) != 4:
        raise ConfigError("experiment.chain must list four diffusion presets")
    d = int(sec.get("d", 1))
    coefs = tuple(diffusion_from(c, d, d, rc.T, f"experiment.chain[{i}]") for i, c in enumerate(chain))
    inits = sec.get("chain_init", [{"kind": "point", "params": [0.0]}])
    if isinstance(inits, dict):
        inits = [inits]
    laws = tuple(law_from(s, d, f"experiment.chain_init[{i}]") for i, s in enumerate(inits))
    dspec = sec.get("drift", {"name": "zero"})
    try:
        drift = drift_lookup(dspec.get("name", "zero"), dspec.get("params", []), d=d)
    except MkvError as exc:
        raise ConfigError(f"experiment.drift: {exc}") from None
    F = tuple(_functionals(sec["functionals"])) if "functionals" in sec else default_battery()
    return ChainConfig(coefs, laws, drift, rc.grid, rc.N, rc.seed, F, rc.confidence, rc.refine,
                       ProbeConfig(n_samples=int(sec.get("probe_samples", 400)), d=d, T=rc.T))


def _chain_result(rep) -> Result:
    ok = rep.passed and rep.oracle_passed is not False
    return Result(rep.kind, ok, rep.to_dict(), {rep.kind: rep.table()})


def _lq_config(rc: RunConfig, sec: dict):
    from .experiments import LQConfig, RiccatiSystem

    lq = sec.get("lq", {})
    if not isinstance(lq, dict):
        raise ConfigError("[experiment.lq] must be a table")
    riccati_keys = {k: lq[k] for k in ("eta_rhs", "chi_rhs", "eta_T", "chi_T") if k in lq}
    system = RiccatiSystem(dict(lq.get("coefficients", {})), float(lq.get("q", 1.0)),
                           float(lq.get("qbar", 0.0)), **riccati_keys)
    theta = diffusion_from(lq["theta"], 1, 1, rc.T, "experiment.lq.theta") if "theta" in lq else None
    kw = {}
    if "x_grid" in lq:
        kw["x_grid"] = tuple(float(v) for v in lq["x_grid"])
    return LQConfig(system=system, sigma=float(lq.get("sigma", 0.5)), theta=theta, T=rc.T, M=rc.M, N=rc.N,
                    seed=rc.seed, x0=float(lq.get("x0", 1.0)), substeps=int(lq.get("substeps", 20)),
                    conf=rc.confidence, crn=bool(lq.get("crn", True)), null_reps=int(lq.get("null_reps", 0)),
                    threads=rc.threads, **kw)


EXPERIMENTS = ("bounding", "partitioning", "chain", "lq", "mean-preservation", "marginal-propagation",
               "moment-bound")


def cmd_experiment(rc: RunConfig) -> list[Result]:
    from . import experiments as ex

    sec = rc.section("experiment")
    name = sec.get("name")
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment.name must be one of {EXPERIMENTS}")
    if name in ("bounding", "partitioning", "chain"):
        cfg = _chain_config(rc, sec)
        procs = ex.ChainProcesses(cfg)
        out = []
        if name in ("bounding", "chain"):
            out.append(_chain_result(ex.bounding_experiment(cfg, procs)))
        if name in ("partitioning", "chain"):
            out.append(_chain_result(ex.partitioning_experiment(cfg, procs)))
        return out
    if name == "lq":
        rep = ex.lq_control_experiment(_lq_config(rc, sec))
        cols = ["x0", "value"]
        tables = {"lq_values": (cols, [[x, v] for x, v in zip(rep.value_grid, rep.values)])}
        return [Result("lq-control", rep.passed and rep.margin_positive, rep.to_dict(), tables)]
    if rc.model is None:
        raise ConfigError(f"experiment {name!r} needs a [model] section")
    if name == "mean-preservation":
        rep = ex.mean_preservation_check(rc.model, rc.grid, rc.N, rc.seed, float(sec.get("k", 4.0)),
                                         rc.coupled_init)
        return [Result(rep.kind, rep.passed, rep.to_dict(), {rep.kind: rep.table()})]
    if name == "marginal-propagation":
        rep = ex.marginal_propagation_check(rc.model, rc.grid, rc.N, rc.seed, rc.strikes, rc.confidence,
                                            rc.coupled_init)
        data = rep.to_dict()
        data.pop("verdicts", None)
        return [Result(rep.kind, rep.passed, data, {rep.kind: rep.table()})]
    Ms = sec.get("M_list", [8, 16, 32, 64, 128, 256, 512])
    rep = ex.moment_bound_study(rc.model, rc.N, Ms, float(sec.get("p", rc.model.p)), rc.seed, rc.T,
                                tolerance=float(sec.get("tolerance", 1.5)))
    rows = [[M, m, r] for M, m, r in zip(rep.Ms, rep.moments, rep.ratios)]
    return [Result("moment-bound", rep.passed, rep.to_dict(), {"moment_bound": (["M", "moment", "ratio"], rows)})]


def cmd_validate(rc: RunConfig) -> list[Result]:
    from .validate import ProbeConfig, validate_assumptions

    sec = rc.section("validate")
    probe = ProbeConfig(n_samples=int(sec.get("n_samples", 1000)), box=float(sec.get("box", 2.0)),
                        seed=int(sec.get("seed", rc.seed)), n_atoms=int(sec.get("n_atoms", 6)),
                        T=rc.T, tol=float(sec.get("tol", 1e-9)), d=rc.model.d)
    rep = validate_assumptions(rc.model, probe)
    rows = [[c.name, c.passed, c.worst, c.threshold] for c in rep.checks]
    return [Result("validation", rep.passed, rep.to_dict(),
                   {"validation": (["check", "passed", "worst", "threshold"], rows)})]


HANDLERS = {
    "simulate": cmd_simulate,
    "order-test": cmd_order_test,
    "converge": cmd_converge,
    "dpp-verify": cmd_dpp_verify,
    "experiment": cmd_experiment,
    "validate": cmd_validate,
}


# --------------------------------------------------------------------------
# argument handling


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mkvorder", description="Simulate scaled McKean-Vlasov systems and test convex order.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, metavar="PATH", help="TOML run configuration")
    p.add_argument("--seed", type=_u64, default=None, help="master seed; overrides the config")
    p.add_argument("--out", default=None, metavar="DIR", help="output directory; overrides the config")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV} or 1)")
    p.add_argument("--format", choices=("csv", "json", "both"), default=None, dest="fmt")
    return p


def _threads(flag: int | None) -> int:
    if flag is not None:
        return flag
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            v = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from None
        if v < 1:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return v
    return 1


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        raw = load_toml(args.config)
        needs_model = args.command != "experiment"
        rc = build_run_config(args.command, raw, seed=args.seed, out=args.out, fmt=args.fmt,
                              threads=_threads(args.threads), needs_model=needs_model)
        results = HANDLERS[args.command](rc)
        files = emit_report(results, rc.out_dir, rc.formats, rc.resolved(), rc.seed, args.command)
    except (MkvError, OSError, ValueError, TypeError, KeyError) as exc:
        print(f"mkvorder: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    status = exit_status(results)
    for r in results:
        print(f"{r.name}: {'ok' if r.ok else 'REJECTED'}")
    print(f"wrote {len(files)} file(s) to {rc.out_dir}")
    return status


def main() -> None:
    sys.exit(run())
