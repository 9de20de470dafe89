"""Command-line front end: analyze, simulate, sweep, optimize, compare, validate."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import analytic, chain, optimize, plotting
from .errors import GridParseError, OffloadError
from .params import SystemParams, validate
from .sim import HotspotModel, SimConfig, Strategy, replicate, run

log = logging.getLogger("offloadq")

ANALYTIC_REL_TOL = 0.005     # pairwise tolerance for the closed-form paths
SIM_REL_TOL = 0.03           # simulation against the structured form


def parse_grid(spec: str) -> np.ndarray:
    """Parse "lin:<start>:<end>:<count>" / "log:<start>:<end>:<count>"."""
    parts = spec.split(":")
    if len(parts) != 4:
        raise GridParseError(f"grid spec needs 4 fields, got {spec!r}")
    kind, s_start, s_end, s_count = parts
    if kind not in ("lin", "log"):
        raise GridParseError(f"unknown grid kind {kind!r}")
    try:
        start, end = float(s_start), float(s_end)
    except ValueError as exc:
        raise GridParseError(f"bad grid bound in {spec!r}: {exc}") from None
    try:
        count = int(s_count)
    except ValueError:
        raise GridParseError(f"bad grid count {s_count!r}") from None
    if count < 2:
        raise GridParseError(f"grid count must be >= 2, got {count}")
    if end < start:
        raise GridParseError(f"grid end {end} below start {start}")
    if kind == "lin":
        return np.linspace(start, end, count)
    if start <= 0:
        raise GridParseError(f"log start must be > 0, got {start}")
    return np.logspace(math.log10(start), math.log10(end), count)


def _parse_tau(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def _parse_hotspot(text: str) -> HotspotModel:
    if text == "fixed":
        return HotspotModel()
    if text.startswith("uniform:"):
        _, lo, hi = text.split(":")
        return HotspotModel("uniform", float(lo), float(hi))
    raise GridParseError(f"hotspot must be 'fixed' or 'uniform:lo:hi', got {text!r}")


def _load_params(args) -> SystemParams:
    params = SystemParams.from_json(args.config)
    if getattr(args, "tau", None) is not None:
        params = params.with_tau(_parse_tau(args.tau))
    return params


def _emit(args, text: str, render=None):
    """Write `text` to --out or stdout; `render(figpath)` draws the figure."""
    if args.out in (None, "-"):
        sys.stdout.write(text)
        return
    with open(args.out, "w") as fh:
        fh.write(text)
    if render is not None and not getattr(args, "no_plot", False):
        figpath = plotting.figure_path(args.out)
        render(figpath)
        log.info("figure written to %s", figpath)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    def coerce(o):
        if isinstance(o, np.generic):
            return o.item()
        raise TypeError(f"not JSON serializable: {type(o)}")
    return json.dumps(obj, indent=2, default=coerce) + "\n"


def _sim_config(args, params, strategy=Strategy.DEADLINE) -> SimConfig:
    return SimConfig(
        params=params,
        strategy=strategy,
        deadline_kind={"exp": "exponential", "det": "deterministic"}[args.deadline_kind],
        target_frames=args.frames if args.horizon is None else None,
        horizon_s=args.horizon,
        seed=args.seed,
        replications=args.replications,
        hotspot=_parse_hotspot(args.hotspot),
        collect_trace=bool(getattr(args, "trace", None)),
    )


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args) -> int:
    params = validate(_load_params(args))
    perf, probs, moments, sol = analytic.analyze(params)
    out = {
        "tau_s": "inf" if math.isinf(params.tau) else params.tau,
        "delay_s": perf.d,
        "eta": perf.eta,
        "d_hat_s": perf.d_hat,
        "waiting_s": perf.w,
        "mean_service_s": moments.et,
        "pihat": [probs.pihat0, probs.pihat1, probs.pihat2],
        "pihat_uncorrected": list(probs.uncorrected),
        "flag_oracle_pihat": probs.oracle_corrected,
        "flag_multiroot": bool(sol.multi_root) if sol is not None else False,
    }
    _emit(args, _json_text(out))
    return 0


def cmd_sweep(args) -> int:
    params = _load_params(args)
    grid = parse_grid(args.grid)
    rows = optimize.sweep(params, args.a, grid)
    text = _csv(
        ("tau_s", "delay_s", "eta", "utility", "flag_oracle_pihat", "flag_multiroot"),
        [(r.tau, r.d, r.eta, r.u, r.flag_oracle_pihat, r.flag_multiroot) for r in rows],
    )
    _emit(args, text, render=lambda p: plotting.save_sweep_figure(rows, args.a, p))
    return 0


def cmd_optimize(args) -> int:
    params = _load_params(args)
    mode = {"scan": "full_scan", "paper": "paper_procedure"}[args.mode]
    opt = optimize.optimal_deadline(params, args.a, delta_tau=args.delta_tau,
                                    tau_cap=args.tau_cap, mode=mode)
    _emit(args, _json_text({
        "tau_star_s": opt.tau_star, "u_star": opt.u_star,
        "mode": opt.mode, "grid": opt.grid_spec,
    }))
    return 0


def cmd_simulate(args) -> int:
    params = _load_params(args)
    strategy = Strategy(args.strategy)
    cfg = _sim_config(args, params, strategy)
    if args.trace:
        single = run(cfg)
        if single.trace is not None:
            text = _csv(("arrival_s", "start_s", "depart_s", "wifi_work_fraction"),
                        [tuple(row) for row in single.trace])
            with open(args.trace, "w") as fh:
                fh.write(text)
            log.info("trace written to %s", args.trace)
    result = replicate(cfg)
    _emit(args, _json_text(result.to_json()))
    return 0


def cmd_compare(args) -> int:
    params = _load_params(args)
    a_values = parse_grid(args.grid) if args.grid else np.array([args.a])
    cfg = _sim_config(args, params)
    records = [optimize.compare_strategies(params, float(a), cfg) for a in a_values]
    text = _csv(("a", "U_onthespot", "U_pure", "U_ours", "tau_star"),
                [(r.a, r.u_onthespot, r.u_pure, r.u_ours, r.tau_star) for r in records])
    _emit(args, text, render=lambda p: plotting.save_compare_figure(records, p))
    return 0


def cmd_validate(args) -> int:
    params = validate(_load_params(args))
    if math.isinf(params.tau):
        raise OffloadError("validate needs a finite deadline")
    sol = chain.boundary_solution(params)
    probs = analytic.start_service_probs(params, sol)
    moments = analytic.service_moments(params, probs)
    perf = analytic.performance(params, probs, moments)
    d_structured = perf.d
    d_genfunc = chain.numeric_mean_delay(params, sol)
    oracle = chain.truncated_chain_oracle(params, n_levels=args.levels,
                                          tail_bound=args.tail_bound,
                                          max_levels=args.max_levels)
    d_oracle = oracle.delay
    cfg = _sim_config(args, params)
    simr = replicate(cfg)
    d_sim = simr.mean_delay

    def rel(x, y):
        return abs(x - y) / max(abs(x), abs(y))

    checks = {
        "structured_vs_genfunc": rel(d_structured, d_genfunc) <= ANALYTIC_REL_TOL,
        "structured_vs_oracle": rel(d_structured, d_oracle) <= ANALYTIC_REL_TOL,
        "genfunc_vs_oracle": rel(d_genfunc, d_oracle) <= ANALYTIC_REL_TOL,
        "sim_vs_structured": (rel(d_sim, d_structured) <= SIM_REL_TOL
                              or abs(d_sim - d_structured) <= simr.delay_ci),
    }
    report = {
        "tau_s": params.tau,
        "delay_structured_s": d_structured,
        "delay_genfunc_s": d_genfunc,
        "delay_oracle_s": d_oracle,
        "delay_sim_s": d_sim,
        "sim_ci_s": simr.delay_ci,
        "oracle_levels": oracle.n_levels,
        "oracle_tail_mass": oracle.tail_mass,
        "rel_structured_vs_genfunc": rel(d_structured, d_genfunc),
        "rel_structured_vs_oracle": rel(d_structured, d_oracle),
        "rel_sim_vs_structured": rel(d_sim, d_structured),
        "tolerance_analytic": ANALYTIC_REL_TOL,
        "tolerance_sim": SIM_REL_TOL,
        "checks": checks,
        "pass": all(checks.values()),
    }
    _emit(args, _json_text(report))
    return 0 if report["pass"] else 2


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="offloadq",
        description="Deadline-based Wi-Fi offloading: analysis, simulation, optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sim=False):
        p.add_argument("--config", required=True, help="parameter JSON file")
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--tau", default=None, help="override deadline, seconds or 'inf'")
        if sim:
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--replications", type=int, default=20)
            p.add_argument("--frames", type=int, default=500_000,
                           help="expected arrivals per replication")
            p.add_argument("--horizon", type=float, default=None,
                           help="simulated seconds (overrides --frames)")
            p.add_argument("--deadline-kind", choices=("exp", "det"), default="exp",
                           dest="deadline_kind")
            p.add_argument("--hotspot", default="fixed",
                           help="'fixed' or 'uniform:lo_fps:hi_fps'")

    p = sub.add_parser("analyze", help="closed-form delay/efficiency at one deadline")
    common(p)
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("sweep", help="analytic sweep over a deadline grid (CSV)")
    common(p)
    p.add_argument("--a", type=float, required=True, help="preference weight in [0,1]")
    p.add_argument("--grid", required=True, help="lin:<s>:<e>:<n> or log:<s>:<e>:<n>")
    p.add_argument("--no-plot", action="store_true", help="skip the figure")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("optimize", help="optimal deadline for a preference weight")
    common(p)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--mode", choices=("scan", "paper"), default="scan")
    p.add_argument("--delta-tau", type=float, default=1.0, dest="delta_tau")
    p.add_argument("--tau-cap", type=float, default=optimize.DEFAULT_TAU_CAP,
                   dest="tau_cap")
    p.set_defaults(handler=cmd_optimize)

    p = sub.add_parser("simulate", help="discrete-event simulation (JSON result)")
    common(p, sim=True)
    p.add_argument("--strategy", choices=[s.value for s in Strategy],
                   default=Strategy.DEADLINE.value)
    p.add_argument("--trace", default=None, help="write per-frame trace CSV here")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("compare", help="simulated utilities of the three strategies")
    common(p, sim=True)
    p.add_argument("--a", type=float, default=0.5, help="single preference weight")
    p.add_argument("--grid", default=None, help="grid of a values, e.g. lin:0:1:11")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("validate", help="cross-path delay agreement report")
    common(p, sim=True)
    p.add_argument("--levels", type=int, default=5000, help="initial truncation level")
    p.add_argument("--tail-bound", type=float, default=1e-10, dest="tail_bound")
    p.add_argument("--max-levels", type=int, default=1_000_000, dest="max_levels")
    p.set_defaults(handler=cmd_validate)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("OFFLOAD_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except OffloadError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
