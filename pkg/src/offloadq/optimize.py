"""Deadline sweeps, optimal-deadline selection, and strategy comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import analytic, chain
from .errors import DomainError, Unstable
from .params import SystemParams, utility, validate
from .sim import SimConfig, SimResult, Strategy, replicate

DEFAULT_TAU_CAP = 1e5
DEFAULT_GRID_POINTS = 200
DEFAULT_TAU_MIN = 1e-2


@dataclass(frozen=True)
class SweepRow:
    """One deadline evaluated on the analytic path."""

    tau: float
    d: float
    eta: float
    u: float
    flag_oracle_pihat: bool
    flag_multiroot: bool
    unstable: bool = False


@dataclass(frozen=True)
class OptimalDeadline:
    tau_star: float
    u_star: float
    mode: str                   # "paper_procedure" | "full_scan"
    grid_spec: str


@dataclass(frozen=True)
class StrategyComparison:
    """Simulated utilities of the three strategies under one preference."""

    a: float
    tau_star: float
    u_onthespot: float
    u_pure: float
    u_ours: float
    onthespot: SimResult
    pure: SimResult
    ours: SimResult


def default_grid(tau_cap: float = DEFAULT_TAU_CAP,
                 points: int = DEFAULT_GRID_POINTS,
                 tau_min: float = DEFAULT_TAU_MIN) -> np.ndarray:
    """Log-spaced deadline grid with the exact endpoints 0 and tau_cap added."""
    grid = np.concatenate([[0.0], np.logspace(math.log10(tau_min),
                                              math.log10(tau_cap), points), [tau_cap]])
    return np.unique(grid)


def _evaluate_point(params: SystemParams, tau: float, a: float, d_hat: float) -> SweepRow:
    tau = float(tau)
    p = params.with_tau(tau)
    try:
        validate(p)
    except Unstable:
        return SweepRow(tau=tau, d=math.nan, eta=math.nan, u=math.nan,
                        flag_oracle_pihat=False, flag_multiroot=False, unstable=True)
    sol = chain.boundary_solution(p)
    probs = analytic.start_service_probs(p, sol)
    moments = analytic.service_moments(p, probs)
    perf = analytic.performance(p, probs, moments)
    u = utility(min(perf.d, d_hat), d_hat, min(perf.eta, 1.0), a)
    return SweepRow(tau=tau, d=perf.d, eta=perf.eta, u=u,
                    flag_oracle_pihat=probs.oracle_corrected,
                    flag_multiroot=sol.multi_root)


def sweep(params: SystemParams, a: float, grid, d_hat: float | None = None) -> list:
    """Evaluate delay, efficiency, and utility over a deadline grid.

    The normalizing maximal delay is computed once (pass `d_hat` to pin it).
    Deadlines that violate stability produce rows flagged `unstable` with NaN
    metrics rather than fabricated values.
    """
    taus = np.unique(np.asarray(list(grid), dtype=float))
    if taus.size == 0:
        raise DomainError("deadline grid is empty")
    if np.any(taus < 0):
        raise DomainError("deadlines must be >= 0")
    if d_hat is None:
        d_hat = analytic.maximal_mean_delay(params)
    return [_evaluate_point(params, t, a, d_hat) for t in taus]


def optimal_deadline(params: SystemParams, a: float, delta_tau: float = 1.0,
                     tau_cap: float = DEFAULT_TAU_CAP, mode: str = "full_scan",
                     grid=None) -> OptimalDeadline:
    """Deadline maximizing the utility.

    full_scan (default): argmax over a log grid including 0 and tau_cap.
    paper_procedure: climb from 0 in steps of delta_tau, stopping at the
    first deadline that fails to improve the utility.
    """
    if tau_cap > DEFAULT_TAU_CAP:
        raise DomainError(f"tau_cap must be <= {DEFAULT_TAU_CAP}, got {tau_cap}")
    d_hat = analytic.maximal_mean_delay(params)
    if mode == "full_scan":
        taus = default_grid(tau_cap) if grid is None else np.unique(np.asarray(list(grid)))
        rows = sweep(params, a, taus, d_hat=d_hat)
        ok = [r for r in rows if not r.unstable]
        if not ok:
            raise Unstable(params.lam, 0.0, float(taus[0]))
        best = max(ok, key=lambda r: r.u)
        spec = (f"log:{DEFAULT_TAU_MIN}:{tau_cap}:{len(taus)}+endpoints"
                if grid is None else f"explicit:{len(taus)}")
        return OptimalDeadline(tau_star=best.tau, u_star=best.u,
                               mode="full_scan", grid_spec=spec)
    if mode != "paper_procedure":
        raise DomainError(f"unknown mode {mode!r}")
    if delta_tau <= 0:
        raise DomainError(f"delta_tau must be > 0, got {delta_tau}")
    tau, u_prev = 0.0, 0.0
    while True:
        u_here = _evaluate_point(params, tau, a, d_hat).u
        if not (u_here > u_prev) or tau >= tau_cap:
            return OptimalDeadline(tau_star=tau, u_star=u_here,
                                   mode="paper_procedure",
                                   grid_spec=f"linear:delta={delta_tau}:cap={tau_cap}")
        u_prev = u_here
        tau = min(tau + delta_tau, tau_cap)


def compare_strategies(params: SystemParams, a: float, sim_config: SimConfig,
                       tau_cap: float = DEFAULT_TAU_CAP) -> StrategyComparison:
    """Simulate on-the-spot, pure, and the deadline strategy at the selected
    optimal deadline; all utilities share the analytic maximal-delay norm."""
    d_hat = analytic.maximal_mean_delay(params)
    opt = optimal_deadline(params, a, tau_cap=tau_cap, mode="full_scan")
    spot = replicate(replace(sim_config, params=params,
                             strategy=Strategy.ON_THE_SPOT), a=a, d_hat=d_hat)
    pure = replicate(replace(sim_config, params=params,
                             strategy=Strategy.PURE), a=a, d_hat=d_hat)
    ours = replicate(replace(sim_config, params=params.with_tau(opt.tau_star),
                             strategy=Strategy.DEADLINE), a=a, d_hat=d_hat)
    return StrategyComparison(
        a=a, tau_star=opt.tau_star,
        u_onthespot=spot.utility, u_pure=pure.utility, u_ours=ours.utility,
        onthespot=spot, pure=pure, ours=ours,
    )
