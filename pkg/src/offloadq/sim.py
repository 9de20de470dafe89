"""Discrete-event simulation of the modulated offloading queue.

The service-state process (deferred / cellular / Wi-Fi) evolves autonomously,
so a replication is computed by (1) sampling the state trajectory, (2) mapping
arrival times onto the cumulative service-capacity curve, (3) running the
FIFO running-max recursion on the capacity axis, and (4) inverting the curve
for departure times.  Each frame carries an explicit exponential work
requirement (mean one frame), which keeps the Wi-Fi work accounting exact
under per-hotspot variable rates.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from dataclasses import replace as dataclasses_replace

import numpy as np
from scipy import stats as _stats

from .errors import ConfigError, Unstable
from .params import SystemParams, capacity


class Strategy(str, enum.Enum):
    ON_THE_SPOT = "onthespot"   # switch to cellular immediately on Wi-Fi loss
    PURE = "pure"               # wait for the next hotspot, never use cellular
    DEADLINE = "deadline"       # wait up to the deadline, then use cellular


@dataclass(frozen=True)
class HotspotModel:
    """Wi-Fi rate model: fixed mu2, or uniform per connection period."""

    kind: str = "fixed"         # "fixed" | "uniform"
    lo_fps: float = 0.0
    hi_fps: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform"):
            raise ConfigError(f"unknown hotspot model {self.kind!r}")
        if self.kind == "uniform" and not (0.0 < self.lo_fps <= self.hi_fps):
            raise ConfigError(
                f"uniform hotspot needs 0 < lo <= hi, got [{self.lo_fps}, {self.hi_fps}]")

    def to_json(self):
        if self.kind == "fixed":
            return {"kind": "fixed"}
        return {"kind": "uniform", "lo_fps": self.lo_fps, "hi_fps": self.hi_fps}

    @classmethod
    def from_json(cls, obj):
        if obj is None or obj.get("kind", "fixed") == "fixed":
            return cls()
        return cls("uniform", float(obj["lo_fps"]), float(obj["hi_fps"]))


@dataclass(frozen=True)
class SimConfig:
    params: SystemParams
    strategy: Strategy = Strategy.DEADLINE
    deadline_kind: str = "exponential"      # "exponential" | "deterministic"
    horizon_s: float | None = None          # simulated seconds, or
    target_frames: int | None = None        # expected arrivals (horizon = n/lam)
    warmup_fraction: float = 0.1
    seed: int = 0
    replications: int = 20
    hotspot: HotspotModel = field(default_factory=HotspotModel)
    collect_trace: bool = False

    def __post_init__(self):
        if self.deadline_kind not in ("exponential", "deterministic"):
            raise ConfigError(f"unknown deadline kind {self.deadline_kind!r}")
        if not (0.0 <= self.warmup_fraction < 1.0):
            raise ConfigError(f"warmup fraction must be in [0,1), got {self.warmup_fraction}")
        if self.replications < 1:
            raise ConfigError("need at least one replication")
        if (self.horizon_s is None) == (self.target_frames is None):
            raise ConfigError("give exactly one of horizon_s / target_frames")
        if self.horizon_s is not None and self.horizon_s <= 0:
            raise ConfigError(f"horizon must be > 0, got {self.horizon_s}")
        if self.target_frames is not None and self.target_frames < 1:
            raise ConfigError(f"target_frames must be >= 1, got {self.target_frames}")

    @property
    def horizon(self) -> float:
        if self.horizon_s is not None:
            return float(self.horizon_s)
        return self.target_frames / self.params.lam

    @property
    def effective_tau(self) -> float:
        if self.strategy is Strategy.ON_THE_SPOT:
            return 0.0
        if self.strategy is Strategy.PURE:
            return math.inf
        return self.params.tau

    def to_json(self):
        return {
            "params": self.params.to_json(),
            "strategy": self.strategy.value,
            "deadline_kind": self.deadline_kind,
            "horizon_s": self.horizon_s,
            "target_frames": self.target_frames,
            "warmup_fraction": self.warmup_fraction,
            "seed": self.seed,
            "replications": self.replications,
            "hotspot": self.hotspot.to_json(),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            params=SystemParams.from_json(obj["params"]),
            strategy=Strategy(obj.get("strategy", "deadline")),
            deadline_kind=obj.get("deadline_kind", "exponential"),
            horizon_s=obj.get("horizon_s"),
            target_frames=obj.get("target_frames"),
            warmup_fraction=obj.get("warmup_fraction", 0.1),
            seed=obj.get("seed", 0),
            replications=obj.get("replications", 20),
            hotspot=HotspotModel.from_json(obj.get("hotspot")),
        )


@dataclass(frozen=True)
class SimResult:
    """Simulated performance; CI halfwidths are 95% t-intervals over reps."""

    mean_delay: float
    delay_ci: float
    eta: float
    eta_ci: float
    p00_est: float
    busy_fractions: tuple
    state_fractions: tuple
    frames_served: int
    mean_queue_len: float
    work_served_frames: float
    work_served_segments: float
    unstable: bool
    replications: int
    rep_delays: tuple = ()
    rep_etas: tuple = ()
    utility: float | None = None
    utility_ci: float | None = None
    trace: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_json(self):
        return {
            "mean_delay_s": self.mean_delay,
            "delay_ci_s": self.delay_ci,
            "eta": self.eta,
            "eta_ci": self.eta_ci,
            "p00_est": self.p00_est,
            "busy_fractions": list(self.busy_fractions),
            "state_fractions": list(self.state_fractions),
            "frames_served": self.frames_served,
            "mean_queue_len": self.mean_queue_len,
            "utility": self.utility,
            "utility_ci": self.utility_ci,
            "unstable": self.unstable,
            "replications": self.replications,
            "rep_delays_s": list(self.rep_delays),
            "rep_etas": list(self.rep_etas),
        }


# ---------------------------------------------------------------------------
# trajectory generation


def _draw_cycles(rngs, cfg: SimConfig, n_cycles: int):
    """Durations and rates for n_cycles of (F period, C period)."""
    p = cfg.params
    f_dur = rngs["channel"].exponential(1.0 / p.r_f, n_cycles)
    c_dur = rngs["channel"].exponential(1.0 / p.r_c, n_cycles)
    tau = cfg.effective_tau
    if tau == 0.0:
        dead = np.zeros(n_cycles)
    elif math.isinf(tau):
        dead = np.full(n_cycles, math.inf)
    elif cfg.deadline_kind == "deterministic":
        dead = np.full(n_cycles, tau)
    else:
        dead = rngs["deadline"].exponential(tau, n_cycles)
    if cfg.hotspot.kind == "uniform":
        wifi_rate = rngs["hotspot"].uniform(cfg.hotspot.lo_fps, cfg.hotspot.hi_fps, n_cycles)
    else:
        wifi_rate = np.full(n_cycles, p.mu2)
    return f_dur, c_dur, dead, wifi_rate


def _cycles_to_segments(p: SystemParams, f_dur, c_dur, dead, wifi_rate):
    """Interleave (Wi-Fi, deferred, cellular) segments, dropping empty ones."""
    n = len(f_dur)
    durs = np.empty((n, 3))
    rates = np.empty((n, 3))
    durs[:, 0] = f_dur
    durs[:, 1] = np.minimum(dead, c_dur)
    durs[:, 2] = np.maximum(c_dur - dead, 0.0)
    rates[:, 0] = wifi_rate
    rates[:, 1] = 0.0
    rates[:, 2] = p.mu1
    states = np.tile(np.array([2, 0, 1]), (n, 1))
    keep = durs.ravel() > 0.0
    return durs.ravel()[keep], states.ravel()[keep], rates.ravel()[keep]


class _Trajectory:
    """Growable service-state trajectory with its cumulative capacity curve."""

    def __init__(self, rngs, cfg: SimConfig):
        self.rngs = rngs
        self.cfg = cfg
        self.dur = np.empty(0)
        self.state = np.empty(0, dtype=int)
        self.rate = np.empty(0)

    def extend_to_time(self, t_target: float):
        p = self.cfg.params
        cycle_mean = 1.0 / p.r_c + 1.0 / p.r_f
        while self.dur.sum() < t_target:
            need = max(t_target - self.dur.sum(), cycle_mean)
            n_cyc = int(need / cycle_mean * 1.25) + 16
            d, s, r = _cycles_to_segments(p, *_draw_cycles(self.rngs, self.cfg, n_cyc))
            self.dur = np.concatenate([self.dur, d])
            self.state = np.concatenate([self.state, s])
            self.rate = np.concatenate([self.rate, r])

    def extend_to_capacity(self, cap_target: float, t_limit: float):
        while True:
            self._refresh()
            if self.cap_end[-1] >= cap_target or self.t_end[-1] >= t_limit:
                return
            self.extend_to_time(self.t_end[-1] * 1.5 + 1.0)

    def _refresh(self):
        self.t0 = np.concatenate([[0.0], np.cumsum(self.dur)[:-1]])
        self.t_end = self.t0 + self.dur
        seg_cap = self.rate * self.dur
        self.cap0 = np.concatenate([[0.0], np.cumsum(seg_cap)[:-1]])
        self.cap_end = self.cap0 + seg_cap

    def capacity_at(self, t):
        """Cumulative service capacity at times t."""
        i = np.clip(np.searchsorted(self.t0, t, side="right") - 1, 0, len(self.dur) - 1)
        return self.cap0[i] + self.rate[i] * (np.asarray(t) - self.t0[i])

    def time_at_capacity(self, v):
        """First time the cumulative capacity reaches v (v within range)."""
        i = np.clip(np.searchsorted(self.cap_end, v, side="right"), 0, len(self.dur) - 1)
        return self.t0[i] + (np.asarray(v) - self.cap0[i]) / self.rate[i]

    def state_time_cum(self, state: int, t):
        """Total time spent in `state` up to each time in t."""
        t = np.asarray(t, dtype=float)
        mask = (self.state == state).astype(float)
        cum = np.concatenate([[0.0], np.cumsum(self.dur * mask)[:-1]])
        i = np.clip(np.searchsorted(self.t0, t, side="right") - 1, 0, len(self.dur) - 1)
        return cum[i] + mask[i] * np.clip(t - self.t0[i], 0.0, self.dur[i])


def _interval_measure(starts, ends, at):
    """Cumulative measure of the union of disjoint sorted [start, end) at `at`."""
    widths = ends - starts
    cum = np.concatenate([[0.0], np.cumsum(widths)])
    i = np.searchsorted(starts, at, side="right") - 1
    out = np.where(i >= 0, cum[np.maximum(i, 0)], 0.0)
    inside = np.clip(np.asarray(at) - np.where(i >= 0, starts[np.maximum(i, 0)], 0.0),
                     0.0, np.where(i >= 0, widths[np.maximum(i, 0)], 0.0))
    return out + np.where(i >= 0, inside, 0.0)


@dataclass
class _RepStats:
    mean_delay: float
    eta: float
    p00_est: float
    busy_fractions: tuple
    state_fractions: tuple
    frames_served: int
    mean_queue_len: float
    work_served_frames: float
    work_served_segments: float
    censored: int
    trace: np.ndarray | None


def _simulate_once(cfg: SimConfig, seed_seq: np.random.SeedSequence) -> _RepStats:
    p = cfg.params
    children = seed_seq.spawn(5)
    names = ("arrivals", "work", "channel", "deadline", "hotspot")
    rngs = {n: np.random.default_rng(s) for n, s in zip(names, children)}

    horizon = cfg.horizon
    warm = cfg.warmup_fraction * horizon

    traj = _Trajectory(rngs, cfg)
    traj.extend_to_time(horizon)

    # Poisson arrivals on [0, horizon)
    gaps = rngs["arrivals"].exponential(1.0 / p.lam, int(p.lam * horizon * 1.02) + 64)
    arr = np.cumsum(gaps)
    while arr[-1] < horizon:
        more = rngs["arrivals"].exponential(1.0 / p.lam, max(64, int(0.05 * len(gaps))))
        arr = np.concatenate([arr, arr[-1] + np.cumsum(more)])
    arr = arr[arr < horizon]
    n = len(arr)
    if n == 0:
        raise ConfigError("horizon too short: no arrivals")
    work = rngs["work"].exponential(1.0, n)

    traj._refresh()
    b = traj.capacity_at(arr)               # capacity level seen on arrival
    cs = np.cumsum(work)
    m = np.maximum.accumulate(b - (cs - work))
    v = cs + m                              # capacity level at departure
    x = v - work                            # capacity level at start of service

    # extend the trajectory so every frame can depart (drain after the horizon)
    traj.extend_to_capacity(v[-1] * (1.0 + 1e-12), t_limit=100.0 * horizon)
    served = v <= traj.cap_end[-1]
    k_served = int(np.count_nonzero(served))
    censored = n - k_served
    dep = np.full(n, math.inf)
    if k_served:
        dep[:k_served] = traj.time_at_capacity(v[:k_served])

    in_window = arr >= warm
    delays = dep[in_window & served] - arr[in_window & served]
    mean_delay = float(delays.mean()) if len(delays) else math.nan

    # time-average number in system over [warm, horizon]
    span = horizon - warm
    qint = np.clip(np.minimum(dep, horizon) - np.maximum(arr, warm), 0.0, None).sum()
    mean_q = float(qint) / span

    # empty periods: after each departure that beats the next arrival
    dep_s = dep[:k_served]
    nxt = np.concatenate([arr[1:k_served + 1],
                          [horizon] * (1 if k_served == n else 0)])
    e_starts = np.concatenate([[0.0], dep_s[:len(nxt)]])
    e_ends = np.concatenate([[arr[0]], nxt])
    good = e_ends > e_starts
    e_starts, e_ends = e_starts[good], e_ends[good]

    def empty_within(state, lo, hi):
        if len(e_starts) == 0:
            return 0.0
        a = np.clip(e_starts, lo, hi)
        bnd = np.clip(e_ends, lo, hi)
        return (traj.state_time_cum(state, bnd) - traj.state_time_cum(state, a)).sum()

    state_time = {j: float(traj.state_time_cum(j, horizon) - traj.state_time_cum(j, warm))
                  for j in (0, 1, 2)}
    empty_time = {j: float(empty_within(j, warm, horizon)) for j in (0, 1, 2)}
    p00_est = empty_time[0] / span
    busy = tuple((state_time[j] - empty_time[j]) / span for j in (0, 1, 2))
    fractions = tuple(state_time[j] / span for j in (0, 1, 2))

    def work_by_state(lo, hi):
        seg_lo = np.clip(traj.t0, lo, hi)
        seg_hi = np.clip(traj.t_end, lo, hi)
        seg_len = seg_hi - seg_lo
        if len(e_starts):
            seg_empty = (_interval_measure(e_starts, e_ends, seg_hi)
                         - _interval_measure(e_starts, e_ends, seg_lo))
        else:
            seg_empty = np.zeros_like(seg_len)
        busy_len = seg_len - seg_empty
        out = np.zeros(3)
        for j in (0, 1, 2):
            sel = traj.state == j
            out[j] = float((traj.rate[sel] * busy_len[sel]).sum())
        return out

    w_window = work_by_state(warm, horizon)
    eta = w_window[2] / w_window.sum() if w_window.sum() > 0 else math.nan

    # conservation check over [0, horizon], from both sides: per-frame service
    # intervals clipped at the horizon capacity vs busy-time capacity by segment
    w_full = work_by_state(0.0, horizon)
    cap_h = float(traj.capacity_at(horizon))
    frame_side = float(np.clip(np.minimum(v, cap_h) - x, 0.0, None).sum())

    trace = None
    if cfg.collect_trace and k_served:
        start = np.maximum(arr[:k_served], np.concatenate([[0.0], dep_s[:-1]]))
        wifi_cum = _wifi_capacity_cum(traj)
        wifi_frac = (np.interp(v[:k_served], traj.cap_knots, wifi_cum)
                     - np.interp(x[:k_served], traj.cap_knots, wifi_cum)) / work[:k_served]
        trace = np.column_stack([arr[:k_served], start, dep_s, wifi_frac])

    return _RepStats(
        mean_delay=mean_delay, eta=float(eta), p00_est=float(p00_est),
        busy_fractions=busy, state_fractions=fractions,
        frames_served=k_served, mean_queue_len=mean_q,
        work_served_frames=frame_side, work_served_segments=float(w_full.sum()),
        censored=censored, trace=trace,
    )


def _wifi_capacity_cum(traj: _Trajectory):
    """Cumulative Wi-Fi capacity as a function of total capacity (knot values)."""
    seg_cap = traj.rate * traj.dur
    wifi_cap = np.where(traj.state == 2, seg_cap, 0.0)
    traj.cap_knots = np.concatenate([[0.0], np.cumsum(seg_cap)])
    return np.concatenate([[0.0], np.cumsum(wifi_cap)])


def _check_stability(cfg: SimConfig) -> bool:
    """True when stable; raises for unstable non-Pure runs (Pure is warn-only)."""
    p = cfg.params
    cap = capacity(p.with_tau(cfg.effective_tau))
    if p.lam < cap:
        return True
    if cfg.strategy is Strategy.PURE:
        return False
    raise Unstable(p.lam, cap, cfg.effective_tau)


def run(config: SimConfig, replication: int = 0) -> SimResult:
    """Single replication; `replication` selects the spawned seed (default 0)."""
    stable = _check_stability(config)
    if not (0 <= replication < config.replications):
        raise ConfigError(f"replication index {replication} out of range")
    root = np.random.SeedSequence(config.seed)
    st = _simulate_once(config, root.spawn(config.replications)[replication])
    return SimResult(
        mean_delay=st.mean_delay, delay_ci=0.0, eta=st.eta, eta_ci=0.0,
        p00_est=st.p00_est, busy_fractions=st.busy_fractions,
        state_fractions=st.state_fractions,
        frames_served=st.frames_served, mean_queue_len=st.mean_queue_len,
        work_served_frames=st.work_served_frames,
        work_served_segments=st.work_served_segments,
        unstable=not stable, replications=1,
        rep_delays=(st.mean_delay,), rep_etas=(st.eta,), trace=st.trace,
    )


def replicate(config: SimConfig, a: float | None = None,
              d_hat: float | None = None) -> SimResult:
    """Run all replications and aggregate with 95% t-intervals.

    When both `a` and `d_hat` are given, per-replication utilities are scored
    and aggregated as well.
    """
    stable = _check_stability(config)
    if config.collect_trace:
        config = dataclasses_replace(config, collect_trace=False)
    root = np.random.SeedSequence(config.seed)
    seqs = root.spawn(config.replications)
    stats = [_simulate_once(config, s) for s in seqs]
    r = len(stats)

    def ci(vals):
        if r < 2:
            return 0.0
        return float(_stats.t.ppf(0.975, r - 1) * np.std(vals, ddof=1) / math.sqrt(r))

    delays = np.array([s.mean_delay for s in stats])
    etas = np.array([s.eta for s in stats])
    utility = utility_ci = None
    if a is not None and d_hat is not None:
        us = 1.0 - a * delays / d_hat - (1.0 - a) * (1.0 - etas)
        utility, utility_ci = float(us.mean()), ci(us)
    return SimResult(
        mean_delay=float(delays.mean()), delay_ci=ci(delays),
        eta=float(etas.mean()), eta_ci=ci(etas),
        p00_est=float(np.mean([s.p00_est for s in stats])),
        busy_fractions=tuple(np.mean([s.busy_fractions for s in stats], axis=0)),
        state_fractions=tuple(np.mean([s.state_fractions for s in stats], axis=0)),
        frames_served=int(sum(s.frames_served for s in stats)),
        mean_queue_len=float(np.mean([s.mean_queue_len for s in stats])),
        work_served_frames=float(sum(s.work_served_frames for s in stats)),
        work_served_segments=float(sum(s.work_served_segments for s in stats)),
        unstable=not stable, replications=r,
        rep_delays=tuple(delays), rep_etas=tuple(etas),
        utility=utility, utility_ci=utility_ci,
    )
