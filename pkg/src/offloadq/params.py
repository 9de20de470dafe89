"""Model parameters, stationary service-state quantities, and the utility function.

The service process has three states driven by the wireless channel and the
deadline timer:

    state 0  deferred  (rate 0; waiting for Wi-Fi or for the deadline to expire)
    state 1  cellular  (rate mu1)
    state 2  Wi-Fi     (rate mu2)

Channel state C (cellular-only coverage) lasts Exp(1/r_c) on average, channel
state F (Wi-Fi available) lasts Exp(1/r_f).  The deadline timer is exponential
with mean tau; `tau = 0` and `tau = math.inf` are first-class values and every
derived quantity below is evaluated at its finite limit for them.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .errors import DomainError, NonPositiveRate, Unstable

INF = math.inf

#: JSON field names for a parameter object, all rates in frames/s, times in s.
_JSON_FIELDS = ("lambda_fps", "mu1_fps", "mu2_fps", "mean_c_s", "mean_f_s", "tau_s")


@dataclass(frozen=True)
class SystemParams:
    """Full parameterization of the offloading model.

    lam    frame arrival rate (frames/s)
    mu1    cellular service rate (frames/s)
    mu2    Wi-Fi service rate (frames/s)
    r_c    exit rate of channel state C (1/s; 1/mean C-duration)
    r_f    exit rate of channel state F (1/s)
    tau    mean deadline (s), 0 <= tau <= inf
    """

    lam: float
    mu1: float
    mu2: float
    r_c: float
    r_f: float
    tau: float

    @classmethod
    def from_means(cls, lam, mu1, mu2, mean_c, mean_f, tau) -> "SystemParams":
        """Build from mean channel-state durations instead of exit rates."""
        if mean_c <= 0 or mean_f <= 0:
            raise NonPositiveRate(f"mean durations must be > 0: {mean_c}, {mean_f}")
        return cls(lam, mu1, mu2, 1.0 / mean_c, 1.0 / mean_f, float(tau))

    @classmethod
    def from_json(cls, obj) -> "SystemParams":
        """Parse a parameter object; `obj` is a dict, JSON text, or a file path.

        Expected keys: lambda_fps, mu1_fps, mu2_fps, mean_c_s, mean_f_s, tau_s.
        "tau_s" accepts the string "inf".
        """
        if isinstance(obj, (str, bytes)):
            text = str(obj)
            if "{" not in text:
                with open(text) as fh:
                    obj = json.load(fh)
            else:
                obj = json.loads(text)
        missing = [k for k in _JSON_FIELDS if k not in obj]
        if missing:
            raise DomainError(f"parameter object missing keys: {missing}")
        tau = obj["tau_s"]
        if isinstance(tau, str):
            if tau.strip().lower() not in ("inf", "infinity"):
                raise DomainError(f"tau_s must be a number or 'inf', got {tau!r}")
            tau = INF
        return cls.from_means(
            float(obj["lambda_fps"]), float(obj["mu1_fps"]), float(obj["mu2_fps"]),
            float(obj["mean_c_s"]), float(obj["mean_f_s"]), float(tau),
        )

    def to_json(self) -> dict:
        tau = "inf" if math.isinf(self.tau) else self.tau
        return {
            "lambda_fps": self.lam, "mu1_fps": self.mu1, "mu2_fps": self.mu2,
            "mean_c_s": 1.0 / self.r_c, "mean_f_s": 1.0 / self.r_f, "tau_s": tau,
        }

    def with_tau(self, tau: float) -> "SystemParams":
        return replace(self, tau=float(tau))


@dataclass(frozen=True)
class DerivedQuantities:
    """Stationary quantities implied by a parameter set.

    R        Wi-Fi availability ratio, r_c/(r_c + r_f)
    f01..f20 modulation transition rates between service states (1/s)
    pi0..pi2 stationary service-state probabilities (sum to 1 exactly)
    mu_hat   capacity pi1*mu1 + pi2*mu2 (frames/s), nonincreasing in tau
    """

    R: float
    f01: float
    f02: float
    f12: float
    f20: float
    pi0: float
    pi1: float
    pi2: float
    mu_hat: float

    @property
    def pis(self):
        return (self.pi0, self.pi1, self.pi2)


@dataclass(frozen=True)
class Preference:
    """User preference weight: a=1 cares only about delay, a=0 only about cost."""

    a: float

    def __post_init__(self):
        if not (0.0 <= self.a <= 1.0):
            raise DomainError(f"preference weight must be in [0,1], got {self.a}")


def validate(params: SystemParams) -> SystemParams:
    """Return `params` unchanged iff all invariants hold.

    Raises NonPositiveRate for bad rates, Unstable when the arrival rate is
    not strictly below the capacity at this deadline.
    """
    for name in ("lam", "mu1", "mu2", "r_c", "r_f"):
        v = getattr(params, name)
        if not (v > 0) or math.isinf(v) or math.isnan(v):
            raise NonPositiveRate(f"{name} must be a positive finite rate, got {v}")
    if not (params.tau >= 0) or math.isnan(params.tau):
        raise NonPositiveRate(f"tau must be >= 0, got {params.tau}")
    cap = capacity(params)
    if not (params.lam < cap):
        raise Unstable(params.lam, cap, params.tau)
    return params


def derived_quantities(params: SystemParams) -> DerivedQuantities:
    """Stationary service-state probabilities, transition rates, and capacity."""
    r_c, r_f, tau = params.r_c, params.r_f, params.tau
    R = r_c / (r_c + r_f)
    pi2 = R
    if math.isinf(tau):
        pi1 = 0.0
        f01 = 0.0
    else:
        x = r_c * tau
        pi1 = (1.0 - R) / (x + 1.0)
        f01 = INF if tau == 0 else 1.0 / tau
    # complement form keeps the three probabilities summing to one exactly
    pi0 = 1.0 - (pi1 + pi2)
    mu_hat = pi1 * params.mu1 + pi2 * params.mu2
    return DerivedQuantities(
        R=R, f01=f01, f02=r_c, f12=r_c, f20=r_f,
        pi0=pi0, pi1=pi1, pi2=pi2, mu_hat=mu_hat,
    )


def capacity(params: SystemParams) -> float:
    """Service capacity mu_hat(tau) in frames/s; R*mu2 at tau=inf."""
    r_c, r_f = params.r_c, params.r_f
    R = r_c / (r_c + r_f)
    if math.isinf(params.tau):
        return R * params.mu2
    return (1.0 - R) / (r_c * params.tau + 1.0) * params.mu1 + R * params.mu2


def utility(d: float, d_hat: float, eta: float, a) -> float:
    """Utility 1 - a*(d/d_hat) - (1-a)*(1-eta) of a (delay, efficiency) pair."""
    if isinstance(a, Preference):
        a = a.a
    if not (0.0 <= a <= 1.0):
        raise DomainError(f"preference weight must be in [0,1], got {a}")
    if not (0.0 < d <= d_hat):
        raise DomainError(f"need 0 < delay <= max delay, got d={d}, d_hat={d_hat}")
    if not (0.0 <= eta <= 1.0):
        raise DomainError(f"efficiency must be in [0,1], got {eta}")
    return 1.0 - a * (d / d_hat) - (1.0 - a) * (1.0 - eta)
