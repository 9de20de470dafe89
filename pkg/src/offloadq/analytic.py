"""Closed-form performance of the three-state modulated queue.

Everything here follows from embedding the points where a frame starts
service and where the service state changes: the number of service
completions between two such points decays geometrically (factor `beta`),
which yields closed forms for the start-service probabilities, the
conditional service/waiting times, the mean delay, and the offloading
efficiency.  The boundary probabilities (p00, p02 and the generating
functions they determine) come from :mod:`offloadq.chain`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import chain
from .errors import DomainError, Unstable
from .params import SystemParams, derived_quantities, validate

#: tolerance above which the two start-service evaluations are considered
#: to disagree and the recursion-consistent value is used
UNCORRECTED_PIHAT_TOL = 1e-4


@dataclass(frozen=True)
class ModulationConstants:
    """Geometric decay factor, capacity shares, and the embedded one-step matrix.

    `q_hat` maps the start-state distribution of one queue position to the
    next (rows/columns ordered deferred, cellular, Wi-Fi); its first row is
    zero because no service can complete while transmission is deferred.
    """

    beta: float
    theta1: float
    theta2: float
    q_hat: np.ndarray


@dataclass(frozen=True)
class StartServiceProbs:
    """Probability that a frame begins service in each service state.

    `uncorrected` carries the direct evaluation of the start-service
    identity, whose components do not in general sum to one; when it differs
    from the recursion-consistent value by more than UNCORRECTED_PIHAT_TOL
    the consistent value is stored in pihat0..2 and `oracle_corrected` is
    True.
    """

    pihat0: float
    pihat1: float
    pihat2: float
    uncorrected: tuple
    oracle_corrected: bool

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.pihat0, self.pihat1, self.pihat2])


@dataclass(frozen=True)
class ServiceMoments:
    """Conditional and unconditional mean (Wi-Fi) service times, seconds."""

    et0: float
    et1: float
    et2: float
    et: float
    eu0: float
    eu1: float
    eu2: float
    eu: float

    @property
    def et_vector(self) -> np.ndarray:
        return np.array([self.et0, self.et1, self.et2])

    @property
    def eu_vector(self) -> np.ndarray:
        return np.array([self.eu0, self.eu1, self.eu2])


@dataclass(frozen=True)
class AnalyticPerformance:
    """Mean waiting time, mean delay, offloading efficiency, max mean delay."""

    w: float
    d: float
    eta: float
    d_hat: float


def _moment_denominator(p: SystemParams) -> float:
    x = p.r_c * p.tau
    return p.r_f * p.mu1 + (x + 1.0) * p.r_c * p.mu2 + (x + 1.0) * p.mu1 * p.mu2


def modulation_constants(params: SystemParams) -> ModulationConstants:
    """beta, capacity shares theta, and the one-step matrix for finite tau."""
    p = validate(params)
    if math.isinf(p.tau):
        raise DomainError("modulation constants need a finite deadline")
    dq = derived_quantities(p)
    x = p.r_c * p.tau
    beta = (x + 1.0) * p.mu1 * p.mu2 / _moment_denominator(p)
    cap = dq.pi1 * p.mu1 + dq.pi2 * p.mu2
    theta1 = dq.pi1 * p.mu1 / cap
    theta2 = dq.pi2 * p.mu2 / cap
    # branch probabilities out of the deferred state, finite also at tau=0
    a01 = 1.0 / (1.0 + x)
    a02 = x / (1.0 + x)
    q_hat = np.array([
        [0.0, 0.0, 0.0],
        [beta * a01 * (1.0 + p.r_f / p.mu2),
         beta * (1.0 + a01 * p.r_f / p.mu2),
         beta * a01 * p.r_f / p.mu2],
        [beta * (p.r_c / p.mu1 + a02),
         beta * p.r_c / p.mu1,
         beta * (1.0 + p.r_c / p.mu1)],
    ])
    return ModulationConstants(beta=beta, theta1=theta1, theta2=theta2, q_hat=q_hat)


def start_service_recursion(params: SystemParams, initial, m: int) -> np.ndarray:
    """Apply the one-step start-state map m times to `initial` (m=0: identity)."""
    if m < 0:
        raise DomainError(f"m must be >= 0, got {m}")
    v = np.asarray(initial, dtype=float)
    if v.shape != (3,):
        raise DomainError("initial must be a 3-vector")
    mc = modulation_constants(params)
    for _ in range(m):
        v = mc.q_hat @ v
    return v


def start_service_closed_form(params: SystemParams, initial, m: int) -> np.ndarray:
    """Closed form of the m-step start-state map: fixed point plus beta^m term."""
    if m < 0:
        raise DomainError(f"m must be >= 0, got {m}")
    v = np.asarray(initial, dtype=float)
    if m == 0:
        return v.copy()
    mc = modulation_constants(params)
    x = params.r_c * params.tau
    a02 = x / (1.0 + x)
    drift = (mc.beta ** m) * ((mc.theta2 - a02) * v[0] + mc.theta2 * v[1] - mc.theta1 * v[2])
    return np.array([0.0, mc.theta1 + drift, mc.theta2 - drift])


def _conditional_moment_vectors(p: SystemParams):
    """(E[T_j], E[U_j]) for j = deferred, cellular, Wi-Fi; tau may be inf."""
    r_c, r_f, mu1, mu2, tau = p.r_c, p.r_f, p.mu1, p.mu2, p.tau
    if math.isinf(tau):
        # limits: service is deferred/Wi-Fi only; the cellular-start values are
        # the (never-weighted) limits of the finite-tau expressions
        R = r_c / (r_c + r_f)
        et = np.array([
            (r_c + r_f + mu2) / (r_c * mu2),
            (r_c + r_f + mu2) / (mu2 * (r_c + mu1)),
            1.0 / (R * mu2),
        ])
        eu = np.array([1.0 / mu2, r_c / (mu2 * (r_c + mu1)), 1.0 / mu2])
    else:
        x = r_c * tau
        den = _moment_denominator(p)
        et = np.array([
            (r_c + r_f + mu2) * (x + mu1 * tau + 1.0),
            (r_c + r_f + mu2) * (x + 1.0),
            (r_c + r_f) * (x + 1.0) + (1.0 + x + r_f * tau) * mu1,
        ]) / den
        eu = np.array([
            r_c * (x + mu1 * tau + 1.0),
            r_c * (x + 1.0),
            (r_c + mu1) * (x + 1.0),
        ]) / den
    return et, eu


def service_moments(params: SystemParams, pihat: StartServiceProbs) -> ServiceMoments:
    """Conditional mean service times and Wi-Fi service times per start state."""
    p = validate(params)
    et, eu = _conditional_moment_vectors(p)
    w = pihat.vector
    return ServiceMoments(
        et0=et[0], et1=et[1], et2=et[2], et=float(w @ et),
        eu0=eu[0], eu1=eu[1], eu2=eu[2], eu=float(w @ eu),
    )


def start_service_probs(params: SystemParams,
                        boundary: "chain.BoundarySolution | None" = None) -> StartServiceProbs:
    """Start-service probabilities from the boundary solution.

    For finite tau a boundary solution is required (one is computed when not
    supplied).  The infinite-deadline case reduces to two service states and
    needs only the closed-form empty-and-deferred probability.
    """
    p = validate(params)
    if math.isinf(p.tau):
        R = p.r_c / (p.r_c + p.r_f)
        p02_inf = R - p.lam / p.mu2          # work conservation: busy Wi-Fi fraction is lam/mu2
        p00 = p.r_f * p02_inf / (p.lam + p.r_c)
        return StartServiceProbs(p00, 0.0, 1.0 - p00,
                                 uncorrected=(p00, 0.0, 1.0 - p00),
                                 oracle_corrected=False)
    sol = boundary if boundary is not None else chain.boundary_solution(p)
    mc = modulation_constants(p)
    g0b, g1b, g2b, _ = chain.eval_G(p, sol, mc.beta)
    x = p.r_c * p.tau
    c = x / (x + 1.0)
    p00 = sol.p00
    drift = (mc.theta2 - c) * g0b + mc.theta2 * g1b - mc.theta1 * g2b
    pihat1 = mc.theta1 + drift - (1.0 - c) * p00
    pihat2_raw = mc.theta2 - drift - (1.0 - c) * p00
    pihat2 = mc.theta2 - drift - c * p00       # consistent with the m-step recursion
    corrected = abs(pihat2 - pihat2_raw) > UNCORRECTED_PIHAT_TOL
    return StartServiceProbs(p00, pihat1, pihat2,
                             uncorrected=(p00, pihat1, pihat2_raw),
                             oracle_corrected=corrected)


def conditional_wait(params: SystemParams, k: int, state: int) -> float:
    """Expected time for a frame at queue position k to reach the head of line,
    given the service state is `state` when it lands on position k."""
    p = validate(params)
    if math.isinf(p.tau):
        raise DomainError("conditional wait needs a finite deadline")
    if k < 0 or state not in (0, 1, 2):
        raise DomainError(f"need k >= 0 and state in 0..2, got k={k}, state={state}")
    if k == 0:
        return 0.0
    mc = modulation_constants(p)
    dq = derived_quantities(p)
    et, _ = _conditional_moment_vectors(p)
    beta, mu_hat = mc.beta, dq.mu_hat
    bk = beta ** k
    if state == 0:
        x = p.r_c * p.tau
        hold = p.tau / (x + 1.0)             # mean sojourn of the deferred state
        return (et[0] + (k - 1) / mu_hat
                + (beta - bk) / (1.0 - beta) * (et[0] - 1.0 / mu_hat - hold))
    return k / mu_hat + (1.0 - bk) / (1.0 - beta) * (et[state] - 1.0 / mu_hat)


def maximal_mean_delay(params: SystemParams) -> float:
    """Mean delay in the pure-offloading limit (deadline -> infinity)."""
    p = params
    R = p.r_c / (p.r_c + p.r_f)
    cap = R * p.mu2
    if not (p.lam < cap):
        raise Unstable(p.lam, cap, math.inf)
    return (p.r_c + R * (1.0 - R) * p.mu2) / (p.r_c * (cap - p.lam))


def performance(params: SystemParams, pihat: StartServiceProbs,
                moments: ServiceMoments) -> AnalyticPerformance:
    """Mean waiting time, delay, offloading efficiency, and the delay bound.

    The bound is infinite when the arrival rate is not below the Wi-Fi-only
    capacity (the delay then grows without limit as the deadline does).
    """
    p = validate(params)
    R = p.r_c / (p.r_c + p.r_f)
    d_hat = maximal_mean_delay(p) if p.lam < R * p.mu2 else math.inf
    if math.isinf(p.tau):
        return AnalyticPerformance(w=d_hat - moments.et, d=d_hat, eta=1.0, d_hat=d_hat)
    dq = derived_quantities(p)
    mc = modulation_constants(p)
    pis = np.array(dq.pis)
    ph = pihat.vector
    rho = p.lam / dq.mu_hat
    x = p.r_c * p.tau
    spread = float(moments.et_vector @ (pis - ph))
    defer_adj = mc.beta / (1.0 - mc.beta) * (p.tau / (x + 1.0)) * (pis[0] - ph[0])
    w = (rho * moments.et + spread / (1.0 - mc.beta) - defer_adj) / (1.0 - rho)
    d = w + moments.et
    eta = p.mu2 * moments.eu
    return AnalyticPerformance(w=w, d=d, eta=eta, d_hat=d_hat)


def analyze(params: SystemParams):
    """Full analytic pipeline: boundary -> start probs -> moments -> performance.

    Returns (AnalyticPerformance, StartServiceProbs, ServiceMoments, boundary),
    with boundary None for an infinite deadline.
    """
    p = validate(params)
    if math.isinf(p.tau):
        ph = start_service_probs(p)
        mom = service_moments(p, ph)
        return performance(p, ph, mom), ph, mom, None
    sol = chain.boundary_solution(p)
    ph = start_service_probs(p, sol)
    mom = service_moments(p, ph)
    return performance(p, ph, mom), ph, mom, sol
