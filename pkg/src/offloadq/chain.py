"""Two-dimensional chain of (frames in system, service state).

Solves the boundary of the queue-length generating functions by locating the
root of the characteristic cubic in (0,1), evaluates the partial generating
functions, computes the mean delay from the derivative at 1, and provides a
brute-force truncated solve of the balance equations as an independent
cross-check.  Levels couple only to their neighbours, so the truncated system
is solved as a banded linear system.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import (BoundaryInvalid, DomainError, NoSignChange,
                     SingularityUnresolved, TruncationInsufficient)
from .params import SystemParams, derived_quantities, validate

_SCAN_POINTS = 10_001          # uniform multiplicity scan of (0,1)
_SINGULAR_RADIUS = 1e-8        # switch to two-sided evaluation inside this
_SINGULAR_OFFSET = 1e-7        # symmetric offset for the two-sided limit
_NORMALIZATION_TOL = 1e-8


@dataclass(frozen=True)
class BoundarySolution:
    """Root of the characteristic function and the boundary probabilities.

    z0    root in (0,1) of the characteristic cubic
    p02   probability the system is empty in the Wi-Fi state
    p00   probability the system is empty in the deferred state
    multi_root        True when the sign scan saw more than one crossing
    n_sign_changes    crossings found by the scan
    """

    z0: float
    p02: float
    p00: float
    params: SystemParams
    multi_root: bool = False
    n_sign_changes: int = 1


def _g_raw(p: SystemParams, z):
    """Characteristic cubic; negative at 0 and positive at 1 for stable params."""
    lam, mu1, mu2, r_c, r_f, tau = p.lam, p.mu1, p.mu2, p.r_c, p.r_f, p.tau
    z = np.asarray(z, dtype=float)
    q2 = -lam * z * z + (lam + r_f + mu2) * z - mu2
    q1 = -lam * z * z + (lam + r_c + mu1) * z - mu1
    out = (-lam * tau * q2 + (r_c * tau + 1.0) * (mu2 - lam * z)) * q1 \
        + r_f * (mu1 - lam * z) * z
    return out if out.shape else float(out)


def _q1(p: SystemParams, z):
    return -p.lam * z * z + (p.lam + p.r_c + p.mu1) * z - p.mu1


def eval_g(params: SystemParams, z):
    """Characteristic function scaled so that g(0) = -mu1*mu2*(lam + r_c + 1/tau)."""
    if not (0.0 < params.tau < math.inf):
        raise DomainError(f"eval_g needs 0 < tau < inf, got {params.tau}")
    return _g_raw(params, z) / params.tau


def boundary_solution(params: SystemParams) -> BoundarySolution:
    """Locate the root in (0,1) by scan + bisection and derive p02, p00.

    Raises NoSignChange when the scan and endpoints show no crossing, and
    BoundaryInvalid when the resulting generating functions fail the
    normalization check at z=1.  Multiple crossings set `multi_root` and the
    first bracketed root is used.
    """
    p = validate(params)
    if math.isinf(p.tau):
        raise DomainError("boundary solution needs a finite deadline")
    zs = np.linspace(0.0, 1.0, _SCAN_POINTS)
    gv = _g_raw(p, zs)
    neg = gv < 0
    crossings = np.nonzero(neg[:-1] != neg[1:])[0]
    if len(crossings) == 0:
        scale = p.tau if p.tau > 0 else 1.0
        raise NoSignChange(float(gv[0] / scale), float(gv[-1] / scale))
    lo, hi = float(zs[crossings[0]]), float(zs[crossings[0] + 1])
    g_lo = float(_g_raw(p, lo))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = float(_g_raw(p, mid))
        if (g_lo < 0) != (g_mid < 0):
            hi = mid
        else:
            lo, g_lo = mid, g_mid
        if hi - lo <= 9e-15:
            break
    z0 = 0.5 * (lo + hi)

    dq = derived_quantities(p)
    # denominator of the residue condition in factored form; the raw quadratic
    # mu2*(lam*z^2 - (mu1+lam)*z + mu1) cancels catastrophically near z=1
    p02 = p.r_c * (dq.mu_hat - p.lam) * z0 / (p.mu2 * (p.mu1 - p.lam * z0) * (1.0 - z0))
    sol = BoundarySolution(z0=z0, p02=p02, p00=0.0, params=p,
                           multi_root=len(crossings) > 1,
                           n_sign_changes=len(crossings))
    p00 = _G_components(p, sol, 0.0)[0]
    sol = BoundarySolution(z0=z0, p02=p02, p00=float(p00), params=p,
                           multi_root=sol.multi_root,
                           n_sign_changes=sol.n_sign_changes)
    total = float(sum(_G_components(p, sol, 1.0)))
    if abs(total - 1.0) > _NORMALIZATION_TOL:
        raise BoundaryInvalid(f"generating functions sum to {total} at z=1")
    return sol


def _G_components(p: SystemParams, sol: BoundarySolution, z: float):
    """Direct (unguarded) evaluation of (G0, G1, G2) at a scalar z."""
    lam, mu1, mu2, r_c, r_f, tau = p.lam, p.mu1, p.mu2, p.r_c, p.r_f, p.tau
    dq = derived_quantities(p)
    p02 = sol.p02
    num0 = (-mu2 * p02 * lam * z * z
            + ((mu1 + lam) * mu2 * p02 + r_c * (dq.mu_hat - lam)) * z
            - mu1 * mu2 * p02)
    g0_over_tau = r_f * num0 / _g_raw(p, z)    # finite limit as tau -> 0
    g0 = tau * g0_over_tau
    g1 = ((dq.mu_hat - lam - mu2 * p02) * (z - 1.0) + z * g0_over_tau) / _q1(p, z)
    g2 = (-lam * tau * z + (r_c + lam) * tau + 1.0) * g0_over_tau / r_f
    return g0, g1, g2


def _q1_root(p: SystemParams) -> float:
    """Root of the cellular-state quadratic inside (0,1)."""
    b = p.lam + p.r_c + p.mu1
    disc = math.sqrt(b * b - 4.0 * p.lam * p.mu1)
    return 2.0 * p.mu1 / (b + disc)     # conjugate form, no cancellation


def eval_G(params: SystemParams, sol: BoundarySolution, z: float):
    """Partial generating functions (G0, G1, G2, G) at z in [0, 1].

    Removable singularities (the characteristic root z0 and the root of the
    cellular quadratic) are evaluated as symmetric two-sided limits; the two
    sides must agree to 1e-6 relative or SingularityUnresolved is raised.
    """
    p = sol.params if params is None else params
    if not (0.0 <= z <= 1.0):
        raise DomainError(f"z must be in [0,1], got {z}")
    singular_points = [sol.z0, _q1_root(p)]
    near = [s for s in singular_points if abs(z - s) < _SINGULAR_RADIUS]
    if not near:
        g0, g1, g2 = _G_components(p, sol, z)
    else:
        h = _SINGULAR_OFFSET
        left = _G_components(p, sol, z - h)
        right = _G_components(p, sol, z + h)
        for lo_v, hi_v in zip(left, right):
            scale = max(abs(lo_v), abs(hi_v), 1e-30)
            if abs(hi_v - lo_v) / scale > 1e-6:
                raise SingularityUnresolved(
                    f"two-sided limits at z={z} differ: {lo_v} vs {hi_v}")
        g0, g1, g2 = (0.5 * (a + b) for a, b in zip(left, right))
    if not all(map(math.isfinite, (g0, g1, g2))):
        raise SingularityUnresolved(f"generating function not finite at z={z}")
    return g0, g1, g2, g0 + g1 + g2


def numeric_mean_delay(params: SystemParams, sol: BoundarySolution | None = None) -> float:
    """Mean delay from the derivative of the generating function at 1 (Little)."""
    p = validate(params)
    if math.isinf(p.tau):
        raise DomainError("numeric mean delay needs a finite deadline")
    if sol is None:
        sol = boundary_solution(p)
    lam, mu1, mu2, r_c, r_f, tau = p.lam, p.mu1, p.mu2, p.r_c, p.r_f, p.tau
    p02 = sol.p02
    rsum = r_c + r_f
    x = r_c * tau
    den = lam * rsum * (x + 1.0) * (lam * rsum * (1.0 + x) - r_c * mu2 * (1.0 + x) - mu1 * r_f)
    num = (-lam * rsum ** 2 - (mu2 - mu1) * r_c * (mu2 - lam)
           + r_c * (-2.0 * lam * rsum ** 2 + (mu2 - lam) * (mu1 * r_f - 2.0 * r_c * (mu2 - mu1))) * tau
           - r_c * (lam * (r_c + mu1) * rsum ** 2 + mu2 * r_c * (r_c * (mu2 - lam) - mu1 * rsum)) * tau ** 2
           - mu2 * (x + 1.0) * rsum * (mu1 * r_f * tau - (mu2 - mu1) * (x + 1.0)) * p02)
    return num / den


# ---------------------------------------------------------------------------
# truncated direct solve


@dataclass(frozen=True)
class TruncatedChainSolution:
    """Stationary probabilities of the level-truncated chain.

    p[n, j] is the probability of n frames in the system with service state j
    (columns always ordered deferred, cellular, Wi-Fi; an unused column is
    zero for the tau = 0 / tau = inf reductions).
    """

    n_levels: int
    p: np.ndarray
    tail_mass: float
    residual: float
    params: SystemParams = field(repr=False)

    @property
    def level_mass(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def p00(self) -> float:
        return float(self.p[0, 0])

    @property
    def delay(self) -> float:
        """Mean delay by Little's law on the mean number in system."""
        return float(np.arange(self.n_levels + 1) @ self.level_mass) / self.params.lam

    @property
    def eta(self) -> float:
        """Offloading efficiency: Wi-Fi service throughput over arrival rate."""
        return self.params.mu2 * float(self.p[1:, 2].sum()) / self.params.lam

    def pihat(self) -> np.ndarray:
        """Start-service probabilities as the level series of one-step maps."""
        from .analytic import modulation_constants
        q_hat = modulation_constants(self.params).q_hat
        acc = self.p[self.n_levels].copy()
        for n in range(self.n_levels - 1, -1, -1):       # Horner over levels
            acc = self.p[n] + q_hat @ acc
        return acc


def _local_structure(p: SystemParams):
    """Local transition matrix, service rates, and active states for this tau."""
    if p.tau == 0.0:                      # deferred state never occupied
        trans = np.array([[0.0, p.r_c], [p.r_f, 0.0]])
        svc = np.array([p.mu1, p.mu2])
        states = (1, 2)
    elif math.isinf(p.tau):               # cellular state never reached
        trans = np.array([[0.0, p.r_c], [p.r_f, 0.0]])
        svc = np.array([0.0, p.mu2])
        states = (0, 2)
    else:
        f01 = 1.0 / p.tau
        trans = np.array([
            [0.0, f01, p.r_c],
            [0.0, 0.0, p.r_c],
            [p.r_f, 0.0, 0.0],
        ])
        svc = np.array([0.0, p.mu1, p.mu2])
        states = (0, 1, 2)
    return trans, svc, states


def _solve_truncated(p: SystemParams, n_levels: int) -> np.ndarray:
    """Banded solve of the balance equations with no arrivals at the top level."""
    trans, svc, states = _local_structure(p)
    k = len(states)
    m = k * (n_levels + 1)
    kl = ku = k
    ab = np.zeros((kl + ku + 1, m))
    outflow = np.zeros(m)

    def add(delta: int, cols: np.ndarray, rate: float):
        ab[ku + delta, cols] += rate
        outflow[cols] += rate

    base = np.arange(0, m, k)
    for i in range(k):
        for j in range(k):
            if trans[i, j] > 0.0:
                add(j - i, base + i, trans[i, j])
    add(k, np.arange(0, m - k), p.lam)                    # arrivals, below top level
    for i in range(k):
        if svc[i] > 0.0:
            add(-k, base[1:] + i, svc[i])                  # service, level n >= 1
    ab[ku, np.arange(m)] -= outflow
    # one balance equation is redundant: replace the first with a scale anchor
    # on the level-0 unknown, which never underflows (the tail does)
    for delta in range(-kl, ku + 1):
        col = -delta
        if 0 <= col < m:
            ab[ku - col, col] = 0.0
    ab[ku, 0] = 1.0
    rhs = np.zeros(m)
    rhs[0] = 1.0
    x = solve_banded((kl, ku), ab, rhs)
    x = np.maximum(x, 0.0)
    x /= x.sum()
    grid = x.reshape(n_levels + 1, k)
    full = np.zeros((n_levels + 1, 3))
    full[:, list(states)] = grid
    return full


def _balance_residual(p: SystemParams, full: np.ndarray) -> float:
    """Max absolute residual of the untruncated balance equations."""
    trans, svc, states = _local_structure(p)
    P = full[:, list(states)]
    n_levels = P.shape[0] - 1
    lam = p.lam
    res = np.zeros_like(P)
    res += P @ trans                      # inflow from local transitions
    res[1:] += lam * P[:-1]               # inflow by arrival
    res[:-1] += P[1:] * svc               # inflow by service completion
    out = trans.sum(axis=1)[None, :] + svc[None, :] * (np.arange(n_levels + 1) > 0)[:, None]
    out = out + lam * (np.arange(n_levels + 1) < n_levels)[:, None]
    res -= P * out
    return float(np.abs(res).max())


def _tail_estimate(level_mass: np.ndarray) -> float:
    """Geometric extrapolation of the probability mass beyond the last level.

    The decay rate is fitted between half and three-quarter depth: the levels
    next to the reflecting truncation boundary carry pile-up mass and would
    bias the fit.
    """
    if float(level_mass[-1]) <= 0.0:
        return 0.0
    n = len(level_mass) - 1
    n1, n2 = n // 2, (3 * n) // 4
    a, b = float(level_mass[n1]), float(level_mass[n2])
    if a <= 0.0 or b <= 0.0:
        return 0.0          # interior underflowed; anything beyond is dust
    if b >= a:
        return math.inf     # no decay visible at this depth yet
    ratio = (b / a) ** (1.0 / (n2 - n1))
    return b * ratio ** (n - n2 + 1) / (1.0 - ratio)


def truncated_chain_oracle(params: SystemParams, n_levels: int = 5000,
                           tail_bound: float = 1e-10,
                           max_levels: int = 1_000_000) -> TruncatedChainSolution:
    """Direct solve of the balance equations, doubling the truncation level
    until the extrapolated tail mass is below `tail_bound`.

    Raises TruncationInsufficient when `max_levels` is reached first.
    """
    p = validate(params)
    if n_levels < 10:
        raise DomainError(f"n_levels must be >= 10, got {n_levels}")
    n = n_levels
    while True:
        full = _solve_truncated(p, n)
        tail = _tail_estimate(full.sum(axis=1))
        if tail < tail_bound:
            break
        if 2 * n > max_levels:
            raise TruncationInsufficient(n, tail, tail_bound)
        n *= 2
    residual = _balance_residual(p, full)
    return TruncatedChainSolution(n_levels=n, p=full, tail_mass=tail,
                                  residual=residual, params=p)
