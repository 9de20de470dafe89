"""Exception types shared across the toolkit."""


class OffloadError(Exception):
    """Base class for all toolkit errors."""


class NonPositiveRate(OffloadError):
    """A rate parameter that must be strictly positive is not."""


class Unstable(OffloadError):
    """Arrival rate meets or exceeds the service capacity for this deadline."""

    def __init__(self, lam: float, capacity: float, tau: float):
        self.lam = lam
        self.capacity = capacity
        self.tau = tau
        super().__init__(
            f"unstable: arrival rate {lam} >= capacity {capacity} at tau={tau}"
        )


class DomainError(OffloadError):
    """An argument is outside the domain of the requested computation."""


class BoundaryInvalid(OffloadError):
    """The boundary/generating-function solution failed its normalization check."""


class NoSignChange(OffloadError):
    """Root bracketing failed: no sign change of the boundary function in (0, 1)."""

    def __init__(self, g0: float, g1: float):
        self.g0 = g0
        self.g1 = g1
        super().__init__(f"no sign change in (0,1): g(0)={g0}, g(1)={g1}")


class SingularityUnresolved(OffloadError):
    """Two-sided limits around a removable singularity disagree."""


class TruncationInsufficient(OffloadError):
    """Truncated-chain tail mass exceeds the requested bound at the maximum level."""

    def __init__(self, n_levels: int, tail_mass: float, bound: float):
        self.n_levels = n_levels
        self.tail_mass = tail_mass
        self.bound = bound
        super().__init__(
            f"tail mass {tail_mass:.3e} >= bound {bound:.3e} at N={n_levels}"
        )


class ConfigError(OffloadError):
    """Invalid simulation or CLI configuration."""


class GridParseError(OffloadError):
    """A grid specification string does not match the expected grammar."""
