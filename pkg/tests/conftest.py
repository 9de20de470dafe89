import numpy as np
import pytest

from offloadq import SystemParams


@pytest.fixture
def simple():
    """Small-rate reference set; every derived constant is a short fraction."""
    return SystemParams(lam=0.5, mu1=1.0, mu2=2.0, r_c=1.0, r_f=1.0, tau=1.0)


@pytest.fixture
def paper():
    """Vehicular measurement set used throughout the figures."""
    return SystemParams.from_means(800, 1088, 3050, 28.42, 12.57, 10.0)


def random_stable_params(rng: np.random.Generator, tau_range=(1e-2, 1e2),
                         max_util=0.9) -> SystemParams:
    """Random parameter set with guaranteed stability margin."""
    mu1 = 10 ** rng.uniform(-1, 2)
    mu2 = mu1 * 10 ** rng.uniform(0.05, 1.5)
    r_c = 10 ** rng.uniform(-1.5, 0.5)
    r_f = 10 ** rng.uniform(-1.5, 0.5)
    tau = 10 ** rng.uniform(np.log10(tau_range[0]), np.log10(tau_range[1]))
    p = SystemParams(lam=1.0, mu1=mu1, mu2=mu2, r_c=r_c, r_f=r_f, tau=tau)
    from offloadq import capacity
    lam = rng.uniform(0.05, max_util) * capacity(p)
    return SystemParams(lam=lam, mu1=mu1, mu2=mu2, r_c=r_c, r_f=r_f, tau=tau)
