"""Test utilities for cvlearn."""

import numpy as np

from cvlearn.demand import DemandSystem, LinearDemand, MnlDemand, PriceBox


def fd_gradient(d: DemandSystem, p: np.ndarray, step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of mean demand."""
    n = d.n
    out = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        out[:, j] = (d.mean(p + e) - d.mean(p - e)) / (2 * step)
    return out


def fd_hessian(d: DemandSystem, p: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central-difference second derivatives from the analytic gradient."""
    n = d.n
    out = np.empty((n, n, n))
    for l in range(n):
        e = np.zeros(n)
        e[l] = step
        out[:, :, l] = (d.gradient(p + e) - d.gradient(p - e)) / (2 * step)
    return out


def random_linear_market(rng: np.random.Generator, n: int = 2) -> LinearDemand:
    """Diagonally dominant linear market, positive on ``[1, 5]^n``."""
    own = rng.uniform(5.0, 15.0, n)
    cross = rng.uniform(0.0, 1.0, (n, n)) * own[:, None] / (2.0 * n)
    np.fill_diagonal(cross, 0.0)
    b = cross + np.diag(own)
    a = own * 5.0 + rng.uniform(10.0, 50.0, n)
    box = PriceBox(lower=np.ones(n), upper=np.full(n, 5.0))
    return LinearDemand(a=a, b=b, box=box)


def random_symmetric_mnl(rng: np.random.Generator, n: int = 2) -> MnlDemand:
    """Symmetric-sensitivity logit market on a random box."""
    b = np.full(n, rng.uniform(0.5, 2.0))
    a = rng.uniform(-1.0, 2.0, n)
    lower = rng.uniform(0.2, 1.0, n)
    upper = lower + rng.uniform(1.0, 4.0, n)
    return MnlDemand(a=a, b=b, box=PriceBox(lower=lower, upper=upper))


def interior_point(box: PriceBox, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(box.lower + 0.1 * box.width, box.upper - 0.1 * box.width)
