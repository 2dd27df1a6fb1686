import numpy as np
import pytest

from dngalerkin.assembly import Exponents, ProblemData, model_field
from dngalerkin.basis import BoxDomain


def zero_xt(X, t=0.0):
    return np.zeros(np.asarray(X).shape[0])


def zero_grad(X, t=0.0):
    return np.zeros_like(np.atleast_2d(np.asarray(X, dtype=float)))


def make_problem(
    dim=1,
    alpha=1.0,
    p=None,
    horizon=0.1,
    u0=None,
    g=None,
    dt_g=None,
    f=None,
    field=None,
    domain=None,
    grad_g=None,
):
    """Compact builder for test problems on the unit box."""
    domain = domain or BoxDomain(np.zeros(dim), np.ones(dim))
    p = np.full(domain.dim, 2.0) if p is None else np.asarray(p, dtype=float)
    exponents = Exponents(alpha=alpha, p=p)
    if g is None and grad_g is None:
        grad_g = zero_grad
    return ProblemData(
        domain=domain,
        horizon=horizon,
        u0=u0 or zero_xt,
        g=g or zero_xt,
        dt_g=dt_g or zero_xt,
        f=f or zero_xt,
        exponents=exponents,
        field=field if field is not None else model_field(p),
        grad_g=grad_g,
    )


@pytest.fixture
def heat_square_problem():
    """alpha=1, p=(2,2), u0 = sin(pi x) sin(pi y), homogeneous data: the
    analytic solution is exp(-2 pi^2 t) u0."""
    return make_problem(
        dim=2,
        horizon=0.1,
        u0=lambda X: np.sin(np.pi * X[:, 0]) * np.sin(np.pi * X[:, 1]),
    )


def heat_square_exact(X, t):
    return np.exp(-2 * np.pi**2 * t) * np.sin(np.pi * X[:, 0]) * np.sin(
        np.pi * X[:, 1]
    )
