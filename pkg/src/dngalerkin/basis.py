"""Orthonormal tensor-sine Galerkin basis on axis-aligned boxes, with
Gauss-Legendre tensor quadrature and L2 projection.

Modes are products of normalized sines, so they vanish on the boundary and
are exactly L2-orthonormal; quadrature only has to resolve their products.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

SUPPORTED_DIMENSIONS = (1, 2, 3)


@dataclass(frozen=True, eq=False)
class BoxDomain:
    """Axis-aligned box (lower_i, upper_i), 1 <= N <= 3."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if lower.size not in SUPPORTED_DIMENSIONS:
            raise ValueError(f"unsupported spatial dimension {lower.size}")
        if not np.all(lower < upper):
            raise ValueError("lower_i < upper_i is required in every direction")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("box bounds must be finite")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def lengths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, x, rtol=1e-12) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        slack = rtol * self.lengths
        return bool(
            np.all(x >= self.lower - slack) and np.all(x <= self.upper + slack)
        )


@dataclass(frozen=True, eq=False)
class Quadrature:
    """Tensor Gauss-Legendre rule: nodes (Q, N), positive weights (Q,)."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int


def tensor_quadrature(domain: BoxDomain, order: int) -> Quadrature:
    """Gauss-Legendre tensor rule with `order` points per dimension; exact
    for per-dimension polynomial degree <= 2*order - 1."""
    if order < 2:
        raise ValueError("quadrature order must be at least 2")
    xs, ws = [], []
    for i in range(domain.dim):
        x, w = np.polynomial.legendre.leggauss(order)
        a, b = domain.lower[i], domain.upper[i]
        xs.append(0.5 * (b - a) * (x + 1.0) + a)
        ws.append(0.5 * (b - a) * w)
    grids = np.meshgrid(*xs, indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weight = ws[0]
    for w in ws[1:]:
        weight = np.multiply.outer(weight, w)
    return Quadrature(nodes=nodes, weights=weight.ravel(), order=order)


def default_quadrature_order(modes_per_dim: int) -> int:
    # resolves products of the highest sine modes to ~1e-12; measured, not
    # the polynomial-exactness heuristic
    return 2 * modes_per_dim + 10


@dataclass(frozen=True, eq=False)
class GalerkinBasis:
    """Tensor modes prod_i sqrt(2/L_i) sin(k_i pi (x_i - a_i)/L_i) for
    multi-indices k in {1..m}^N, ordered lexicographically."""

    domain: BoxDomain
    modes_per_dim: int

    def __post_init__(self):
        if self.modes_per_dim < 1:
            raise ValueError("modes_per_dim must be >= 1")

    @property
    def indices(self) -> np.ndarray:
        m, N = self.modes_per_dim, self.domain.dim
        return np.array(list(product(range(1, m + 1), repeat=N)), dtype=int)

    @property
    def size(self) -> int:
        return self.modes_per_dim ** self.domain.dim

    def _scaled(self, X):
        """Map points to per-dimension phase arguments k pi (x-a)/L."""
        X = np.asarray(X, dtype=float)
        return (X - self.domain.lower) / self.domain.lengths

    def _boundary_mask(self, X) -> np.ndarray:
        # sin(k pi) only rounds to ~1e-16; snap factors exactly on a face
        return (X == self.domain.lower) | (X == self.domain.upper)

    def eval_matrix(self, X) -> np.ndarray:
        """Mode values at many points: X (Q, N) -> (Q, n)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = self._scaled(X)  # (Q, N)
        k = self.indices  # (n, N)
        norm = np.prod(np.sqrt(2.0 / self.domain.lengths))
        phases = np.pi * s[:, None, :] * k[None, :, :]  # (Q, n, N)
        sins = np.sin(phases)
        sins[np.broadcast_to(self._boundary_mask(X)[:, None, :], sins.shape)] = 0.0
        return norm * np.prod(sins, axis=-1)

    def grad_matrix(self, X) -> np.ndarray:
        """Mode gradients at many points: X (Q, N) -> (Q, n, N)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = self._scaled(X)
        k = self.indices
        norm = np.prod(np.sqrt(2.0 / self.domain.lengths))
        phases = np.pi * s[:, None, :] * k[None, :, :]
        sins = np.sin(phases)
        sins[np.broadcast_to(self._boundary_mask(X)[:, None, :], sins.shape)] = 0.0
        coss = np.cos(phases)
        rate = np.pi * k[None, :, :] / self.domain.lengths[None, None, :]
        out = np.empty_like(phases)
        for d in range(self.domain.dim):
            factors = sins.copy()
            factors[:, :, d] = coss[:, :, d] * rate[:, :, d]
            out[:, :, d] = np.prod(factors, axis=-1)
        return norm * out

    def eval_modes(self, x) -> np.ndarray:
        """Values of all modes at one point; errors outside the closed box."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not self.domain.contains(x):
            raise ValueError(f"point {x} lies outside the domain box")
        return self.eval_matrix(x[None, :])[0]

    def grad_modes(self, x) -> np.ndarray:
        """Gradients (n, N) of all modes at one point."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not self.domain.contains(x):
            raise ValueError(f"point {x} lies outside the domain box")
        return self.grad_matrix(x[None, :])[0]

    def stiffness_eigenvalues(self) -> np.ndarray:
        """Dirichlet-Laplacian eigenvalues sum_i (k_i pi / L_i)^2 per mode."""
        k = self.indices
        return np.sum((np.pi * k / self.domain.lengths) ** 2, axis=1)

    def tables(self, quad: Quadrature):
        """Cached (values, gradients, weights) at the quadrature nodes."""
        cache = _TABLE_CACHE.setdefault(id(self), {})
        key = id(quad)
        if key not in cache:
            cache[key] = (
                self.eval_matrix(quad.nodes),
                self.grad_matrix(quad.nodes),
                quad.weights,
            )
            _CACHE_KEEPALIVE.append((self, quad))
        return cache[key]


# id()-keyed caches; keepalive pins the keyed objects so ids stay unique
_TABLE_CACHE: dict = {}
_CACHE_KEEPALIVE: list = []


def build_basis(domain: BoxDomain, modes_per_dim: int) -> GalerkinBasis:
    if domain.dim not in SUPPORTED_DIMENSIONS:
        raise ValueError(f"unsupported spatial dimension {domain.dim}")
    return GalerkinBasis(domain=domain, modes_per_dim=modes_per_dim)


def project_l2(field, basis: GalerkinBasis, quad: Quadrature) -> np.ndarray:
    """Coefficients of the L2 projection of a scalar field onto the basis.

    `field` is either a callable of the node array (Q, N) -> (Q,) or an
    array of values at the quadrature nodes.
    """
    V, _, w = basis.tables(quad)
    vals = field(quad.nodes) if callable(field) else np.asarray(field, dtype=float)
    vals = np.ravel(vals)
    if vals.shape != (quad.nodes.shape[0],):
        raise ValueError("field values must match the quadrature nodes")
    if not np.all(np.isfinite(vals)):
        raise ValueError("field must be finite on the quadrature nodes")
    return V.T @ (w * vals)
