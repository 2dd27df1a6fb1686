"""Assembly of the finite-dimensional evolution system.

For coefficients xi of the boundary-lifted expansion u = g + sum_k xi_k v_k
this module builds the weighted mass matrix F, the load vectors K (moving
boundary data), G (flux), J (source), and the reduced right-hand side
H = F^{-1}(J - K - G), together with an audit of the structure conditions
a flux field is declared to satisfy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .algebra import signed_power
from .basis import BoxDomain, GalerkinBasis, Quadrature


class MassMatrixNotSPDError(RuntimeError):
    """Factorization of the weighted mass matrix failed; signals that the
    regularization is too small or the quadrature too coarse."""


class NonFiniteFieldError(RuntimeError):
    """The flux field returned a non-finite value at a quadrature node."""


@dataclass(frozen=True)
class Exponents:
    """The pair (alpha, p): time-nonlinearity power and per-direction
    growth powers of the flux."""

    alpha: float
    p: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError("alpha must be positive")
        if not np.all(np.isfinite(p)):
            raise ValueError("p must be finite")
        if not np.all(p > 1.0):
            raise ValueError("p must exceed 1 in every direction")
        object.__setattr__(self, "p", p)

    @property
    def p_max(self) -> float:
        return float(np.max(self.p))


def _as_xt_callable(value):
    """Normalize scalars to constant functions of (X, t)."""
    if callable(value):
        return value
    const = float(value)
    return lambda X, t=0.0: np.full(np.asarray(X).shape[0], const)


@dataclass(frozen=True, eq=False)
class VectorFieldSpec:
    """A Caratheodory flux field A(x, t, u, xi) with structure metadata.

    evaluate(X, t, U, XI) must broadcast: X (Q, N), U (Q,) or (Q, B),
    XI matching U with a trailing N axis; the result has XI's shape.
    Lambda and the data functions a_tilde, b_tilde (of (x, t)) and c_tilde
    (of x) describe the coercivity/growth/Lipschitz envelopes; the flags
    declare properties the audit can probe.
    """

    evaluate: callable
    Lambda: float = 1.0
    a_tilde: object = 0.0
    b_tilde: object = 0.0
    c_tilde: object = 0.0
    time_independent: bool = False
    lipschitz_in_u: bool = False
    strictly_monotone: bool = False
    name: str = "custom"
    params: tuple = ()

    def __post_init__(self):
        if not (np.isfinite(self.Lambda) and self.Lambda > 0):
            raise ValueError("Lambda must be positive")

    def a_tilde_at(self, X, t):
        return np.asarray(_as_xt_callable(self.a_tilde)(X, t), dtype=float)

    def b_tilde_at(self, X, t):
        return np.asarray(_as_xt_callable(self.b_tilde)(X, t), dtype=float)

    def c_tilde_at(self, X):
        return np.asarray(_as_xt_callable(self.c_tilde)(X, 0.0), dtype=float)

    def compatible_with(self, other) -> bool:
        """True when the two specs demonstrably describe the same field."""
        if self is other:
            return True
        return (
            self.name == other.name
            and self.name != "custom"
            and self.params == other.params
        )


def model_field(p) -> VectorFieldSpec:
    """The anisotropic model flux A_i(xi) = |xi_i|^(p_i - 2) xi_i.

    Satisfies coercivity and growth with Lambda = 1, a_tilde = b_tilde = 0,
    is independent of (t, u) and strictly monotone for p_i > 1.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if not np.all(p > 1.0):
        raise ValueError("p must exceed 1 in every direction")

    def evaluate(X, t, U, XI):
        XI = np.asarray(XI, dtype=float)
        return np.sign(XI) * np.abs(XI) ** (p - 1.0)

    return VectorFieldSpec(
        evaluate=evaluate,
        Lambda=1.0,
        time_independent=True,
        lipschitz_in_u=True,
        strictly_monotone=True,
        name="model",
        params=tuple(p.tolist()),
    )


@dataclass(frozen=True, eq=False)
class ProblemData:
    """Data of one initial-boundary value problem on a box.

    u0: callable X -> values; g, dt_g, f: callables (X, t) -> values;
    grad_g: optional callable (X, t) -> (Q, N) spatial gradient of g
    (finite differences are used when omitted).
    """

    domain: BoxDomain
    horizon: float
    u0: callable
    g: callable
    dt_g: callable
    f: callable
    exponents: Exponents
    field: VectorFieldSpec
    grad_g: callable = None

    def __post_init__(self):
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError("horizon must be positive")
        if self.exponents.p.size != self.domain.dim:
            raise ValueError("p must have one entry per spatial dimension")

    def grad_g_at(self, X, t) -> np.ndarray:
        """Spatial gradient of the boundary lift at the given points."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.grad_g is not None:
            return np.asarray(self.grad_g(X, t), dtype=float)
        out = np.empty_like(X)
        for d in range(self.domain.dim):
            h = 1e-5 * max(1.0, float(self.domain.lengths[d]))
            out[:, d] = _central_diff4(lambda s: self.g(_replace_col(X, d, s), t),
                                       X[:, d], h)
        return out

    def validate_on(self, quad: Quadrature, times) -> None:
        """Check that the data are finite on the quadrature nodes."""
        X = quad.nodes
        if not np.all(np.isfinite(np.asarray(self.u0(X), dtype=float))):
            raise ValueError("u0 is not finite on the quadrature nodes")
        for t in np.atleast_1d(times):
            for name, fn in (("g", self.g), ("dt_g", self.dt_g), ("f", self.f)):
                vals = np.asarray(fn(X, float(t)), dtype=float)
                if not np.all(np.isfinite(vals)):
                    raise ValueError(f"{name} is not finite at t={t}")


def _replace_col(X, d, col):
    Y = X.copy()
    Y[:, d] = col
    return Y


def _central_diff4(fn, s, h):
    """Fourth-order central difference of fn along a 1-d argument array."""
    return (
        -fn(s + 2 * h) + 8 * fn(s + h) - 8 * fn(s - h) + fn(s - 2 * h)
    ) / (12.0 * h)


@dataclass(frozen=True)
class GalerkinState:
    """Coefficients at one time, with the regularization in force."""

    xi: np.ndarray
    t: float
    epsilon: float

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if not np.all(np.isfinite(xi)):
            raise ValueError("coefficients must be finite")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "xi", xi)


def lifted_values(state_xi, t, problem, basis, quad):
    """u = g + sum xi_k v_k at the quadrature nodes.

    state_xi may be a single coefficient vector (n,) or a batch (n, B);
    the result is (Q,) or (Q, B) accordingly.
    """
    V, _, _ = basis.tables(quad)
    g_vals = np.asarray(problem.g(quad.nodes, t), dtype=float)
    xi = np.asarray(state_xi, dtype=float)
    if xi.ndim == 1:
        return g_vals + V @ xi
    return g_vals[:, None] + V @ xi


def theta_weight(state: GalerkinState, X, problem, basis) -> np.ndarray:
    """The positive weight (|u| + eps)^((alpha-1)/2) at the given points."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = basis.eval_matrix(X)
    u = np.asarray(problem.g(X, state.t), dtype=float) + V @ state.xi
    alpha = problem.exponents.alpha
    return (np.abs(u) + state.epsilon) ** ((alpha - 1.0) / 2.0)


def _mass_weight(u_vals, alpha, epsilon):
    return (np.abs(u_vals) + epsilon) ** (alpha - 1.0)


def assemble_F(state: GalerkinState, problem, basis, quad) -> np.ndarray:
    """Weighted mass matrix F_mk = alpha * int (|u|+eps)^(alpha-1) v_k v_m."""
    V, _, w = basis.tables(quad)
    u = lifted_values(state.xi, state.t, problem, basis, quad)
    alpha = problem.exponents.alpha
    weight = w * _mass_weight(u, alpha, state.epsilon)
    M = alpha * (V * weight[:, None]).T @ V
    return 0.5 * (M + M.T)


def assemble_K(state: GalerkinState, problem, basis, quad) -> np.ndarray:
    """Moving-boundary load K_m = alpha * int (|u|+eps)^(alpha-1) dt_g v_m."""
    V, _, w = basis.tables(quad)
    u = lifted_values(state.xi, state.t, problem, basis, quad)
    alpha = problem.exponents.alpha
    dtg = np.asarray(problem.dt_g(quad.nodes, state.t), dtype=float)
    return V.T @ (w * alpha * _mass_weight(u, alpha, state.epsilon) * dtg)


def assemble_G(state: GalerkinState, problem, basis, quad) -> np.ndarray:
    """Flux load G_m = int A(x, t, u, grad u) . grad v_m."""
    return _flux_load(state.xi, state.t, problem, basis, quad)


def _flux_load(xi, t, problem, basis, quad):
    """Flux load for a single coefficient vector (n,) or a batch (n, B)."""
    V, Gr, w = basis.tables(quad)
    xi = np.asarray(xi, dtype=float)
    grad_g = problem.grad_g_at(quad.nodes, t)  # (Q, N)
    u = lifted_values(xi, t, problem, basis, quad)
    if xi.ndim == 1:
        grad_u = grad_g + np.einsum("qnd,n->qd", Gr, xi, optimize=True)
    else:
        grad_u = grad_g[:, None, :] + np.einsum("qnd,nb->qbd", Gr, xi, optimize=True)
    A = np.asarray(problem.field.evaluate(quad.nodes, t, u, grad_u), dtype=float)
    if not np.all(np.isfinite(A)):
        bad = np.argwhere(~np.isfinite(A))[0]
        node = quad.nodes[bad[0]]
        raise NonFiniteFieldError(
            f"flux field returned a non-finite value at node {node}, t={t}"
        )
    if xi.ndim == 1:
        return np.einsum("qd,qmd->m", A * w[:, None], Gr, optimize=True)
    return np.einsum("qbd,qmd->mb", A * w[:, None, None], Gr, optimize=True)


def assemble_J(t: float, problem, basis, quad) -> np.ndarray:
    """Source load J_m = int f(x, t) v_m."""
    V, _, w = basis.tables(quad)
    f_vals = np.asarray(problem.f(quad.nodes, t), dtype=float)
    if not np.all(np.isfinite(f_vals)):
        raise ValueError(f"source term is not finite at t={t}")
    return V.T @ (w * f_vals)


def load_sum(xi, t, epsilon, problem, basis, quad):
    """K + G for a coefficient vector (n,) or a batch of columns (n, B).

    Shared by the time stepper, which differentiates it by finite
    differences column by column.
    """
    V, _, w = basis.tables(quad)
    xi = np.asarray(xi, dtype=float)
    u = lifted_values(xi, t, problem, basis, quad)
    alpha = problem.exponents.alpha
    dtg = np.asarray(problem.dt_g(quad.nodes, t), dtype=float)
    weight = alpha * _mass_weight(u, alpha, epsilon)
    if xi.ndim == 1:
        K = V.T @ (w * weight * dtg)
    else:
        K = V.T @ (weight * (w * dtg)[:, None])
    return K + _flux_load(xi, t, problem, basis, quad)


def spd_solve(F: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve F x = rhs by Cholesky, surfacing loss of positive definiteness."""
    try:
        return cho_solve(cho_factor(F, lower=True), rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises its own
        raise MassMatrixNotSPDError(str(exc)) from exc
    except Exception as exc:
        raise MassMatrixNotSPDError(
            "weighted mass matrix is not positive definite; decrease the "
            "quadrature spacing or increase epsilon"
        ) from exc


def reduced_rhs(state: GalerkinState, problem, basis, quad) -> np.ndarray:
    """H = F^{-1}(J - K - G), the explicit-form right-hand side."""
    F = assemble_F(state, problem, basis, quad)
    rhs = (
        assemble_J(state.t, problem, basis, quad)
        - assemble_K(state, problem, basis, quad)
        - assemble_G(state, problem, basis, quad)
    )
    return spd_solve(F, rhs)


# --- structure-condition audit ----------------------------------------------


@dataclass(frozen=True)
class ConditionAudit:
    condition: str
    samples: int
    violations: int
    worst_margin: float
    passed: bool


@dataclass(frozen=True)
class StructureAuditReport:
    checks: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def rows(self):
        for c in self.checks:
            yield (c.condition, c.samples, c.violations, c.worst_margin, c.passed)


AUDIT_SLACK = 1e-10


def structure_condition_audit(
    field: VectorFieldSpec,
    exponents: Exponents,
    samples: int,
    seed: int,
    domain: BoxDomain = None,
    horizon: float = 1.0,
) -> StructureAuditReport:
    """Probe coercivity, growth, monotonicity, u-Lipschitz continuity and the
    declared flags on random samples.  Violations are reported as data."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    N = exponents.p.size
    if domain is None:
        domain = BoxDomain(np.zeros(N), np.ones(N))
    rng = np.random.default_rng(seed)
    X = domain.lower + rng.random((samples, N)) * domain.lengths
    t1, t2 = rng.uniform(0.0, horizon, size=2)
    U1 = rng.standard_normal(samples) * 10.0 ** rng.uniform(-2, 2, samples)
    U2 = rng.standard_normal(samples) * 10.0 ** rng.uniform(-2, 2, samples)
    XI = rng.standard_normal((samples, N)) * 10.0 ** rng.uniform(-2, 2, (samples, 1))
    ETA = rng.standard_normal((samples, N)) * 10.0 ** rng.uniform(-2, 2, (samples, 1))

    p = exponents.p
    checks = []

    def record(condition, margins, strict=False):
        # margins >= 0 (or > 0 for strict) is the asserted condition
        margins = np.asarray(margins, dtype=float)
        scale = np.maximum(np.abs(margins), 1.0)
        bad = margins < (-AUDIT_SLACK * scale if not strict else 0.0)
        checks.append(
            ConditionAudit(
                condition=condition,
                samples=margins.size,
                violations=int(np.count_nonzero(bad)),
                worst_margin=float(np.min(margins)) if margins.size else 0.0,
                passed=not np.any(bad),
            )
        )

    A1 = np.asarray(field.evaluate(X, t1, U1, XI), dtype=float)
    a_vals = field.a_tilde_at(X, t1)
    coercivity = (
        np.sum(A1 * XI, axis=1)
        - np.sum(np.abs(XI) ** p, axis=1) / field.Lambda
        + a_vals
    )
    record("coercivity", coercivity)

    growth_env = (np.sum(np.abs(XI) ** p, axis=1) + field.b_tilde_at(X, t1))[:, None]
    growth = field.Lambda * growth_env ** ((p - 1.0) / p) - np.abs(A1)
    record("growth", growth.ravel())

    A_eta = np.asarray(field.evaluate(X, t1, U1, ETA), dtype=float)
    mono = np.sum((A1 - A_eta) * (XI - ETA), axis=1)
    record("monotonicity_weak", mono)
    if field.strictly_monotone:
        distinct = np.any(XI != ETA, axis=1)
        record("monotonicity_strict", mono[distinct], strict=True)

    if field.lipschitz_in_u:
        A2 = np.asarray(field.evaluate(X, t1, U2, XI), dtype=float)
        env = (field.c_tilde_at(X) + np.sum(np.abs(XI) ** p, axis=1))[:, None] ** (
            (p - 1.0) / p
        )
        du = np.abs(U1 - U2)[:, None]
        num = np.abs(A1 - A2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where((num == 0.0), 0.0, num / (du * env))
        worst = float(np.max(ratios)) if ratios.size else 0.0
        checks.append(
            ConditionAudit(
                condition="lipschitz_in_u",
                samples=num.size,
                violations=int(np.count_nonzero(~np.isfinite(ratios))),
                worst_margin=worst,
                passed=bool(np.all(np.isfinite(ratios))),
            )
        )

    if field.time_independent:
        A_t2 = np.asarray(field.evaluate(X, t2, U1, XI), dtype=float)
        drift = np.max(np.abs(A1 - A_t2))
        checks.append(
            ConditionAudit(
                condition="time_independent",
                samples=samples,
                violations=int(drift > AUDIT_SLACK),
                worst_margin=float(-drift),
                passed=bool(drift <= AUDIT_SLACK),
            )
        )

    return StructureAuditReport(checks)
