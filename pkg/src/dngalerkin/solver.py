"""Problem-level drivers: the initial-boundary value solve with epsilon
continuation, and the expanding-box mode that emulates the whole-space
problem by nested boxes with zero boundary data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_trapz = getattr(np, "trapezoid", np.trapz)

from .basis import BoxDomain, GalerkinBasis, Quadrature, build_basis, \
    default_quadrature_order, tensor_quadrature
from .assembly import Exponents, ProblemData, VectorFieldSpec
from .timestep import StepperConfig, integrate


class SolverFailure(RuntimeError):
    """An epsilon level failed to integrate; completed levels are retained."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class EpsilonSchedule:
    """Strictly decreasing positive regularization levels."""

    values: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValueError("schedule must contain at least one level")
        if any(v <= 0 or not np.isfinite(v) for v in values):
            raise ValueError("epsilon levels must be positive")
        if any(b >= a for a, b in zip(values, values[1:])):
            raise ValueError("epsilon levels must be strictly decreasing")
        object.__setattr__(self, "values", values)


def default_epsilon_schedule(levels: int = 4) -> EpsilonSchedule:
    return EpsilonSchedule(tuple(10.0 ** (-k) for k in range(1, levels + 1)))


@dataclass(frozen=True, eq=False)
class SolutionTrajectory:
    """Coefficient history of one solve: u(x, t) = g(x, t) + sum xi_k(t) v_k(x).

    Evaluation between grid times interpolates the coefficients linearly.
    """

    times: np.ndarray
    coefficients: np.ndarray
    basis: GalerkinBasis
    problem: ProblemData
    epsilon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        coeffs = np.asarray(self.coefficients, dtype=float)
        if times[0] != 0.0 or abs(times[-1] - self.problem.horizon) > 1e-12:
            raise ValueError("trajectory must cover [0, T]")
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "coefficients", coeffs)

    def coefficients_at(self, t: float) -> np.ndarray:
        times = self.times
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise ValueError(f"time {t} outside [0, {times[-1]}]")
        t = min(max(t, times[0]), times[-1])
        k = int(np.searchsorted(times, t, side="right") - 1)
        if k >= times.size - 1:
            return self.coefficients[-1]
        lam = (t - times[k]) / (times[k + 1] - times[k])
        return (1.0 - lam) * self.coefficients[k] + lam * self.coefficients[k + 1]

    def evaluate(self, x, t: float) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if not self.basis.domain.contains(x):
            raise ValueError(f"point {x} outside the domain")
        modes = self.basis.eval_modes(x)
        g_val = float(np.asarray(self.problem.g(x[None, :], t), dtype=float)[0])
        return g_val + float(modes @ self.coefficients_at(t))

    def values_on(self, X, t: float) -> np.ndarray:
        """Vectorized evaluation on points X (Q, N) at one time."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        V = self.basis.eval_matrix(X)
        g_vals = np.asarray(self.problem.g(X, t), dtype=float)
        return g_vals + V @ self.coefficients_at(t)

    # --- norm and energy queries ------------------------------------------

    def sup_power_norm(self, quad: Quadrature) -> float:
        """max over grid times of int |u(t)|^(alpha+1) dx."""
        a1 = self.problem.exponents.alpha + 1.0
        V, _, w = self.basis.tables(quad)
        worst = 0.0
        for k, t in enumerate(self.times):
            g_vals = np.asarray(self.problem.g(quad.nodes, t), dtype=float)
            u = g_vals + V @ self.coefficients[k]
            val = float(w @ np.abs(u) ** a1)
            if not np.isfinite(val):
                raise ValueError(f"non-finite norm at time slice t={t}")
            worst = max(worst, val)
        return worst

    def power_norms_per_time(self, quad: Quadrature) -> np.ndarray:
        a1 = self.problem.exponents.alpha + 1.0
        V, _, w = self.basis.tables(quad)
        out = np.empty(self.times.size)
        for k, t in enumerate(self.times):
            g_vals = np.asarray(self.problem.g(quad.nodes, t), dtype=float)
            out[k] = float(w @ np.abs(g_vals + V @ self.coefficients[k]) ** a1)
        return out

    def gradient_integrals(self, quad: Quadrature) -> np.ndarray:
        """Per-direction space-time integrals of |d_j u|^(p_j) (trapezoid in
        time on the trajectory grid)."""
        p = self.problem.exponents.p
        _, Gr, w = self.basis.tables(quad)
        slices = np.empty((self.times.size, p.size))
        for k, t in enumerate(self.times):
            grad_u = self.problem.grad_g_at(quad.nodes, t) + np.einsum(
                "qnd,n->qd", Gr, self.coefficients[k], optimize=True
            )
            slices[k] = w @ (np.abs(grad_u) ** p)
        return _trapz(slices, self.times, axis=0)

    def spacetime_power_distance(self, other: "SolutionTrajectory",
                                 quad: Quadrature) -> float:
        """L^(alpha+1)(Omega_T) distance to another trajectory on the same
        basis, grid, and boundary lift."""
        if other.basis is not self.basis or other.times.shape != self.times.shape:
            raise ValueError("trajectories are not comparable")
        a1 = self.problem.exponents.alpha + 1.0
        V, _, w = self.basis.tables(quad)
        diffs = np.empty(self.times.size)
        for k in range(self.times.size):
            delta = V @ (self.coefficients[k] - other.coefficients[k])
            diffs[k] = float(w @ np.abs(delta) ** a1)
        return float(_trapz(diffs, self.times) ** (1.0 / a1))


@dataclass(frozen=True)
class ContinuationResult:
    """Trajectories per epsilon level plus the successive-distance
    diagnostic (empirical Cauchy behavior of the regularized family)."""

    trajectories: list
    pairwise_distances: list
    basis: GalerkinBasis
    quadrature: Quadrature

    @property
    def final(self) -> SolutionTrajectory:
        return self.trajectories[-1]


def solve_cauchy_dirichlet(
    problem: ProblemData,
    modes_per_dim: int,
    schedule: EpsilonSchedule,
    stepper: StepperConfig,
    quadrature_order: int = None,
    step_log=None,
) -> ContinuationResult:
    """Solve the initial-boundary value problem once per epsilon level,
    warm-starting each level's Newton iterations from the previous one."""
    basis = build_basis(problem.domain, modes_per_dim)
    order = quadrature_order or default_quadrature_order(modes_per_dim)
    quad = tensor_quadrature(problem.domain, order)
    sample_times = np.linspace(0.0, problem.horizon, 5)
    problem.validate_on(quad, sample_times)

    trajectories = []
    previous = None
    for eps in schedule.values:
        warm = previous.coefficients_at if previous is not None else None
        try:
            times, coeffs, _ = integrate(
                problem, basis, quad, stepper, eps,
                warm_start=warm, step_log=step_log,
            )
        except Exception as exc:
            raise SolverFailure(
                f"epsilon level {eps} failed: {exc}", partial=trajectories
            ) from exc
        traj = SolutionTrajectory(times, coeffs, basis, problem, eps)
        trajectories.append(traj)
        previous = traj
    distances = [
        trajectories[i].spacetime_power_distance(trajectories[i + 1], quad)
        for i in range(len(trajectories) - 1)
    ]
    return ContinuationResult(trajectories, distances, basis, quad)


@dataclass(frozen=True, eq=False)
class WholeSpaceData:
    """Data of the whole-space problem: globally defined u0 and f (decaying
    or compactly supported), exponents, flux field, horizon."""

    u0: callable
    f: callable
    exponents: Exponents
    field: VectorFieldSpec
    horizon: float


def _zero_xt(X, t=0.0):
    return np.zeros(np.asarray(X).shape[0])


def _zero_grad(X, t=0.0):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.zeros_like(X)


def restrict_to_box(data: WholeSpaceData, half_width: float) -> ProblemData:
    """The zero-boundary problem on (-L, L)^N feeding the exhaustion."""
    N = data.exponents.p.size
    domain = BoxDomain(-half_width * np.ones(N), half_width * np.ones(N))
    return ProblemData(
        domain=domain,
        horizon=data.horizon,
        u0=data.u0,
        g=_zero_xt,
        dt_g=_zero_xt,
        f=data.f,
        exponents=data.exponents,
        field=data.field,
        grad_g=_zero_grad,
    )


@dataclass(frozen=True)
class ExpandingBoxResult:
    half_widths: tuple
    results: list
    energies: list
    common_region_diffs: list


def solve_cauchy_expanding(
    data: WholeSpaceData,
    box_half_widths,
    modes_per_dim: int,
    schedule: EpsilonSchedule,
    stepper: StepperConfig,
    quadrature_order: int = None,
    common_resolution: int = 33,
    time_stride: int = 10,
) -> ExpandingBoxResult:
    """Solve on nested boxes with zero boundary data and compare the
    trajectories on the smallest box (the common region).

    energies[i] is the data-independent side of the energy estimate,
    sup_t int |u|^(alpha+1) + sum_j iint |d_j u|^(p_j), for box i;
    common_region_diffs[i] is the max absolute difference between boxes
    i and i+1 sampled on a lattice inside the smallest box.
    """
    widths = tuple(float(L) for L in box_half_widths)
    if any(b <= a for a, b in zip(widths, widths[1:])):
        raise ValueError("box half-widths must be strictly increasing")
    results = []
    energies = []
    for L in widths:
        problem = restrict_to_box(data, L)
        res = solve_cauchy_dirichlet(
            problem, modes_per_dim, schedule, stepper, quadrature_order
        )
        traj = res.final
        energy = traj.sup_power_norm(res.quadrature) + float(
            np.sum(traj.gradient_integrals(res.quadrature))
        )
        results.append(res)
        energies.append(energy)

    N = data.exponents.p.size
    axes = [np.linspace(-widths[0], widths[0], common_resolution)] * N
    grids = np.meshgrid(*axes, indexing="ij")
    lattice = np.stack([g.ravel() for g in grids], axis=-1)
    times = results[0].final.times[::time_stride]
    diffs = []
    for a, b in zip(results, results[1:]):
        worst = 0.0
        for t in times:
            va = a.final.values_on(lattice, float(t))
            vb = b.final.values_on(lattice, float(t))
            worst = max(worst, float(np.max(np.abs(va - vb))))
        diffs.append(worst)
    return ExpandingBoxResult(widths, results, energies, diffs)


def evaluate(traj: SolutionTrajectory, x, t: float) -> float:
    """Point evaluation with domain/horizon validation."""
    if t < -1e-12 or t > traj.problem.horizon + 1e-12:
        raise ValueError(f"time {t} outside [0, {traj.problem.horizon}]")
    return traj.evaluate(x, float(np.clip(t, 0.0, traj.problem.horizon)))
