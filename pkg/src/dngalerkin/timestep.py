"""Implicit one-step integration of the stiff coefficient system

    F(xi, t) xi' + K(xi, t) + G(xi, t) = J(t).

The default scheme is implicit Euler with a damped Newton solve; an
implicit-midpoint variant is available where second-order accuracy in time
is required.  Steps that fail to converge are retried on halved intervals
down to dt_min.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import assembly
from .assembly import GalerkinState
from .basis import project_l2

SCHEMES = ("implicit_euler", "midpoint")


class StepConvergenceError(RuntimeError):
    """Newton failed to converge even at the minimum step size."""

    def __init__(self, t, dt, residual):
        super().__init__(
            f"step at t={t:.6g} failed at dt={dt:.3g} with residual {residual:.3e}"
        )
        self.t = t
        self.dt = dt
        self.residual = residual


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    newton_tol: float = 1e-10
    newton_max_iters: int = 30
    dt_min: float = 1e-8
    scheme: str = "implicit_euler"

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if not (0 < self.dt_min <= self.dt):
            raise ValueError("dt_min must satisfy 0 < dt_min <= dt")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


@dataclass(frozen=True)
class StepRecord:
    t: float
    xi: np.ndarray
    newton_iters: int
    residual: float


FD_STEP = 1e-6
MAX_BACKTRACKS = 8


def _newton_solve(xi_old, t_old, dt, epsilon, problem, basis, quad, config, guess):
    """Solve one implicit step; returns (xi_new, iterations, residual_norm).

    Residual: R(y) = F(z, ts)(y - xi_old) + dt (K + G - J)(z, ts) with
    z = y (implicit Euler) or z = (y + xi_old)/2 at the midpoint time.
    """
    midpoint = config.scheme == "midpoint"
    ts = t_old + (0.5 * dt if midpoint else dt)
    J_vec = assembly.assemble_J(ts, problem, basis, quad)
    tol = config.newton_tol * (1.0 + np.linalg.norm(J_vec))
    chain = 0.5 if midpoint else 1.0

    def stage(y):
        return 0.5 * (y + xi_old) if midpoint else y

    def residual(y):
        z = stage(y)
        state = GalerkinState(xi=z, t=ts, epsilon=epsilon)
        F = assembly.assemble_F(state, problem, basis, quad)
        KG = assembly.load_sum(z, ts, epsilon, problem, basis, quad)
        return F @ (y - xi_old) + dt * (KG - J_vec), F, z, KG

    y = np.array(guess, dtype=float)
    R, F, z, KG = residual(y)
    rnorm = np.linalg.norm(R)
    iters = 0
    while rnorm > tol:
        if iters >= config.newton_max_iters:
            return None, iters, rnorm
        # Jacobian: exact weighted-mass part, finite differences for K+G
        steps = FD_STEP * (1.0 + np.abs(z))
        Z = z[:, None] + np.diag(steps)
        KG1 = assembly.load_sum(Z, ts, epsilon, problem, basis, quad)
        Jac = F + chain * dt * (KG1 - KG[:, None]) / steps[None, :]
        try:
            delta = np.linalg.solve(Jac, -R)
        except np.linalg.LinAlgError:
            return None, iters, rnorm
        scale = 1.0
        accepted = False
        for _ in range(MAX_BACKTRACKS + 1):
            R_new, F_new, z_new, KG_new = residual(y + scale * delta)
            if np.linalg.norm(R_new) < rnorm:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            return None, iters + 1, rnorm
        y = y + scale * delta
        R, F, z, KG = R_new, F_new, z_new, KG_new
        rnorm = np.linalg.norm(R_new)
        iters += 1
        if not np.isfinite(rnorm):
            return None, iters, rnorm
    return y, iters, rnorm


def step(state: GalerkinState, dt, problem, basis, quad, config: StepperConfig,
         guess=None):
    """Advance one interval of length dt, halving internally on Newton
    failure.  Returns (new_state, StepRecord) or raises StepConvergenceError
    once dt_min is reached."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    guess = state.xi if guess is None else guess
    y, iters, rnorm = _newton_solve(
        state.xi, state.t, dt, state.epsilon, problem, basis, quad, config, guess
    )
    if y is not None:
        new_state = GalerkinState(xi=y, t=state.t + dt, epsilon=state.epsilon)
        return new_state, StepRecord(new_state.t, y, iters, rnorm)
    if dt / 2.0 < config.dt_min:
        raise StepConvergenceError(state.t, dt, rnorm)
    mid_state, rec1 = step(state, dt / 2.0, problem, basis, quad, config, guess=None)
    end_state, rec2 = step(mid_state, dt / 2.0, problem, basis, quad, config,
                           guess=guess)
    record = StepRecord(
        end_state.t,
        end_state.xi,
        rec1.newton_iters + rec2.newton_iters,
        max(rec1.residual, rec2.residual),
    )
    return end_state, record


def time_grid(horizon: float, dt: float) -> np.ndarray:
    """Uniform grid hitting 0 and the horizon exactly; the effective dt is
    shrunk when dt does not divide the horizon."""
    steps = max(1, int(np.ceil(horizon / dt - 1e-12)))
    return np.linspace(0.0, horizon, steps + 1)


def integrate(problem, basis, quad, config: StepperConfig, epsilon,
              warm_start=None, step_log=None):
    """March the coefficient system from the projected initial data to the
    horizon.  Returns (times, coefficients, records).

    warm_start, when given, is a callable t -> coefficient vector used as
    the Newton initial guess at each target time (epsilon continuation).
    step_log, when given, receives (t, residual, newton_iters) tuples.
    """
    times = time_grid(problem.horizon, config.dt)
    g0 = lambda X: np.asarray(problem.g(X, 0.0), dtype=float)
    initial = lambda X: np.asarray(problem.u0(X), dtype=float) - g0(X)
    xi0 = project_l2(initial, basis, quad)
    coeffs = np.empty((times.size, xi0.size))
    coeffs[0] = xi0
    records = []
    state = GalerkinState(xi=xi0, t=0.0, epsilon=epsilon)
    for k in range(times.size - 1):
        dt = times[k + 1] - times[k]
        guess = warm_start(times[k + 1]) if warm_start is not None else None
        state, record = step(state, dt, problem, basis, quad, config, guess=guess)
        coeffs[k + 1] = state.xi
        records.append(record)
        if step_log is not None:
            step_log.append((record.t, record.residual, record.newton_iters))
    return times, coeffs, records
