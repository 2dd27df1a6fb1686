"""Config-file loading: INI-style key/value blocks describing a problem,
its discretization, the regularization schedule, requested checks, and
output options.  Parsing is total: every field either validates or raises
ConfigError naming the section and key.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from .assembly import Exponents, ProblemData, VectorFieldSpec, model_field
from .basis import BoxDomain
from .expr import ExprError, compile_expression, compile_spacetime, \
    spacetime_callable, spatial_names
from .solver import EpsilonSchedule, WholeSpaceData
from .timestep import SCHEMES, StepperConfig


class ConfigError(ValueError):
    def __init__(self, section, key, message):
        super().__init__(f"[{section}] {key}: {message}")
        self.section = section
        self.key = key


def read_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None,
                                   inline_comment_prefixes=("#",))
    try:
        with open(path, "r") as handle:
            cp.read_file(handle, source=str(path))
    except OSError as exc:
        raise ConfigError("file", str(path), f"cannot read config: {exc}")
    except configparser.Error as exc:
        raise ConfigError("file", str(path), f"parse error: {exc}")
    return cp


def _get(cp, section, key, default=None, required=False):
    if not cp.has_section(section):
        if required:
            raise ConfigError(section, key, "missing section")
        return default
    if not cp.has_option(section, key):
        if required:
            raise ConfigError(section, key, "missing required key")
        return default
    return cp.get(section, key).strip()


def get_float(cp, section, key, default=None, required=False):
    raw = _get(cp, section, key, None, required)
    if raw is None:
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(section, key, f"expected a number, got {raw!r}")


def get_int(cp, section, key, default=None, required=False):
    raw = _get(cp, section, key, None, required)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(section, key, f"expected an integer, got {raw!r}")


def get_bool(cp, section, key, default=False):
    raw = _get(cp, section, key)
    if raw is None:
        return default
    lowered = raw.lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(section, key, f"expected a boolean, got {raw!r}")


def get_floats(cp, section, key, default=None, required=False):
    raw = _get(cp, section, key, None, required)
    if raw is None:
        return default
    try:
        return [float(tok) for tok in raw.split()]
    except ValueError:
        raise ConfigError(section, key, f"expected numbers, got {raw!r}")


def get_expr_callable(cp, section, key, dim, default="0", with_time=True):
    raw = _get(cp, section, key)
    text = raw if raw is not None else default
    try:
        expr = compile_spacetime(text, dim, with_time=with_time)
    except ExprError as exc:
        raise ConfigError(section, key, str(exc))
    return spacetime_callable(expr, dim)


def _expression_field(cp, section, dim, p):
    names, aliases = spatial_names(dim)
    allowed = set(names) | set(aliases) | {"t", "u"} | {
        f"xi_{i + 1}" for i in range(dim)
    }
    components = []
    for i in range(dim):
        key = f"field_expr_{i + 1}"
        raw = _get(cp, section, key, required=True)
        try:
            components.append(compile_expression(raw, allowed))
        except ExprError as exc:
            raise ConfigError(section, key, str(exc))

    def evaluate(X, t, U, XI):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        U = np.asarray(U, dtype=float)
        XI = np.asarray(XI, dtype=float)
        env = {}
        for i in range(dim):
            col = X[:, i]
            env[f"x_{i + 1}"] = col if U.ndim == 1 else col[:, None]
        for alias, target in aliases.items():
            env[alias] = env[target]
        env["t"] = t
        env["u"] = U
        for i in range(dim):
            env[f"xi_{i + 1}"] = XI[..., i]
        out = [np.broadcast_to(np.asarray(c(env), dtype=float), U.shape)
               for c in components]
        return np.stack(out, axis=-1)

    return VectorFieldSpec(
        evaluate=evaluate,
        Lambda=get_float(cp, section, "lambda", 1.0),
        a_tilde=get_float(cp, section, "a_tilde", 0.0),
        b_tilde=get_float(cp, section, "b_tilde", 0.0),
        c_tilde=get_float(cp, section, "c_tilde", 0.0),
        time_independent=get_bool(cp, section, "time_independent", False),
        lipschitz_in_u=get_bool(cp, section, "lipschitz_in_u", False),
        strictly_monotone=get_bool(cp, section, "strictly_monotone", False),
        name="custom",
    )


def build_problem(cp, section="problem") -> ProblemData:
    lower = get_floats(cp, section, "domain_lower", required=True)
    upper = get_floats(cp, section, "domain_upper", required=True)
    try:
        domain = BoxDomain(np.asarray(lower), np.asarray(upper))
    except ValueError as exc:
        raise ConfigError(section, "domain_lower/domain_upper", str(exc))
    dim = domain.dim

    horizon = get_float(cp, section, "horizon", required=True)
    if horizon is None or horizon <= 0:
        raise ConfigError(section, "horizon", "must be positive")
    alpha = get_float(cp, section, "alpha", required=True)
    p = get_floats(cp, section, "p", required=True)
    try:
        exponents = Exponents(alpha=alpha, p=np.asarray(p))
    except ValueError as exc:
        raise ConfigError(section, "alpha/p", str(exc))
    if exponents.p.size != dim:
        raise ConfigError(section, "p", "needs one entry per dimension")

    field_kind = (_get(cp, section, "field", "model") or "model").lower()
    if field_kind == "model":
        field_spec = model_field(exponents.p)
    elif field_kind == "custom":
        field_spec = _expression_field(cp, section, dim, exponents.p)
    else:
        raise ConfigError(section, "field", f"unknown field {field_kind!r}")

    u0 = get_expr_callable(cp, section, "u0", dim, default="0", with_time=False)
    g = get_expr_callable(cp, section, "g", dim, default="0")
    dt_g = get_expr_callable(cp, section, "dt_g", dim, default="0")
    f = get_expr_callable(cp, section, "f", dim, default="0")
    try:
        return ProblemData(
            domain=domain, horizon=horizon, u0=u0, g=g, dt_g=dt_g, f=f,
            exponents=exponents, field=field_spec,
        )
    except ValueError as exc:
        raise ConfigError(section, "problem", str(exc))


@dataclass(frozen=True)
class Discretization:
    modes_per_dim: int
    stepper: StepperConfig
    quadrature_order: int = None  # None -> basis default


def build_discretization(cp, section="discretization") -> Discretization:
    modes = get_int(cp, section, "modes_per_dim", required=True)
    if modes is None or modes < 1:
        raise ConfigError(section, "modes_per_dim", "must be >= 1")
    dt = get_float(cp, section, "dt", required=True)
    scheme = (_get(cp, section, "scheme", "implicit_euler") or "implicit_euler")
    if scheme not in SCHEMES:
        raise ConfigError(section, "scheme", f"must be one of {SCHEMES}")
    try:
        stepper = StepperConfig(
            dt=dt,
            newton_tol=get_float(cp, section, "newton_tol", 1e-10),
            newton_max_iters=get_int(cp, section, "newton_max_iters", 30),
            dt_min=get_float(cp, section, "dt_min", min(dt, 1e-8)),
            scheme=scheme,
        )
    except ValueError as exc:
        raise ConfigError(section, "dt", str(exc))
    order = get_int(cp, section, "quadrature_order", 0)
    return Discretization(
        modes_per_dim=modes,
        stepper=stepper,
        quadrature_order=order if order else None,
    )


def build_schedule(cp, section="schedule") -> EpsilonSchedule:
    values = get_floats(cp, section, "epsilons", default=[1e-1, 1e-2, 1e-3, 1e-4])
    try:
        return EpsilonSchedule(tuple(values))
    except ValueError as exc:
        raise ConfigError(section, "epsilons", str(exc))


@dataclass(frozen=True)
class CheckSettings:
    energy: bool = True
    energy_variation_tol: float = 0.05
    weak_residual: bool = False
    weak_residual_tol: float = 1e-2
    weak_residual_modes: int = 4
    identity: bool = False
    identity_tol: float = 1e-2


def build_checks(cp, section="checks") -> CheckSettings:
    return CheckSettings(
        energy=get_bool(cp, section, "energy", True),
        energy_variation_tol=get_float(cp, section, "energy_variation_tol", 0.05),
        weak_residual=get_bool(cp, section, "weak_residual", False),
        weak_residual_tol=get_float(cp, section, "weak_residual_tol", 1e-2),
        weak_residual_modes=get_int(cp, section, "weak_residual_modes", 4),
        identity=get_bool(cp, section, "identity", False),
        identity_tol=get_float(cp, section, "identity_tol", 1e-2),
    )


@dataclass(frozen=True)
class OutputSettings:
    directory: str = "out"
    verbose: bool = False
    lattice: int = 33
    time_stride: int = 10


def build_output(cp, section="output") -> OutputSettings:
    return OutputSettings(
        directory=_get(cp, section, "directory", "out") or "out",
        verbose=get_bool(cp, section, "verbose", False),
        lattice=get_int(cp, section, "lattice", 33),
        time_stride=get_int(cp, section, "time_stride", 10),
    )


def build_whole_space(cp, problem_section="problem") -> WholeSpaceData:
    """Whole-space data for the expanding-box mode: u0 and f are read as
    global expressions; the boundary lift is fixed to zero."""
    alpha = get_float(cp, problem_section, "alpha", required=True)
    p = get_floats(cp, problem_section, "p", required=True)
    try:
        exponents = Exponents(alpha=alpha, p=np.asarray(p))
    except ValueError as exc:
        raise ConfigError(problem_section, "alpha/p", str(exc))
    dim = exponents.p.size
    horizon = get_float(cp, problem_section, "horizon", required=True)
    field_kind = (_get(cp, problem_section, "field", "model") or "model").lower()
    if field_kind == "model":
        field_spec = model_field(exponents.p)
    else:
        field_spec = _expression_field(cp, problem_section, dim, exponents.p)
    u0 = get_expr_callable(cp, problem_section, "u0", dim, "0", with_time=False)
    f = get_expr_callable(cp, problem_section, "f", dim, "0")
    return WholeSpaceData(u0=u0, f=f, exponents=exponents, field=field_spec,
                          horizon=horizon)
