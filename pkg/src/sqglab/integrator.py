"""Integrating-factor Heun scheme for forced critical SQG and 2D NSE.

The stiff linear part (damping + viscosity) and the constant forcing are
integrated exactly; the quadratic term is advanced with a two-stage Heun
update.  With ``L`` the linear symbol, ``E = exp(-L dt)`` and
``phi = (1 - E)/L``::

    pred  = E y + phi f + dt E N(y)
    y_new = E y + phi f + dt/2 (E N(y) + N(pred))

Steps are split into equal substeps whenever the CFL number
``dt * max|u| * n / (2 pi)`` exceeds ``config.cfl``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from .diagnostics import Trajectory, TrajectoryRecord
from .nonlinear import bilinear_coeffs, transport_coeffs
from .spectral import Grid, SpectralField, VelocityField, leray_project, norm

log = logging.getLogger(__name__)

EQUATIONS = ("sqg", "nse")


class NumericalFailure(RuntimeError):
    """Non-finite state encountered; ``snapshot`` holds the last finite state."""

    def __init__(self, message: str, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass(frozen=True)
class SolverConfig:
    equation: str
    nu: float
    grid: Grid
    dt: float
    t_end: float
    gamma: float = 0.0
    forcing: SpectralField | VelocityField | None = None
    seed: int = 0
    sample_stride: int = 1
    cfl: float = 0.5
    discard_fraction: float = 0.2
    linf_refine: int = 1
    eigenvalue: float | None = None

    def __post_init__(self):
        if self.equation not in EQUATIONS:
            raise ValueError(f"equation must be one of {EQUATIONS}")
        if self.nu < 0 or self.gamma < 0:
            raise ValueError("nu and gamma must be nonnegative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def linear_symbol(self) -> np.ndarray:
        g = self.grid
        sym = self.nu * g.ksq
        if self.equation == "sqg":
            sym = sym + self.gamma * (1.0 + g.kabs)
        return sym

    def forcing_coeffs(self) -> np.ndarray:
        g = self.grid
        if self.forcing is None:
            shape = g.spectral_shape if self.equation == "sqg" else (2,) + g.spectral_shape
            return np.zeros(shape, dtype=complex)
        c = self.forcing.coeffs * g.mask
        c[..., 0, 0] = 0.0
        return c

    def stokes_eigenvalue(self) -> float:
        """lambda of the forcing: stored value or its Rayleigh quotient."""
        if self.eigenvalue is not None:
            return self.eigenvalue
        if self.forcing is None:
            return 1.0
        l2 = norm(self.forcing) ** 2
        return norm(self.forcing, "H1") ** 2 / l2 if l2 > 0 else 1.0

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass
class TimeState:
    """Solution at time ``t`` plus cumulative energy channels.

    ``injected`` = int (f, y) dt, ``damped`` = int gamma ||y||_{H1/2}^2 dt,
    ``viscous`` = int nu ||grad y||^2 dt, all trapezoidal per (sub)step.
    """

    t: float
    field: SpectralField | VelocityField
    injected: float = 0.0
    damped: float = 0.0
    viscous: float = 0.0
    residual: float = 0.0
    abs_residual: float = 0.0
    cum_h12sq: float = 0.0
    cum_gradsq: float = 0.0
    steps: int = 0
    substeps: int = 0
    integrals: dict = field(default_factory=dict)
    edge: dict = field(default_factory=dict, repr=False)


def channels(y: np.ndarray, fc: np.ndarray, grid: Grid) -> tuple[float, float, float, float]:
    """(||y||^2, ||y||_{H1/2}^2, ||grad y||^2, (f, y)) from coefficients."""
    w = grid.weights
    p = np.abs(y) ** 2
    if p.ndim == 3:
        p = p.sum(axis=0)
    l2 = float(np.sum(w * p))
    h12 = float(np.sum(w * (1.0 + grid.kabs) * p))
    gr = float(np.sum(w * grid.ksq * p))
    inj = float(np.sum(w * (fc * np.conj(y)).real))
    return l2, h12, gr, inj


def energy_budget(before, after, config: SolverConfig, dt: float | None = None) -> float:
    """Per-step residual of 1/2 d||y||^2/dt + gamma||y||_{H1/2}^2 + nu||grad y||^2 - (f, y).

    ``before``/``after`` are consecutive :class:`TimeState` objects (or raw
    fields); the dissipation and injection terms use the trapezoid rule.
    """
    if dt is None:
        dt = after.t - before.t
    fa = before.field if isinstance(before, TimeState) else before
    fb = after.field if isinstance(after, TimeState) else after
    fc = config.forcing_coeffs()
    gamma = config.gamma if config.equation == "sqg" else 0.0
    a = channels(fa.coeffs, fc, config.grid)
    b = channels(fb.coeffs, fc, config.grid)
    rate_a = gamma * a[1] + config.nu * a[2] - a[3]
    rate_b = gamma * b[1] + config.nu * b[2] - b[3]
    return 0.5 * (b[0] - a[0]) + 0.5 * dt * (rate_a + rate_b)


class _Scheme:
    """Cached exponentials and the nonlinear operator for one configuration."""

    def __init__(self, config: SolverConfig, integrands: Mapping[str, Callable] | None = None):
        self.config = config
        self.integrands = dict(integrands or {})
        self.grid = config.grid
        self.sym = config.linear_symbol()
        self.fc = config.forcing_coeffs()
        self.gamma = config.gamma if config.equation == "sqg" else 0.0
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
        self.sqg = config.equation == "sqg"

    def factors(self, h: float):
        if h not in self._cache:
            e = np.exp(-self.sym * h)
            phi = np.full_like(self.sym, h)
            nz = self.sym > 0
            phi[nz] = -np.expm1(-self.sym[nz] * h) / self.sym[nz]
            self._cache[h] = (e, phi * self.fc)
        return self._cache[h]

    def rhs(self, y: np.ndarray) -> tuple[np.ndarray, float]:
        """Explicit term -N(y) and max |u| on the grid."""
        g = self.grid
        if self.sqg:
            out, u = transport_coeffs(g, y, return_velocity=True)
        else:
            out, u = bilinear_coeffs(g, y, return_velocity=True)
        umax = float(np.sqrt(np.max(u[0] ** 2 + u[1] ** 2)))
        return -out, umax

    def channels(self, y):
        return channels(y, self.fc, self.grid)

    def integrand_values(self, y) -> dict:
        return {name: float(fn(y)) for name, fn in self.integrands.items()}

    def substep(self, y, n0, h):
        e, forced = self.factors(h)
        base = e * y + forced
        en0 = e * n0
        pred = base + h * en0
        n1, _ = self.rhs(pred)
        return base + 0.5 * h * (en0 + n1)


def _advance(state: TimeState, scheme: _Scheme, dt: float) -> TimeState:
    cfg = scheme.config
    g = cfg.grid
    y = state.field.coeffs
    n0, umax = scheme.rhs(y)
    cfl = dt * umax * g.n / (2 * np.pi)
    m = max(1, math.ceil(cfl / cfg.cfl - 1e-12)) if cfl > cfg.cfl else 1
    h = dt / m
    ch = scheme.channels(y)
    new = TimeState(**{**state.__dict__})
    new.integrals = dict(state.integrals)
    gv = state.edge if state.edge else scheme.integrand_values(y)
    for i in range(m):
        if i:
            n0, _ = scheme.rhs(y)
        y_next = scheme.substep(y, n0, h)
        ch_next = scheme.channels(y_next)
        rate_a = scheme.gamma * ch[1] + cfg.nu * ch[2] - ch[3]
        rate_b = scheme.gamma * ch_next[1] + cfg.nu * ch_next[2] - ch_next[3]
        res = 0.5 * (ch_next[0] - ch[0]) + 0.5 * h * (rate_a + rate_b)
        new.injected += 0.5 * h * (ch[3] + ch_next[3])
        new.damped += 0.5 * h * scheme.gamma * (ch[1] + ch_next[1])
        new.viscous += 0.5 * h * cfg.nu * (ch[2] + ch_next[2])
        new.cum_h12sq += 0.5 * h * (ch[1] + ch_next[1])
        new.cum_gradsq += 0.5 * h * (ch[2] + ch_next[2])
        new.residual += res
        new.abs_residual += abs(res)
        if scheme.integrands:
            gv_next = scheme.integrand_values(y_next)
            for k, v in gv_next.items():
                new.integrals[k] = new.integrals.get(k, 0.0) + 0.5 * h * (gv[k] + v)
            gv = gv_next
        y, ch = y_next, ch_next
    if not np.all(np.isfinite(y)):
        raise NumericalFailure(f"non-finite state at t={state.t + dt:.6g}", snapshot=state)
    new.field = type(state.field)(g, y)
    new.edge = gv if scheme.integrands else {}
    new.t = state.t + dt
    new.steps += 1
    new.substeps += m
    return new


def initial_state(config: SolverConfig, field0=None) -> TimeState:
    g = config.grid
    if field0 is None:
        shape = g.spectral_shape if config.equation == "sqg" else (2,) + g.spectral_shape
        c = np.zeros(shape, dtype=complex)
    else:
        c = field0.coeffs * g.mask
        c[..., 0, 0] = 0.0
        if config.equation == "nse":
            c = leray_project(VelocityField(g, c)).coeffs
    cls = SpectralField if config.equation == "sqg" else VelocityField
    return TimeState(0.0, cls(g, c))


def step_sqg(state: TimeState, config: SolverConfig, scheme: _Scheme | None = None) -> TimeState:
    """One step of d_t theta + u.grad theta + gamma D theta - nu Delta theta = f."""
    if config.equation != "sqg":
        raise ValueError("step_sqg needs an SQG configuration")
    return _advance(state, scheme or _Scheme(config), config.dt)


def step_nse(state: TimeState, config: SolverConfig, scheme: _Scheme | None = None) -> TimeState:
    """One step of d_t u + nu A u + B(u, u) = f."""
    if config.equation != "nse":
        raise ValueError("step_nse needs an NSE configuration")
    return _advance(state, scheme or _Scheme(config), config.dt)


Observer = Callable[[TimeState, SolverConfig], float]


def _record(state: TimeState, config: SolverConfig, scheme: _Scheme, residual: float, observers) -> TrajectoryRecord:
    f = state.field
    l2, h12, gr, inj = scheme.channels(f.coeffs)
    delta = mu = None
    if config.equation == "nse":
        lam = config.stokes_eigenvalue()
        delta = gr - lam * l2
        mu = gr / l2 if l2 > 0 else float("nan")
    rec = TrajectoryRecord(
        t=state.t,
        l2sq=l2,
        h12sq=h12,
        gradsq=gr,
        linf=norm(f, "Lp", p=np.inf, refine=config.linf_refine),
        inject=inj,
        residual=residual,
        delta=delta,
        mu=mu,
        l1=norm(f, "Lp", p=1),
        cum_inject=state.injected,
        cum_h12sq=state.cum_h12sq,
        cum_gradsq=state.cum_gradsq,
        cum_abs_residual=state.abs_residual,
    )
    if observers:
        rec.extras = {name: float(fn(state, config)) for name, fn in observers.items()}
    for name in scheme.integrands:
        rec.extras["int_" + name] = state.integrals.get(name, 0.0)
    return rec


def simulate(
    config: SolverConfig,
    field0=None,
    observers: Mapping[str, Observer] | None = None,
    store_states: bool = False,
    state: TimeState | None = None,
    integrands: Mapping[str, Callable[[np.ndarray], float]] | None = None,
) -> Trajectory:
    """Advance from ``field0`` (or a given ``state``) to ``t_end``, sampling
    every ``sample_stride`` steps (and always at the final time).

    ``observers`` are sampled at record times; ``integrands`` take raw
    coefficients and are time-integrated with the trapezoid rule on every
    substep, recorded as ``int_<name>``.
    """
    scheme = _Scheme(config, integrands)
    if state is None:
        state = initial_state(config, field0)
    traj = Trajectory(config)
    traj.append(_record(state, config, scheme, 0.0, observers), state.field if store_states else None)
    last_res = state.residual
    t_start = state.t
    n = config.n_steps
    for i in range(1, n + 1):
        state = _advance(state, scheme, config.dt)
        state.t = t_start + i * config.dt
        if i % config.sample_stride == 0 or i == n:
            traj.append(
                _record(state, config, scheme, state.residual - last_res, observers),
                state.field if store_states else None,
            )
            last_res = state.residual
    traj.final_state = state
    log.debug("run finished: %d steps, %d substeps", state.steps, state.substeps)
    return traj
