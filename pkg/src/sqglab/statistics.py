"""Cylindrical test functionals and empirical stationary-statistics checks.

A cylindrical functional is ``Psi(theta) = psi(y(theta))`` with
``y_k = (J_eps theta, w_k)``.  Its derivative is the finite combination
``Psi'(theta) = sum_k dpsi/dy_k J_eps w_k``.  Empirical measures are uniform
sample means over a time window of a trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .diagnostics import Trajectory
from .nonlinear import commutator, flux_rho, transport_coeffs
from .spectral import Grid, SpectralField, inner, lambda_pow, mollifier_table, product, riesz_perp

__all__ = [
    "CylindricalFunctional",
    "EmpiricalMeasure",
    "nonlinear_functional_N",
    "decompose_F",
    "FDecomposition",
    "flux_part_via_commutator",
    "lowest_modes",
    "stationarity_integrands",
    "stationarity_residual",
    "StationarityReport",
    "energy_condition_c",
    "ConditionReport",
    "dissipation_balance_defect",
    "flux_balance",
    "kep_ratio",
    "check_report",
]


def _dot(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(grid.weights * (a * np.conj(b)).real))


def lowest_modes(grid: Grid, count: int) -> list[SpectralField]:
    """The first ``count`` real Fourier modes cos(k.x), sin(k.x), ordered by |k|."""
    ks = []
    r = 1
    while len(ks) < count:
        ks = [
            (a, b)
            for a in range(-r, r + 1)
            for b in range(0, r + 1)
            if (b > 0 or a > 0) and a * a + b * b <= r * r
        ]
        r += 1
    ks.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2, k[1], k[0]))
    x1, x2 = grid.x
    out = []
    for a, b in ks:
        for fn in (np.cos, np.sin):
            out.append(SpectralField.from_physical(grid, fn(a * x1 + b * x2)))
            if len(out) == count:
                return out
    return out


@dataclass(frozen=True, eq=False)
class CylindricalFunctional:
    """Psi(theta) = psi((J_eps theta, w_1), ..., (J_eps theta, w_N))."""

    eps: float
    tests: tuple
    psi: Callable[[np.ndarray], float]
    grad_psi: Callable[[np.ndarray], np.ndarray]
    _mollified: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if not self.tests:
            raise ValueError("need at least one test field")
        g = self.grid
        jt = mollifier_table(g, self.eps) if self.eps > 0 else 1.0
        object.__setattr__(self, "_mollified", np.stack([w.coeffs * jt for w in self.tests]))

    @classmethod
    def quadratic(cls, grid: Grid, count: int = 16, eps: float = 0.1) -> "CylindricalFunctional":
        """psi(y) = |y|^2 / 2 on the ``count`` lowest Fourier modes."""
        return cls(eps, tuple(lowest_modes(grid, count)), lambda y: 0.5 * float(np.dot(y, y)), lambda y: np.asarray(y))

    @property
    def grid(self) -> Grid:
        return self.tests[0].grid

    def coordinates_coeffs(self, c: np.ndarray) -> np.ndarray:
        w = self.grid.weights
        return np.einsum("kij,ij->k", (self._mollified * np.conj(c)).real, w)

    def coordinates(self, theta: SpectralField) -> np.ndarray:
        """y(theta) = ((J_eps theta, w_k))_k."""
        return self.coordinates_coeffs(theta.coeffs)

    def __call__(self, theta: SpectralField) -> float:
        return float(self.psi(self.coordinates(theta)))

    def derivative_coeffs(self, c: np.ndarray) -> np.ndarray:
        gy = np.asarray(self.grad_psi(self.coordinates_coeffs(c)), dtype=float)
        return np.tensordot(gy, self._mollified, axes=1)

    def derivative(self, theta: SpectralField) -> SpectralField:
        """Psi'(theta) = sum_k dpsi/dy_k J_eps w_k."""
        return SpectralField(self.grid, self.derivative_coeffs(theta.coeffs))


class EmpiricalMeasure:
    """Uniform-weight measure on sampled states (or sampled values)."""

    def __init__(self, samples: Sequence):
        if len(samples) == 0:
            raise ValueError("empty measure")
        self.samples = list(samples)
        self.weights = np.full(len(self.samples), 1.0 / len(self.samples))

    @classmethod
    def from_trajectory(cls, trajectory: Trajectory, window=0.2) -> "EmpiricalMeasure":
        if not trajectory.states:
            raise ValueError("trajectory was run without store_states")
        i0, i1 = trajectory.window(window)
        return cls(trajectory.states[i0:i1 + 1])

    def __len__(self) -> int:
        return len(self.samples)

    def integrate(self, observable: Callable) -> float:
        return float(sum(w * observable(s) for w, s in zip(self.weights, self.samples)))


# -- pointwise functionals ---------------------------------------------------


def _n_coeffs(theta: np.ndarray, grid: Grid, nu: float, gamma: float, fc) -> np.ndarray:
    out = transport_coeffs(grid, theta) + (gamma * (1.0 + grid.kabs) + nu * grid.ksq) * theta
    if fc is not None:
        out = out - fc
    return out


def nonlinear_functional_N(theta: SpectralField, nu: float, gamma: float, forcing: SpectralField | None = None) -> SpectralField:
    """N(theta) = R_perp theta . grad theta + gamma D theta - nu Delta theta - f."""
    riesz_perp(theta)  # mean-free precondition
    fc = None if forcing is None else forcing.coeffs
    return SpectralField(theta.grid, _n_coeffs(theta.coeffs, theta.grid, nu, gamma, fc))


class FDecomposition(NamedTuple):
    F1: float
    F2: float
    F3: float

    def combine(self, nu: float) -> float:
        return self.F1 + nu * self.F2 + self.F3


def decompose_F(
    theta: SpectralField,
    functional: CylindricalFunctional,
    nu: float,
    gamma: float,
    forcing: SpectralField | None = None,
) -> FDecomposition:
    """Split (N(theta), Psi'(theta)) into damping/forcing, viscous and flux parts.

    F1 = gamma (theta, D Psi') - (f, Psi'), F2 = (theta, -Delta Psi'),
    F3 = -(theta R_perp theta, grad Psi'); the pairing is F1 + nu F2 + F3.
    """
    g = theta.grid
    p = functional.derivative(theta)
    pc = p.coeffs
    f1 = gamma * _dot(g, theta.coeffs, (1.0 + g.kabs) * pc)
    if forcing is not None:
        f1 -= _dot(g, forcing.coeffs, pc)
    f2 = _dot(g, theta.coeffs, g.ksq * pc)
    u1, u2 = riesz_perp(theta).components
    ik1, ik2 = 1j * g.k1, 1j * g.k2
    f3 = -(_dot(g, product(theta, u1).coeffs, ik1 * pc) + _dot(g, product(theta, u2).coeffs, ik2 * pc))
    return FDecomposition(f1, f2, f3)


def flux_part_via_commutator(theta: SpectralField, functional: CylindricalFunctional) -> float:
    """F3 along the commutator route: -1/2 (Lambda^{-1} theta, C_{Psi'}(theta))."""
    p = functional.derivative(theta)
    return -0.5 * inner(lambda_pow(theta, -1.0), commutator(p, theta))


# -- trajectory checks ------------------------------------------------------


def stationarity_integrands(functional: CylindricalFunctional, nu: float, gamma: float, forcing: SpectralField | None = None):
    """(integrands, observers) for :func:`sqglab.integrator.simulate`.

    ``npsi`` is integrated on every substep; ``psi`` is sampled at records.
    """
    g = functional.grid
    fc = None if forcing is None else forcing.coeffs * g.mask

    def npsi(c: np.ndarray) -> float:
        return _dot(g, _n_coeffs(c, g, nu, gamma, fc), functional.derivative_coeffs(c))

    def psi(state, config) -> float:
        return functional(state.field)

    return {"npsi": npsi}, {"psi": psi}


class StationarityReport(NamedTuple):
    residual: float
    boundary: float
    defect: float
    horizon: float
    psi_scale: float


def stationarity_residual(trajectory: Trajectory, functional: CylindricalFunctional | None = None, nu: float | None = None) -> StationarityReport:
    """(1/T) int_0^T (N(theta), Psi'(theta)) ds and the telescoped boundary term.

    ``residual + boundary`` vanishes for the exact flow, with
    ``boundary = (Psi(theta(T)) - Psi(theta(0))) / T``.  The integral comes
    from the ``int_npsi`` channel (see :func:`stationarity_integrands`);
    without it, stored states and the trapezoid rule on samples are used.
    """
    t = trajectory.times
    horizon = float(t[-1] - t[0])
    if horizon <= 0:
        raise ValueError("trajectory has zero duration")
    recs = trajectory.records
    if recs and "int_npsi" in recs[0].extras:
        integral = float(recs[-1].extras["int_npsi"] - recs[0].extras["int_npsi"])
        psi = trajectory.column("psi")
    else:
        if functional is None or not trajectory.states:
            raise ValueError("need recorded integrals or stored states plus a functional")
        cfg = trajectory.config
        nu = cfg.nu if nu is None else nu
        vals = [
            float(np.dot(functional.grad_psi(functional.coordinates(s)),
                         functional.coordinates(nonlinear_functional_N(s, nu, cfg.gamma, cfg.forcing))))
            for s in trajectory.states
        ]
        integral = float(np.trapezoid(vals, t))
        psi = np.array([functional(s) for s in trajectory.states])
    residual = integral / horizon
    boundary = float(psi[-1] - psi[0]) / horizon
    return StationarityReport(residual, boundary, residual + boundary, horizon, float(np.max(np.abs(psi))))


class ConditionReport(NamedTuple):
    value: float
    count: int
    empty: bool


def energy_condition_c(trajectory: Trajectory, nu: float, shell: tuple[float, float] = (0.0, np.inf), window=0.2) -> ConditionReport:
    """Sample mean over the window of 1_{E1<=||theta||_{H1/2}<=E2} (gamma||theta||^2_{H1/2} + nu||grad theta||^2 - (f, theta))."""
    e1, e2 = shell
    if e1 > e2:
        raise ValueError("shell must satisfy E1 <= E2")
    gamma = trajectory.config.gamma if trajectory.config is not None else 0.0
    i0, i1 = trajectory.window(window)
    sl = slice(i0, i1 + 1)
    h = trajectory.column("h12sq")[sl]
    val = gamma * h + nu * trajectory.column("gradsq")[sl] - trajectory.column("inject")[sl]
    sel = (np.sqrt(h) >= e1) & (np.sqrt(h) <= e2)
    count = int(sel.sum())
    if count == 0:
        return ConditionReport(0.0, 0, True)
    return ConditionReport(float(val[sel].sum() / val.size), count, False)


def dissipation_balance_defect(trajectory: Trajectory, nu: float | None = None, window=0.2) -> float:
    """Window average of gamma ||theta||^2_{H1/2} - (f, theta).

    By the energy balance this equals -nu avg||grad theta||^2 minus the
    L2 drift term; it tends to zero with nu on converged windows.
    """
    gamma = trajectory.config.gamma
    return gamma * trajectory.window_average("h12sq", window) - trajectory.window_average("inject", window)


class FluxBalance(NamedTuple):
    I: float
    K: float
    K_direct: float

    @property
    def total(self) -> float:
        return self.I + self.K


def flux_balance(measure: EmpiricalMeasure, eps: float, gamma: float, forcing: SpectralField | None = None) -> FluxBalance:
    """I_eps and K_eps under an empirical measure; K also in its flux form.

    I = <(J theta, J(gamma D theta - f))>, K = <(J theta, div rho_eps)>, and
    ``K_direct`` = <(J theta, J(u . grad theta))> for cross-checking.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")

    def parts(theta: SpectralField):
        g = theta.grid
        jt = mollifier_table(g, eps)
        jth = theta.coeffs * jt
        rhs = gamma * (1.0 + g.kabs) * theta.coeffs
        if forcing is not None:
            rhs = rhs - forcing.coeffs
        i = _dot(g, jth, rhs * jt)
        kd = _dot(g, jth, transport_coeffs(g, theta.coeffs) * jt)
        rho = flux_rho(theta, eps)
        fine = rho.grid
        jf = g.pad_coeffs(jth)
        div = 1j * (fine.k1 * rho.coeffs[0] + fine.k2 * rho.coeffs[1])
        k = _dot(fine, jf, div)
        return np.array([i, k, kd])

    tot = sum(w * parts(s) for w, s in zip(measure.weights, measure.samples))
    return FluxBalance(*map(float, tot))


def kep_ratio(theta: SpectralField, eps: float) -> float:
    """|(grad J theta, rho_eps)| / (||theta||_inf ||theta||^2_{H1/2}), monitored against a frozen constant."""
    from .spectral import norm

    rho = flux_rho(theta, eps)
    fine = rho.grid
    jth = theta.grid.pad_coeffs(theta.coeffs * mollifier_table(theta.grid, eps))
    val = _dot(fine, 1j * fine.k1 * jth, rho.coeffs[0]) + _dot(fine, 1j * fine.k2 * jth, rho.coeffs[1])
    scale = norm(theta, "Lp", p=np.inf) * norm(theta, "H1/2") ** 2
    return abs(val) / scale if scale > 0 else 0.0


def check_report(check: str, value: float, tolerance: float, passed: bool, window=None) -> dict:
    """JSON-ready record {check, window, value, tolerance, verdict}."""
    if isinstance(window, tuple):
        window = list(window)
    return {
        "check": check,
        "window": window,
        "value": float(value),
        "tolerance": float(tolerance),
        "verdict": "pass" if passed else "fail",
    }
