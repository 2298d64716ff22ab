"""Invariant suites behind ``sqglab verify``.

Each check returns ``{"check", "value", "tolerance", "passed"}``; the suites
are sized to finish in seconds on small grids.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import fields
from .integrator import SolverConfig, simulate
from .nonlinear import (
    commutator_identity_residual,
    flux_identity_residual,
    kolmogorov_force,
    nse_bilinear,
    sqg_transport,
    stokes,
    stokes_identity_residual,
)
from .spectral import (
    Grid,
    SpectralField,
    VelocityField,
    cordoba_density,
    gradient,
    inner,
    lambda_pow,
    leray_project,
    mollify,
    norm,
    riesz_perp,
)
from .statistics import (
    CylindricalFunctional,
    decompose_F,
    flux_part_via_commutator,
    nonlinear_functional_N,
    stationarity_integrands,
    stationarity_residual,
)

SUITES = ("operators", "identities", "balances", "statistics", "all")


def _check(name: str, value: float, tol: float, passed: bool | None = None) -> dict:
    value = float(value)
    ok = (value <= tol) if passed is None else bool(passed)
    return {"check": name, "value": value, "tolerance": float(tol), "passed": bool(ok and np.isfinite(value))}


def operators_suite() -> list[dict]:
    g = Grid(32)
    out = []
    rng = np.random.default_rng(0)
    a = rng.standard_normal(g.shape)
    back = g.to_physical(g.to_spectral(a))
    out.append(_check("round_trip", np.max(np.abs(back - a)) / np.max(np.abs(a)), 1e-12))
    th = fields.random_scalar(g, 1)
    u = riesz_perp(th)
    out.append(_check("riesz_divergence", u.divergence_defect(), 1e-12))
    out.append(_check("riesz_isometry", abs(norm(u) / norm(th) - 1.0), 1e-12))
    v = VelocityField(g, fields.random_velocity(g, 2).coeffs + gradient(fields.random_scalar(g, 3)).coeffs)
    pv = leray_project(v)
    out.append(_check("leray_idempotent", norm(leray_project(pv) - pv), 1e-12))
    out.append(_check("leray_kills_gradients", norm(leray_project(gradient(fields.random_scalar(g, 4)))), 1e-12))
    ph = fields.random_scalar(g, 5)
    out.append(_check("mollify_contractive", norm(mollify(th, 0.3)) - norm(th), 1e-15))
    out.append(_check("mollify_self_adjoint", abs(inner(mollify(th, 0.3), ph) - inner(th, mollify(ph, 0.3))), 1e-12))
    out.append(_check("mollify_commutes_lambda", norm(mollify(lambda_pow(th, 0.5), 0.3) - lambda_pow(mollify(th, 0.3), 0.5)), 1e-12))
    quad = float(np.mean(th.physical() ** 2))
    out.append(_check("parseval", abs(norm(th) ** 2 - quad) / quad, 1e-12))
    c1 = SpectralField.from_function(g, lambda x1, x2: np.cos(x1))
    out.append(_check("lambda_cos", norm(lambda_pow(c1, 1.0) - c1), 1e-12))
    out.append(_check("norm_cos_l2sq", abs(norm(c1) ** 2 - 0.5), 1e-12))
    out.append(_check("norm_cos_h12sq", abs(norm(c1, "H1/2") ** 2 - 1.0), 1e-12))
    out.append(_check("norm_cos_linf", abs(norm(c1, "Lp", p=np.inf) - 1.0), 1e-12))
    return out


def identities_suite() -> list[dict]:
    g = Grid(64)
    out = []
    u = fields.random_velocity(g, 0, kcut=g.n / 6)
    out.append(_check("stokes_identity", stokes_identity_residual(u), 1e-8))
    b = nse_bilinear(u, u)
    out.append(_check("bilinear_orthogonal_u", abs(inner(b, u)) / norm(u) ** 3, 1e-12))
    out.append(_check("bilinear_orthogonal_Au", abs(inner(b, stokes(u))) / (norm(u) * norm(stokes(u)) * norm(u, "H1")), 1e-12))
    th = fields.random_scalar(g, 1)
    out.append(_check("sqg_orthogonality", abs(inner(sqg_transport(th), th)), 1e-12))
    c1 = SpectralField.from_function(g, lambda x1, x2: np.cos(x1))
    d = cordoba_density(c1)
    out.append(_check("cordoba_cos", np.max(np.abs(d.values - 1.0)), 1e-10))
    worst = max(-float(np.min(cordoba_density(fields.random_scalar(g, s, kcut=8)).values)) for s in range(10))
    out.append(_check("cordoba_nonnegative", worst, 1e-8))
    res = max(
        commutator_identity_residual(fields.random_scalar(g, 100 + s, kcut=8), fields.random_scalar(g, 200 + s))
        for s in range(5)
    )
    out.append(_check("commutator_identity", res, 1e-8))
    small = Grid(32)
    th = fields.random_scalar(small, 7, kcut=6)
    r = [flux_identity_residual(th, 0.3, m) for m in (8, 16, 32)]
    ratio = min(r[0] / r[1], r[1] / r[2])
    out.append(_check("flux_identity_convergence", ratio, 4.0, passed=ratio >= 4.0))
    kf = kolmogorov_force(g, 1, 4)
    f = kf.force
    out.append(_check("steady_euler_eigen", norm(stokes(f) - f * kf.eigenvalue) / norm(f), 1e-10))
    return out


def balances_suite() -> list[dict]:
    out = []
    g = Grid(32)
    c1 = SpectralField.from_function(g, lambda x1, x2: np.cos(x1))
    gamma, nu = 0.5, 0.1
    cfg = SolverConfig("sqg", nu=nu, gamma=gamma, grid=g, dt=0.01, t_end=1.0, sample_stride=100)
    tr = simulate(cfg, c1)
    exact = c1 * np.exp(-(2 * gamma + nu))
    out.append(_check("sqg_decay_closed_form", norm(tr.final_state.field - exact), 1e-10))
    cfg = cfg.with_(forcing=c1 * (2 * gamma + nu), t_end=10.0, sample_stride=1000)
    tr = simulate(cfg, c1)
    out.append(_check("sqg_steady", norm(tr.final_state.field - c1), 1e-10))
    g = Grid(32)
    f = fields.default_sqg_forcing(g)
    ratios = []
    for dt in (2e-3, 1e-3):
        cfg = SolverConfig("sqg", nu=1e-2, gamma=1.0, grid=g, dt=dt, t_end=2.0, forcing=f, sample_stride=1000)
        st = simulate(cfg, fields.random_scalar(g, 3, kcut=6)).final_state
        ratios.append(st.abs_residual / st.injected)
    out.append(_check("energy_balance", ratios[1], 1e-5))
    out.append(_check("energy_balance_order", ratios[0] / ratios[1], 3.5, passed=ratios[0] / ratios[1] >= 3.5))
    kf = fields.kolmogorov_shear(g, 1)
    cfg = SolverConfig("nse", nu=0.1, grid=g, dt=0.01, t_end=1.0, forcing=kf, sample_stride=100, eigenvalue=1.0)
    u0 = kf * 10.0
    st = simulate(cfg, u0).final_state
    out.append(_check("nse_kolmogorov_steady", norm(st.field - u0) / norm(u0), 1e-10))
    cfg = SolverConfig("nse", nu=0.01, grid=g, dt=0.01, t_end=0.5, forcing=kf, sample_stride=10)
    st = simulate(cfg, fields.random_velocity(g, 1, kcut=6)).final_state
    out.append(_check("nse_divergence_free", st.field.divergence_defect(), 1e-12))
    return out


def statistics_suite() -> list[dict]:
    out = []
    g = Grid(32)
    f = fields.default_sqg_forcing(g)
    fn = CylindricalFunctional.quadratic(g, 16, 0.1)
    th = fields.random_scalar(g, 4, kcut=8)
    d = decompose_F(th, fn, 0.01, 1.0, f)
    pair = inner(nonlinear_functional_N(th, 0.01, 1.0, f), fn.derivative(th))
    out.append(_check("F_recombination", abs(d.combine(0.01) - pair), 1e-10))
    out.append(_check("F3_commutator_route", abs(d.F3 - flux_part_via_commutator(th, fn)), 1e-8))
    cfg = SolverConfig("sqg", nu=0.01, gamma=1.0, grid=g, dt=5e-4, t_end=2.0, forcing=f, sample_stride=200)
    ig, ob = stationarity_integrands(fn, 0.01, 1.0, f)
    rep = stationarity_residual(simulate(cfg, th, observers=ob, integrands=ig))
    out.append(_check("stationarity_telescoping", abs(rep.defect), 1e-6 * rep.psi_scale))
    return out


_SUITES: dict[str, Callable[[], list[dict]]] = {
    "operators": operators_suite,
    "identities": identities_suite,
    "balances": balances_suite,
    "statistics": statistics_suite,
}


def run_suite(name: str) -> dict:
    """{suite: [checks]} for one suite or all of them."""
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES}")
    names = list(_SUITES) if name == "all" else [name]
    return {n: _SUITES[n]() for n in names}
