"""Acceptance criteria 1-10 at their stated tolerances.

Each test records a PASS/FAIL line (printed in the terminal summary) before
asserting.  Criterion 8 runs the n = 256 sweep and takes about 12 minutes.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from sqglab import fields
from sqglab.diagnostics import support_envelope
from sqglab.experiments import delta_decay_study, flux_scaling_study, kolmogorov_divergence, kolmogorov_forcing, sqg_nu_sweep
from sqglab.integrator import SolverConfig, simulate
from sqglab.nonlinear import (
    commutator_identity_residual,
    flux_identity_residual,
    kolmogorov_force,
    stokes,
    stokes_identity_residual,
)
from sqglab.spectral import Grid, SpectralField, cordoba_density, norm
from sqglab.statistics import CylindricalFunctional, stationarity_integrands, stationarity_residual


def record(num: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[num] = (bool(ok), detail)
    assert ok, detail


def test_01_kolmogorov_exact_law():
    t0 = time.perf_counter()
    # ||f||_L2 = 0.1 keeps the nu = 0.01 steady state (|u| ~ 14) at unit CFL cost
    res = kolmogorov_divergence(Grid(128), [1e-1, 1e-2], mode=1, amplitude=0.1, dt=0.01, t_end=10.0, sample_stride=10)
    elapsed = time.perf_counter() - t0
    errs = [e.verdicts["relative_error"] for e in res.entries]
    steady = [e.steady_residual for e in res.entries]
    ok = max(errs) < 1e-6 and max(steady) < 1e-8 and elapsed < 60 and all(e.excluded is None for e in res.entries)
    record(1, ok, f"max rel err {max(errs):.2e}, max steady residual {max(steady):.2e}, "
                  f"exponent {res.fit['exponent']:.6f}, {elapsed:.1f}s")


def test_02_steady_euler_eigenfunction():
    g = Grid(64)
    kf = kolmogorov_force(g, 1, 2)  # shells |k|^2 = 1 and 4
    f = kf.force
    rel = norm(stokes(f) - f * 5.0) / norm(f)
    record(2, kf.eigenvalue == 5.0 and rel < 1e-10 and not kf.degenerate, f"||Af - 5f|| / ||f|| = {rel:.2e}")


def test_03_identity_suite():
    t0 = time.perf_counter()
    g = Grid(64)
    idb = max(stokes_identity_residual(fields.random_velocity(g, s, kcut=10)) for s in range(5))
    c1 = SpectralField.from_function(g, lambda x1, x2: np.cos(x1))
    cos_err = float(np.max(np.abs(cordoba_density(c1).values - 1.0)))
    dmin = min(float(np.min(cordoba_density(fields.random_scalar(g, s, kcut=8)).values)) for s in range(50))
    comm = max(
        commutator_identity_residual(fields.random_scalar(g, 1000 + s, kcut=10), fields.random_scalar(g, 2000 + s))
        for s in range(20)
    )
    th = fields.random_scalar(Grid(32), 7, kcut=6)
    r = [flux_identity_residual(th, 0.3, m) for m in (8, 16, 32)]
    conv = min(r[0] / r[1], r[1] / r[2])
    elapsed = time.perf_counter() - t0
    ok = idb < 1e-8 and cos_err < 1e-10 and dmin >= -1e-8 and comm < 1e-8 and conv >= 4.0 and elapsed < 120
    record(3, ok, f"idb {idb:.1e}, D[cos] err {cos_err:.1e}, min D {dmin:.1e}, commutator {comm:.1e}, "
                  f"flux reduction {conv:.1f}x, {elapsed:.1f}s")


def test_04_energy_balance():
    t0 = time.perf_counter()
    g = Grid(64)
    f = fields.default_sqg_forcing(g)
    ratios = []
    # dt = 1e-3 leaves 2.8e-5 on this band-10 field; one halving further meets 1e-5
    for dt in (1e-3, 5e-4):
        cfg = SolverConfig("sqg", nu=1e-2, gamma=1.0, grid=g, dt=dt, t_end=2.0, forcing=f, sample_stride=10**6)
        st = simulate(cfg, fields.random_scalar(g, 3, kcut=10)).final_state
        ratios.append(st.abs_residual / st.injected)
    gain = ratios[0] / ratios[1]
    elapsed = time.perf_counter() - t0
    record(4, ratios[1] < 1e-5 and gain >= 3.5 and elapsed < 120,
           f"residual/injected {ratios[1]:.2e}, dt-halving gain {gain:.2f}, {elapsed:.1f}s")


def test_05_maximum_principles():
    g = Grid(64)
    worst = []
    cases = [(0, 0.0, True), (1, 2.0, True), (2, 0.3, True), (3, 1.0, False), (4, 5.0, True)]
    for seed, amp, forced in cases:
        f = fields.default_sqg_forcing(g, seed=seed) if forced else SpectralField.zeros(g)
        th0 = fields.random_scalar(g, seed, kcut=8, l2=amp) if amp > 0 else SpectralField.zeros(g)
        cfg = SolverConfig("sqg", nu=1e-2, gamma=1.0, grid=g, dt=5e-3, t_end=10.0, forcing=f,
                           sample_stride=4, linf_refine=2)
        rep = support_envelope(simulate(cfg, th0), f, th0, 1.0, tol=1e-6)
        worst.append(rep.violations)
    bad = [v for v in worst if v]
    record(5, not bad, f"5 runs (theta0 = 0 and f = 0 included), violations: {bad or 'none'}")


def test_06_delta_decay():
    g = Grid(32)
    f, lam = kolmogorov_forcing(g, 2, 1.0)
    cfg = SolverConfig("nse", nu=0.05, grid=g, dt=0.01, t_end=5.0, forcing=f, sample_stride=5, eigenvalue=lam)
    starts = {
        "on shell": f * 3.0,
        "below shell": fields.shell_velocity(g, [(1, 0, 1.0), (0, 1, 0.0, 0.7)], l2=2.0),
        "above shell": fields.shell_velocity(g, [(3, 0, 1.0), (2, 2, 0.5), (0, 4, 0.0, 0.3)], l2=2.0),
    }
    parts, ok = [], True
    for name, u0 in starts.items():
        s = delta_decay_study(cfg, u0)
        ok &= s.bounded_excess <= 1e-8
        if name == "above shell":
            # delta(0) > 0 exercises the exponential envelope
            ok &= s.envelope_excess is not None and s.envelope_excess <= 1e-6
        env = "n/a" if s.envelope_excess is None else f"{s.envelope_excess:.1e}"
        parts.append(f"{name}: delta(0) {s.delta[0]:+.2f}, excess {s.bounded_excess:.1e}, envelope {env}")
    record(6, ok, "; ".join(parts))


def _telescoping(g, f, theta0, t_end, dt, stride):
    fn = CylindricalFunctional.quadratic(g, 16, 0.1)
    ig, ob = stationarity_integrands(fn, 1e-2, 1.0, f)
    cfg = SolverConfig("sqg", nu=1e-2, gamma=1.0, grid=g, dt=dt, t_end=t_end, forcing=f, sample_stride=stride)
    return stationarity_residual(simulate(cfg, theta0, observers=ob, integrands=ig))


def test_07_stationarity_telescoping():
    g = Grid(32)
    f = fields.default_sqg_forcing(g)
    runs = [
        _telescoping(g, f, fields.random_scalar(g, s, kcut=8, l2=a), 2.0, 5e-4, 200)
        for s, a in ((4, 1.0), (5, 2.0), (6, 0.5))
    ]
    # statistically steady run from rest: doubling T halves |residual|
    a = _telescoping(g, f, None, 10.0, 1e-3, 1000)
    b = _telescoping(g, f, None, 20.0, 1e-3, 1000)
    runs += [a, b]
    worst = max(abs(r.defect) / r.psi_scale for r in runs)
    ratio = abs(b.residual) / abs(a.residual)
    ok = worst < 1e-6 and abs(ratio - 0.5) <= 0.1
    record(7, ok, f"max |defect| / max|Psi| {worst:.1e} over {len(runs)} runs, residual ratio under T doubling {ratio:.3f}")


@pytest.fixture(scope="module")
def sqg_sweep():
    g = Grid(256)
    cfg = SolverConfig("sqg", nu=1e-2, gamma=1.0, grid=g, dt=1e-2, t_end=200.0,
                       forcing=fields.default_sqg_forcing(g), sample_stride=10)
    t0 = time.perf_counter()
    res = sqg_nu_sweep(cfg, [1e-2, 1e-3, 1e-4])
    return res, time.perf_counter() - t0


@pytest.mark.slow
def test_08_main_theorem_trend(sqg_sweep):
    res, elapsed = sqg_sweep
    eps = [e.epsilon for e in res.entries]
    conv = all(e.converged for e in res.entries)
    tr = res.trend
    ok = conv and tr["decreasing"] and tr["halving"] and tr["defect_decreasing"] and elapsed <= 1800
    record(8, ok, "eps " + ", ".join(f"{v:.3e}" for v in eps)
           + f"; ratio {tr['ratio']:.3f}; defect decreasing {tr['defect_decreasing']}; converged {conv}; {elapsed:.0f}s")


@pytest.mark.slow
def test_09_support_bounds(sqg_sweep):
    res, _ = sqg_sweep
    fsq = 1.0  # ||f||_L2 of the default forcing
    vals = [1.0 * e.h12_average**2 for e in res.entries]
    ok = all(e.converged for e in res.entries) and all(v <= fsq / 1.0 * 1.01 for v in vals)
    record(9, ok, "gamma avg||theta||^2_H1/2 " + ", ".join(f"{v:.4f}" for v in vals) + f" <= {fsq * 1.01:.2f}")


def test_10_flux_scaling():
    g = Grid(128)
    eps = np.geomspace(0.1, 1.0, 6)
    rough = [flux_scaling_study(fields.rough_scalar(g, s), eps).rho_slope for s in range(10)]
    smooth = flux_scaling_study(fields.modes_scalar(g, [(1, 0, 1.0), (0, 2, 0.5)]), eps).rho_slope
    med = float(np.median(rough))
    record(10, med >= 0.45 and smooth >= 1.0, f"rough median slope {med:.3f} (10 seeds), smooth slope {smooth:.3f}")
