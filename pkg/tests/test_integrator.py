import numpy as np
import pytest

from sqglab import fields
from sqglab.integrator import SolverConfig, initial_state, simulate, step_nse, step_sqg
from sqglab.spectral import SpectralField, norm


def cos1(g):
    return SpectralField.from_function(g, lambda x1, x2: np.cos(x1))


class TestConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            {"equation": "euler"},
            {"nu": -1.0},
            {"gamma": -0.1},
            {"dt": 0.0},
            {"sample_stride": 0},
        ],
    )
    def test_rejects(self, g16, kw):
        base = dict(equation="sqg", nu=0.1, grid=g16, dt=0.01, t_end=1.0)
        base.update(kw)
        with pytest.raises(ValueError):
            SolverConfig(**base)

    def test_step_equation_guard(self, g16):
        cfg = SolverConfig("nse", nu=0.1, grid=g16, dt=0.01, t_end=0.1)
        with pytest.raises(ValueError):
            step_sqg(initial_state(cfg), cfg)
        with pytest.raises(ValueError):
            step_nse(initial_state(cfg.with_(equation="sqg")), cfg.with_(equation="sqg"))


class TestClosedForms:
    @pytest.mark.parametrize("gamma, nu", [(0.5, 0.1), (1.0, 0.0), (0.0, 0.3)])
    def test_sqg_single_mode_decay(self, g32, gamma, nu):
        cfg = SolverConfig("sqg", nu=nu, gamma=gamma, grid=g32, dt=0.01, t_end=1.0, sample_stride=10)
        tr = simulate(cfg, cos1(g32))
        exact = cos1(g32) * np.exp(-(2 * gamma + nu))
        assert norm(tr.final_state.field - exact) < 1e-12
        # l2sq(t) = exp(-2 (2 gamma + nu) t) / 2 on every record
        assert np.allclose(tr.column("l2sq"), 0.5 * np.exp(-2 * (2 * gamma + nu) * tr.times), rtol=1e-12)

    def test_sqg_steady_state(self, g32):
        gamma, nu = 0.5, 0.1
        cfg = SolverConfig("sqg", nu=nu, gamma=gamma, grid=g32, dt=0.01, t_end=5.0,
                           forcing=cos1(g32) * (2 * gamma + nu), sample_stride=100)
        tr = simulate(cfg, cos1(g32))
        assert norm(tr.final_state.field - cos1(g32)) < 1e-12

    def test_nse_shear_decay(self, g32):
        u0 = fields.kolmogorov_shear(g32, 2)
        cfg = SolverConfig("nse", nu=0.05, grid=g32, dt=0.01, t_end=2.0, sample_stride=50)
        tr = simulate(cfg, u0)
        assert norm(tr.final_state.field - u0 * np.exp(-4 * 0.05 * 2.0)) < 1e-12

    def test_nse_kolmogorov_steady(self, g32):
        f = fields.kolmogorov_shear(g32, 1)
        nu = 0.1
        u0 = f * (1 / nu)
        cfg = SolverConfig("nse", nu=nu, grid=g32, dt=0.01, t_end=2.0, forcing=f, sample_stride=100, eigenvalue=1.0)
        st = simulate(cfg, u0).final_state
        assert norm(st.field - u0) / norm(u0) < 1e-12
        assert st.cum_gradsq / st.t == pytest.approx(norm(u0, "H1") ** 2, rel=1e-12)


class TestAccuracy:
    def _final(self, g, dt):
        cfg = SolverConfig("sqg", nu=1e-2, gamma=0.5, grid=g, dt=dt, t_end=0.5,
                           forcing=fields.default_sqg_forcing(g), sample_stride=10**6)
        return simulate(cfg, fields.random_scalar(g, 3, kcut=6, l2=0.5)).final_state.field

    def test_second_order(self, g32):
        a, b, c = (self._final(g32, dt) for dt in (0.02, 0.01, 0.005))
        ratio = norm(a - b) / norm(b - c)
        assert 3.5 <= ratio <= 4.5

    def test_energy_balance_order(self, g32):
        f = fields.default_sqg_forcing(g32)
        ratios = []
        for dt in (2e-3, 1e-3):
            cfg = SolverConfig("sqg", nu=1e-2, gamma=1.0, grid=g32, dt=dt, t_end=2.0, forcing=f, sample_stride=1000)
            st = simulate(cfg, fields.random_scalar(g32, 3, kcut=6)).final_state
            ratios.append(st.abs_residual / st.injected)
        assert ratios[1] < 1e-5
        assert ratios[0] / ratios[1] >= 3.5


class TestMechanics:
    def test_sampling(self, g16):
        cfg = SolverConfig("sqg", nu=0.1, gamma=1.0, grid=g16, dt=0.01, t_end=1.05, sample_stride=10,
                           forcing=fields.default_sqg_forcing(g16))
        tr = simulate(cfg, store_states=True)
        # records at 0, every 10 steps and at the final step
        assert len(tr) == 12 and len(tr.states) == 12
        assert tr.times[-1] == pytest.approx(1.05)

    def test_zero_initial_data(self, g16):
        cfg = SolverConfig("sqg", nu=0.1, gamma=1.0, grid=g16, dt=0.01, t_end=0.1)
        tr = simulate(cfg)
        assert np.all(tr.column("l2sq") == 0)

    def test_deterministic(self, g32):
        cfg = SolverConfig("sqg", nu=1e-2, gamma=1.0, grid=g32, dt=0.01, t_end=1.0,
                           forcing=fields.default_sqg_forcing(g32), sample_stride=5)
        a = simulate(cfg, fields.random_scalar(g32, 1))
        b = simulate(cfg, fields.random_scalar(g32, 1))
        assert np.array_equal(a.column("gradsq"), b.column("gradsq"))
        assert np.array_equal(a.final_state.field.coeffs, b.final_state.field.coeffs)

    def test_cfl_substeps(self, g32):
        big = fields.random_scalar(g32, 2, l2=50.0)
        cfg = SolverConfig("sqg", nu=1e-2, gamma=1.0, grid=g32, dt=0.05, t_end=0.2)
        st = simulate(cfg, big).final_state
        assert st.substeps > st.steps == 4
        assert np.isfinite(norm(st.field))

    def test_integrand_channel(self, g16):
        cfg = SolverConfig("sqg", nu=0.1, gamma=1.0, grid=g16, dt=0.01, t_end=1.0, sample_stride=20)
        tr = simulate(cfg, cos1(g16), integrands={"one": lambda c: 1.0})
        assert np.allclose(tr.column("int_one"), tr.times, atol=1e-12)

    def test_observer_channel(self, g16):
        cfg = SolverConfig("sqg", nu=0.1, gamma=1.0, grid=g16, dt=0.01, t_end=0.5, sample_stride=10)
        tr = simulate(cfg, cos1(g16), observers={"tt": lambda s, c: s.t})
        assert np.allclose(tr.column("tt"), tr.times)

    def test_continue_from_state(self, g32):
        f = fields.default_sqg_forcing(g32)
        cfg = SolverConfig("sqg", nu=1e-2, gamma=1.0, grid=g32, dt=0.01, t_end=1.0, forcing=f, sample_stride=50)
        whole = simulate(cfg.with_(t_end=2.0), fields.random_scalar(g32, 0))
        half = simulate(cfg, fields.random_scalar(g32, 0))
        rest = simulate(cfg, state=half.final_state)
        assert rest.times[-1] == pytest.approx(2.0)
        assert norm(rest.final_state.field - whole.final_state.field) < 1e-13

    def test_nse_stays_divergence_free(self, g32):
        cfg = SolverConfig("nse", nu=0.01, grid=g32, dt=0.01, t_end=0.5, forcing=fields.kolmogorov_shear(g32, 1))
        st = simulate(cfg, fields.random_velocity(g32, 1, kcut=6)).final_state
        assert st.field.divergence_defect() < 1e-13

    def test_nse_projects_initial_data(self, g32):
        u = fields.random_velocity(g32, 1)
        grad = np.stack([1j * g32.k1, 1j * g32.k2]) * fields.random_scalar(g32, 2).coeffs
        from sqglab.spectral import VelocityField

        cfg = SolverConfig("nse", nu=0.01, grid=g32, dt=0.01, t_end=0.0)
        st = initial_state(cfg, VelocityField(g32, u.coeffs + grad))
        assert norm(st.field - u) < 1e-13

    def test_nse_delta_columns(self, g32):
        f = fields.kolmogorov_shear(g32, 1)
        cfg = SolverConfig("nse", nu=0.1, grid=g32, dt=0.01, t_end=0.2, forcing=f, sample_stride=5)
        tr = simulate(cfg, fields.random_velocity(g32, 0, kcut=4))
        d = tr.column("delta")
        assert np.allclose(d, tr.column("gradsq") - tr.column("l2sq"), atol=1e-14)
        sq = simulate(SolverConfig("sqg", nu=0.1, grid=g32, dt=0.01, t_end=0.1), cos1(g32))
        assert np.all(np.isnan(sq.column("delta")))
