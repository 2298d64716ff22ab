import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqglab import fields
from sqglab.spectral import (
    Grid,
    SpectralField,
    VelocityField,
    bump_mass,
    cordoba_density,
    divergence,
    gradient,
    inner,
    lambda_pow,
    laplacian,
    leray_project,
    mollifier_symbol,
    mollify,
    norm,
    perp_gradient,
    product,
    riesz_perp,
)


def cos1(g):
    return SpectralField.from_function(g, lambda x1, x2: np.cos(x1))


class TestGrid:
    @pytest.mark.parametrize("n", [15, 8, 0, 17])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError):
            Grid(n)

    @pytest.mark.parametrize("frac", [0.0, 1.5, -0.1])
    def test_rejects_bad_dealias(self, frac):
        with pytest.raises(ValueError):
            Grid(32, frac)

    @pytest.mark.parametrize("n", [16, 18, 32, 48, 64])
    def test_two_thirds_band_is_alias_free(self, n):
        g = Grid(n)
        assert 3 * g.kmax < n
        assert g.mask.sum() > 0

    def test_wavenumber_range(self, g16):
        assert g16.k1.min() == -8 and g16.k1.max() == 7
        assert g16.k2.min() == 0 and g16.k2.max() == 8

    @pytest.mark.parametrize("n", [16, 32, 64])
    def test_round_trip(self, n):
        g = Grid(n)
        a = np.random.default_rng(n).standard_normal(g.shape)
        back = g.to_physical(g.to_spectral(a))
        assert np.max(np.abs(back - a)) <= 1e-12 * np.max(np.abs(a))

    def test_transforms_leave_inputs_untouched(self, g32):
        a = np.random.default_rng(1).standard_normal(g32.shape)
        c = g32.to_spectral(a)
        a0, c0 = a.copy(), c.copy()
        g32.to_physical(c)
        g32.to_spectral(a)
        assert np.array_equal(a, a0) and np.array_equal(c, c0)

    def test_matches_numpy_fft(self, g32):
        a = np.random.default_rng(2).standard_normal(g32.shape)
        ref = np.fft.rfft2(a) / 32**2
        assert np.allclose(g32.to_spectral(a), ref, atol=1e-15)

    def test_pad_truncate_inverse(self, g32):
        th = fields.random_scalar(g32, 3)
        padded = g32.pad_coeffs(th.coeffs)
        assert np.allclose(g32.truncate_coeffs(padded), th.coeffs * (np.abs(g32.k1) < 16) * (g32.k2 < 16))
        fine = g32.padded(2)
        # padding is trig interpolation: values agree on the coarse points
        assert np.allclose(fine.to_physical(padded)[::2, ::2], th.physical(), atol=1e-13)


class TestFields:
    def test_hermitian_symmetry(self, g32):
        th = fields.random_scalar(g32, 0)
        full = th.full_coeffs()
        k = np.arange(32)
        assert np.allclose(full, np.conj(full[(-k[:, None]) % 32, (-k[None, :]) % 32]), atol=1e-15)

    def test_mean_free(self, g32):
        assert fields.random_scalar(g32, 5).mean == 0.0

    def test_velocity_components_round_trip(self, g32):
        u = fields.random_velocity(g32, 1)
        v = VelocityField.from_components(*u.components)
        assert np.array_equal(u.coeffs, v.coeffs)


class TestLambda:
    @pytest.mark.parametrize(
        "func, s, expected",
        [
            (lambda x1, x2: np.cos(x1), 1.0, lambda x1, x2: np.cos(x1)),
            (lambda x1, x2: np.sin(2 * x2), 0.5, lambda x1, x2: np.sqrt(2) * np.sin(2 * x2)),
            (lambda x1, x2: np.cos(3 * x1), -1.0, lambda x1, x2: np.cos(3 * x1) / 3),
        ],
    )
    def test_eigenmodes(self, g32, func, s, expected):
        out = lambda_pow(SpectralField.from_function(g32, func), s)
        assert np.max(np.abs(out.physical() - expected(*g32.x))) < 1e-13

    def test_negative_power_needs_mean_free(self, g32):
        f = SpectralField.from_function(g32, lambda x1, x2: 1.0 + np.cos(x1))
        with pytest.raises(ValueError, match="mean-free"):
            lambda_pow(f, -0.5)
        lambda_pow(f, 0.5)  # positive powers are fine

    @given(s=st.floats(-2, 2), t=st.floats(-2, 2))
    @settings(max_examples=25, deadline=None)
    def test_semigroup(self, s, t):
        g = Grid(16)
        th = fields.random_scalar(g, 0)
        lhs = lambda_pow(lambda_pow(th, s), t)
        assert norm(lhs - lambda_pow(th, s + t)) <= 1e-12 * max(1.0, norm(lhs))


class TestRiesz:
    def test_cos_x1(self, g32):
        u = riesz_perp(cos1(g32)).physical()
        x1, _ = g32.x
        assert np.max(np.abs(u[0])) < 1e-14
        assert np.max(np.abs(u[1] + np.sin(x1))) < 1e-14

    def test_cos_x2(self, g32):
        u = riesz_perp(SpectralField.from_function(g32, lambda x1, x2: np.cos(x2))).physical()
        _, x2 = g32.x
        assert np.max(np.abs(u[0] - np.sin(x2))) < 1e-14
        assert np.max(np.abs(u[1])) < 1e-14

    @pytest.mark.parametrize("seed", range(5))
    def test_isometry_and_divergence(self, g32, seed):
        th = fields.random_scalar(g32, seed, l2=3.0)
        u = riesz_perp(th)
        g = g32
        kdotu = np.abs(g.k1 * u.coeffs[0] + g.k2 * u.coeffs[1])
        assert kdotu.max() < 1e-12
        assert abs(norm(u) / norm(th) - 1.0) < 1e-12

    def test_against_direct_multiplier(self, g16):
        th = fields.random_scalar(g16, 9)
        u = riesz_perp(th)
        spec = th.full_coeffs()
        k = np.fft.fftfreq(16, 1 / 16)
        k1, k2 = np.meshgrid(k, k, indexing="ij")
        kk = np.hypot(k1, k2)
        kk[0, 0] = 1.0
        u1 = np.real(np.fft.ifft2(-1j * k2 / kk * spec) * 256)
        assert np.allclose(u.physical()[0], u1, atol=1e-14)


class TestLeray:
    def test_kills_gradient(self, g32):
        phi = SpectralField.from_function(g32, lambda x1, x2: np.cos(x1) * np.cos(x2))
        assert norm(leray_project(gradient(phi))) < 1e-14

    def test_fixes_divergence_free(self, g32):
        u = fields.random_velocity(g32, 4)
        assert norm(leray_project(u) - u) < 1e-12

    @pytest.mark.parametrize("seed", range(3))
    def test_idempotent_and_decomposition(self, g32, seed):
        w = fields.random_velocity(g32, seed)
        grad = gradient(fields.random_scalar(g32, seed + 10))
        v = w + grad
        pv = leray_project(v)
        assert norm(leray_project(pv) - pv) < 1e-12
        assert norm(pv - w) < 1e-12
        assert pv.divergence_defect() < 1e-12

    def test_shell_representation(self, g32):
        u = fields.random_velocity(g32, 2)
        uj = u.shell_coeffs()
        g = g32
        rebuilt = np.stack([-g.k2 * g.inv_kabs * uj, g.k1 * g.inv_kabs * uj])
        assert np.allclose(rebuilt, u.coeffs, atol=1e-15)


class TestMollifier:
    # independent oracle: scipy dblquad of the bump over the unit disk,
    # frozen (mass 0.46651239317833004)
    @pytest.mark.parametrize(
        "rho, expected",
        [(0.1, 0.9993468816351359), (1.5, 0.8608616865960509), (np.sqrt(2), 0.875566453592488), (3.0, 0.5272113366413174)],
    )
    def test_symbol_against_2d_quadrature(self, rho, expected):
        assert abs(float(mollifier_symbol(rho)) - expected) < 1e-12

    def test_mass(self):
        assert abs(bump_mass() - 0.46651239317833004) < 1e-12

    def test_eps_zero_is_identity(self, g32):
        th = fields.random_scalar(g32, 1)
        assert np.array_equal(mollify(th, 0.0).coeffs, th.coeffs)

    def test_negative_eps_rejected(self, g32):
        with pytest.raises(ValueError):
            mollify(fields.random_scalar(g32, 1), -0.1)

    def test_cos_mode(self, g32):
        out = mollify(cos1(g32), 0.1)
        assert np.allclose(out.physical(), 0.9993468816351359 * np.cos(g32.x[0]), atol=1e-13)

    @pytest.mark.parametrize("eps", [0.05, 0.3, 1.0])
    def test_contractive_symmetric_commuting(self, g32, eps):
        a = fields.random_scalar(g32, 1)
        b = fields.random_scalar(g32, 2)
        assert norm(mollify(a, eps)) <= norm(a)
        assert abs(inner(mollify(a, eps), b) - inner(a, mollify(b, eps))) < 1e-12
        lhs = mollify(lambda_pow(a, 0.5), eps)
        rhs = lambda_pow(mollify(a, eps), 0.5)
        assert norm(lhs - rhs) < 1e-12

    def test_symbol_bounds(self):
        rho = np.linspace(0, 50, 2001)
        j = mollifier_symbol(rho)
        assert j[0] == pytest.approx(1.0, abs=1e-14)
        assert np.all(np.abs(j) <= 1.0 + 1e-14)


class TestNorms:
    def test_cos_values(self, g32):
        c = cos1(g32)
        assert norm(c) ** 2 == pytest.approx(0.5, abs=1e-15)
        assert norm(c, "H1/2") ** 2 == pytest.approx(1.0, abs=1e-15)
        assert norm(c, "H1") ** 2 == pytest.approx(0.5, abs=1e-15)
        assert abs(norm(c, "Lp", p=np.inf) - 1.0) <= 1e-12
        assert norm(c, "Lp", p=1) == pytest.approx(2 / np.pi, rel=1e-2)

    def test_rejects_p_below_one(self, g32):
        with pytest.raises(ValueError):
            norm(cos1(g32), "Lp", p=0.5)

    def test_unknown_norm(self, g32):
        with pytest.raises(ValueError):
            norm(cos1(g32), "H7")

    @pytest.mark.parametrize("seed", range(3))
    def test_parseval(self, g32, seed):
        th = fields.random_scalar(g32, seed)
        quad = np.mean(th.physical() ** 2)
        assert abs(norm(th) ** 2 - quad) <= 1e-12 * quad

    def test_lp_matches_l2(self, g32):
        th = fields.random_scalar(g32, 3)
        assert norm(th, "Lp", p=2) == pytest.approx(norm(th), rel=1e-12)

    def test_refined_linf_is_not_smaller(self, g32):
        th = fields.random_scalar(g32, 4)
        assert norm(th, "Lp", p=np.inf, refine=4) >= norm(th, "Lp", p=np.inf) - 1e-15


class TestDifferentialOperators:
    def test_laplacian(self, g32):
        f = SpectralField.from_function(g32, lambda x1, x2: np.sin(2 * x1) * np.cos(3 * x2))
        assert norm(laplacian(f) + f * 13) < 1e-13

    def test_div_perp_gradient_zero(self, g32):
        assert norm(divergence(perp_gradient(fields.random_scalar(g32, 1)))) < 1e-14

    def test_product_is_dealiased(self, g32):
        a = fields.random_scalar(g32, 1)
        p = product(a, a)
        assert np.all(p.coeffs[~g32.mask] == 0)


class TestCordoba:
    def test_cos_gives_one(self, g64):
        d = cordoba_density(cos1(g64))
        assert np.max(np.abs(d.values - 1.0)) < 1e-10
        assert not d.under_resolved

    def test_zero(self, g32):
        d = cordoba_density(SpectralField.zeros(g32))
        assert np.all(d.values == 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_nonnegative_on_smooth_fields(self, g64, seed):
        phi = fields.random_scalar(g64, seed, kcut=8)
        d = cordoba_density(phi)
        assert d.values.min() >= -1e-8 * norm(phi) ** 2

    def test_flags_under_resolved(self, g32):
        phi = fields.random_scalar(g32, 0, kcut=None)
        phi = SpectralField(g32, g32.to_spectral(np.random.default_rng(0).standard_normal(g32.shape)))
        phi.coeffs[0, 0] = 0
        assert cordoba_density(phi).under_resolved

    def test_integral_identity(self, g64):
        # the mean of D equals 2 (phi, Lambda phi) since Lambda(phi^2) is mean free
        phi = fields.random_scalar(g64, 7, kcut=8)
        d = cordoba_density(phi)
        assert np.mean(d.values) == pytest.approx(2 * norm(phi, "H1/2") ** 2 - 2 * norm(phi) ** 2, rel=1e-10)
