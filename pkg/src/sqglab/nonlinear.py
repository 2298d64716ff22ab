"""Quadratic terms: NSE bilinear form, SQG transport, flux remainders, commutator."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .spectral import (
    Grid,
    SpectralField,
    VelocityField,
    bump,
    bump_mass,
    gradient,
    inner,
    lambda_pow,
    leray_project,
    mollifier_table,
    perp_gradient,
    product,
    riesz_perp,
)

__all__ = [
    "nse_bilinear",
    "stokes",
    "stokes_identity_residual",
    "sqg_transport",
    "flux_rho",
    "flux_identity_residual",
    "flux_remainder_r",
    "commutator",
    "commutator_identity_residual",
    "kolmogorov_force",
    "KolmogorovForce",
]

DIV_TOL = 1e-10


# -- raw coefficient kernels shared with the time integrator ---------------


def bilinear_coeffs(grid: Grid, uc: np.ndarray, vc: np.ndarray | None = None, return_velocity: bool = False):
    """Coefficients of P(u . grad v), dealiased; ``vc=None`` means v = u."""
    up = grid.to_physical(uc)
    if vc is None:
        # symmetric tensor u_i u_j: three products; projection folded in
        uu = grid.to_spectral(np.stack([up[0] * up[0], up[0] * up[1], up[1] * up[1]]))
        sa, sb = grid.bilinear_symbols
        a = sa * uu[1] + sb * (uu[2] - uu[0])
    else:
        k = (grid.k1, grid.k2)
        vp = grid.to_physical(vc)
        uv = grid.to_spectral(np.stack([up[0] * vp[0], up[1] * vp[0], up[0] * vp[1], up[1] * vp[1]]))
        n1 = 1j * (k[0] * uv[0] + k[1] * uv[1])
        n2 = 1j * (k[0] * uv[2] + k[1] * uv[3])
        a = (-k[1] * n1 + k[0] * n2) * grid.inv_kabs**2 * grid.mask
    out = np.stack([-grid.k2 * a, grid.k1 * a])
    if return_velocity:
        return out, up
    return out


def sqg_velocity_coeffs(grid: Grid, c: np.ndarray) -> np.ndarray:
    ck = c * grid.inv_kabs
    return np.stack([-1j * grid.k2 * ck, 1j * grid.k1 * ck])


def transport_coeffs(grid: Grid, c: np.ndarray, return_velocity: bool = False):
    """Coefficients of div(u theta) = u . grad theta with u = R_perp theta."""
    ck = c * grid.inv_kabs
    phys = grid.to_physical(np.stack([c, -1j * grid.k2 * ck, 1j * grid.k1 * ck]))
    flux = grid.to_spectral(phys[1:] * phys[0])
    ik1, ik2 = grid.masked_ik
    out = ik1 * flux[0] + ik2 * flux[1]
    if return_velocity:
        return out, phys[1:]
    return out


# -- public operations ------------------------------------------------------


def _require_solenoidal(v: VelocityField, name: str) -> None:
    if v.divergence_defect() > DIV_TOL:
        raise ValueError(f"{name} must be divergence free (defect {v.divergence_defect():.2e})")


def nse_bilinear(u: VelocityField, v: VelocityField) -> VelocityField:
    """B(u, v) = P(u . grad v), evaluated pseudo-spectrally with 2/3 dealiasing."""
    _require_solenoidal(u, "u")
    _require_solenoidal(v, "v")
    vc = None if v is u else v.coeffs
    return VelocityField(u.grid, bilinear_coeffs(u.grid, u.coeffs, vc))


def stokes(u: VelocityField) -> VelocityField:
    """A u = -P Delta u; on divergence-free fields simply |k|^2 u_hat."""
    return leray_project(VelocityField(u.grid, u.grid.ksq * u.coeffs))


def stokes_identity_residual(u: VelocityField) -> float:
    """Relative defect of A B(u,u) = B(u,Au) - B(Au,u)."""
    from .spectral import norm

    au = stokes(u)
    lhs = stokes(nse_bilinear(u, u))
    rhs = nse_bilinear(u, au) - nse_bilinear(au, u)
    scale = norm(u, "H1") * norm(au, "H1")
    if scale == 0.0:
        return 0.0
    return norm(lhs - rhs) / scale


def sqg_transport(theta: SpectralField) -> SpectralField:
    """u . grad theta with u = R_perp theta (dealiased)."""
    riesz_perp(theta)  # validates the mean-free precondition
    return SpectralField(theta.grid, transport_coeffs(theta.grid, theta.coeffs))


def _fine_fields(theta: SpectralField, eps: float, factor: int = 2):
    g = theta.grid
    fine = g.padded(factor)
    tc = g.pad_coeffs(theta.coeffs, factor)
    uc = sqg_velocity_coeffs(fine, tc)
    jt = mollifier_table(fine, eps)
    return fine, tc, uc, jt


def flux_rho(theta: SpectralField, eps: float) -> VelocityField:
    """rho_eps(u, theta) = J(u theta) - J(u) J(theta), u = R_perp theta.

    Returned on the twice finer grid, where every product is represented
    exactly.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    fine, tc, uc, jt = _fine_fields(theta, eps)
    if eps == 0:
        return VelocityField(fine, np.zeros_like(uc))
    th = fine.to_physical(tc)
    u = fine.to_physical(uc)
    ju = fine.to_physical(uc * jt)
    jth = fine.to_physical(tc * jt)
    rho = fine.to_spectral(u * th) * jt - fine.to_spectral(ju * jth)
    return VelocityField(fine, rho)


def _kernel_nodes(quad_points: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint tensor rule on [-1, 1]^2 restricted to the kernel support."""
    h = 2.0 / quad_points
    s = -1.0 + h * (np.arange(quad_points) + 0.5)
    z1, z2 = np.meshgrid(s, s, indexing="ij")
    w = bump(np.hypot(z1, z2)) * h * h / bump_mass()
    keep = w > 0
    return np.stack([z1[keep], z2[keep]], axis=1), w[keep]


def flux_remainder_r(theta: SpectralField, eps: float, quad_points: int = 64) -> np.ndarray:
    """r_eps(x) = int j(z) delta_{eps z}u(x) delta_{eps z}theta(x) dz on the fine grid.

    Increments use exact spectral shifts; the z-integral uses a midpoint rule
    with ``quad_points`` nodes per direction.
    """
    fine, tc, uc, _ = _fine_fields(theta, eps)
    th = fine.to_physical(tc)
    u = fine.to_physical(uc)
    acc = np.zeros_like(u)
    nodes, weights = _kernel_nodes(quad_points)
    both = np.concatenate([tc[None], uc])
    for (z1, z2), w in zip(nodes, weights):
        phase = np.exp(-1j * eps * (fine.k1 * z1 + fine.k2 * z2))
        shifted = fine.to_physical(both * phase)
        acc += w * (shifted[1:] - u) * (shifted[0] - th)
    return acc


def flux_identity_residual(theta: SpectralField, eps: float, quad_points: int = 64) -> float:
    """L2 norm of rho_eps - r_eps + (u - J u)(theta - J theta)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    fine, tc, uc, jt = _fine_fields(theta, eps)
    rho = fine.to_physical(flux_rho(theta, eps).coeffs)
    r = flux_remainder_r(theta, eps, quad_points)
    du = fine.to_physical(uc * (1 - jt))
    dth = fine.to_physical(tc * (1 - jt))
    res = rho - r + du * dth
    return float(np.sqrt(np.mean(np.sum(res**2, axis=0))))


def commutator(phi: SpectralField, theta: SpectralField) -> SpectralField:
    """C_phi(theta) = [Lambda, grad phi] . R_perp theta."""
    u1, u2 = riesz_perp(theta).components
    d1, d2 = gradient(phi).components
    first = lambda_pow(product(d1, u1) + product(d2, u2), 1.0)
    second = product(d1, lambda_pow(u1, 1.0)) + product(d2, lambda_pow(u2, 1.0))
    return first - second


def commutator_identity_residual(phi: SpectralField, theta: SpectralField) -> float:
    """|(theta R_perp theta, grad phi) - 1/2 (Lambda^{-1} theta, C_phi(theta))|."""
    u1, u2 = riesz_perp(theta).components
    d1, d2 = gradient(phi).components
    lhs = inner(product(theta, u1), d1) + inner(product(theta, u2), d2)
    rhs = 0.5 * inner(lambda_pow(theta, -1.0), commutator(phi, theta))
    return abs(lhs - rhs)


class KolmogorovForce(NamedTuple):
    force: VelocityField
    eigenvalue: float
    velocity: VelocityField
    degenerate: bool


def kolmogorov_force(
    grid: Grid,
    k1: int,
    k2: int,
    alpha: tuple[float, float] = (1.0, 1.0),
    beta: tuple[float, float] = (0.0, 0.0),
) -> KolmogorovForce:
    """Steady forced-Euler pair: f = B(u, u) for u = u1 + u2 on two shells.

    u_i = grad_perp psi_i with psi_1 = a1 sin(k1 x1) + b1 cos(k1 x1) and
    psi_2 = a2 sin(k2 x2) + b2 cos(k2 x2); f is a Stokes eigenfunction with
    eigenvalue k1^2 + k2^2.
    """
    if k1 == k2 or k1 < 1 or k2 < 1:
        raise ValueError("need distinct positive wavenumbers")
    if max(k1, k2) > grid.kmax:
        raise ValueError("wavenumbers exceed the dealiased band")
    x1, x2 = grid.x
    psi1 = alpha[0] * np.sin(k1 * x1) + beta[0] * np.cos(k1 * x1)
    psi2 = alpha[1] * np.sin(k2 * x2) + beta[1] * np.cos(k2 * x2)
    psi = SpectralField.from_physical(grid, psi1 + psi2)
    u = perp_gradient(psi)
    f = nse_bilinear(u, u)
    fnorm = np.sqrt(inner(f, f))
    unorm = np.sqrt(inner(u, u))
    degenerate = fnorm <= 1e-12 * max(unorm**2, 1e-300) * max(k1, k2)
    return KolmogorovForce(f, float(k1 * k1 + k2 * k2), u, bool(degenerate))
