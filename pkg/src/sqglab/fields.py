"""Seeded constructors for forcings, initial data and synthetic test fields."""

from __future__ import annotations

import numpy as np

from .spectral import Grid, SpectralField, VelocityField, norm, perp_gradient


def _hermitian(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    # round trip through physical space enforces conjugate symmetry
    return grid.to_spectral(grid.to_physical(coeffs))


def random_scalar(
    grid: Grid,
    seed: int,
    kcut: float | None = None,
    slope: float = 0.0,
    l2: float | None = 1.0,
) -> SpectralField:
    """Mean-free field with |coeff(k)| ~ |k|^slope and uniform random phases.

    Modes are restricted to ``|k| <= kcut`` (default: the dealiased band).
    """
    rng = np.random.default_rng(seed)
    kabs = grid.kabs
    keep = grid.mask & (kabs > 0)
    if kcut is not None:
        keep &= kabs <= kcut
    amp = np.zeros(grid.spectral_shape)
    amp[keep] = kabs[keep] ** slope
    phase = rng.uniform(0.0, 2 * np.pi, size=grid.spectral_shape)
    c = _hermitian(grid, amp * np.exp(1j * phase)) * grid.mask
    c[0, 0] = 0.0
    f = SpectralField(grid, c)
    if l2 is not None:
        f = f * (l2 / norm(f))
    return f


def rough_scalar(grid: Grid, seed: int) -> SpectralField:
    """Synthetic rough field: modulus |k|^{-3/2}, random phases, unit L-infinity."""
    f = random_scalar(grid, seed, slope=-1.5, l2=None)
    return f * (1.0 / norm(f, "Lp", p=np.inf))


def default_sqg_forcing(grid: Grid, seed: int = 0, kcut: float = 4.0, l2: float = 1.0) -> SpectralField:
    """Smooth low-mode forcing supported on shells |k| <= kcut, ||f||_L2 = l2."""
    return random_scalar(grid, seed, kcut=kcut, l2=l2)


def modes_scalar(grid: Grid, modes) -> SpectralField:
    """Sum of a cos(k.x) + b sin(k.x) for entries ``(k1, k2, a[, b])``."""
    x1, x2 = grid.x
    vals = np.zeros(grid.shape)
    for m in modes:
        k1, k2, a = m[0], m[1], m[2]
        b = m[3] if len(m) > 3 else 0.0
        arg = k1 * x1 + k2 * x2
        vals += a * np.cos(arg) + b * np.sin(arg)
    f = SpectralField.from_physical(grid, vals)
    f.coeffs[0, 0] = 0.0
    return f


def random_velocity(grid: Grid, seed: int, kcut: float | None = None, slope: float = 0.0, l2: float = 1.0) -> VelocityField:
    """Divergence-free field grad_perp psi with a random stream function."""
    u = perp_gradient(random_scalar(grid, seed, kcut=kcut, slope=slope, l2=None))
    u = VelocityField(grid, u.coeffs * grid.mask)
    return u * (l2 / norm(u))


def shell_velocity(grid: Grid, modes, l2: float | None = None) -> VelocityField:
    """grad_perp of a stream function built from ``modes`` (see :func:`modes_scalar`)."""
    u = perp_gradient(modes_scalar(grid, modes))
    if l2 is not None:
        u = u * (l2 / norm(u))
    return u


def kolmogorov_shear(grid: Grid, k: int = 1, l2: float = 1.0) -> VelocityField:
    """Single-mode Kolmogorov forcing (sin(k x2), 0) scaled to ||f||_L2 = l2."""
    x1, x2 = grid.x
    vals = np.stack([np.sin(k * x2), np.zeros(grid.shape)])
    f = VelocityField.from_physical(grid, vals)
    return f * (l2 / norm(f))
