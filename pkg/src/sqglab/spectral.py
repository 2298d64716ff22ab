"""Fourier representation of fields on the 2*pi-periodic torus.

Coefficients are stored in the real-to-complex (``rfft2``) layout, shape
``(n, n//2 + 1)``, normalized so that ``coeffs[k] `` is the Fourier coefficient
with respect to the normalized measure ``dx / (2*pi)**2``.  Physical arrays are
indexed ``[i1, i2]`` with ``x1 = 2*pi*i1/n`` and ``x2 = 2*pi*i2/n``; the first
wavenumber component therefore runs along axis 0 (full range) and the second
along axis 1 (half range).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft
from scipy.special import j0

try:  # FFTW is roughly twice as fast as pocketfft at these sizes
    import pyfftw
except ImportError:  # pragma: no cover - exercised only without pyfftw
    pyfftw = None

__all__ = [
    "Grid",
    "SpectralField",
    "VelocityField",
    "lambda_pow",
    "riesz_perp",
    "leray_project",
    "mollify",
    "mollifier_symbol",
    "bump",
    "norm",
    "inner",
    "gradient",
    "perp_gradient",
    "divergence",
    "laplacian",
    "product",
    "cordoba_density",
    "CordobaDensity",
]


@dataclass(frozen=True)
class Grid:
    """Square n x n collocation grid on [0, 2*pi)^2.

    ``dealias_fraction`` is the retained fraction of the Nyquist range; the
    default 2/3 keeps every mode with ``max(|k1|, |k2|) < n/3`` so quadratic
    products of retained fields are alias free on the retained band.
    """

    n: int
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if self.n < 16 or self.n % 2:
            raise ValueError(f"grid size must be even and >= 16, got {self.n}")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def spectral_shape(self) -> tuple[int, int]:
        return (self.n, self.n // 2 + 1)

    @cached_property
    def kmax(self) -> int:
        # largest retained |k_i|; strict inequality keeps 3*kmax < n for 2/3
        return int(np.ceil(self.dealias_fraction * self.n / 2)) - 1

    @cached_property
    def k1(self) -> np.ndarray:
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        return np.broadcast_to(k[:, None], self.spectral_shape).copy()

    @cached_property
    def k2(self) -> np.ndarray:
        k = np.fft.rfftfreq(self.n, 1.0 / self.n)
        return np.broadcast_to(k[None, :], self.spectral_shape).copy()

    @cached_property
    def ksq(self) -> np.ndarray:
        return self.k1**2 + self.k2**2

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.ksq)

    @cached_property
    def inv_kabs(self) -> np.ndarray:
        out = np.zeros(self.spectral_shape)
        nz = self.ksq > 0
        out[nz] = 1.0 / self.kabs[nz]
        return out

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each stored coefficient in the full spectrum."""
        w = np.full(self.spectral_shape, 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        return w

    @cached_property
    def mask(self) -> np.ndarray:
        km = self.kmax
        return (np.abs(self.k1) <= km) & (np.abs(self.k2) <= km)

    @cached_property
    def bilinear_symbols(self) -> tuple[np.ndarray, np.ndarray]:
        """Multipliers folding div(u u) and the Leray projection into one step."""
        inv = self.inv_kabs**2 * self.mask
        return 1j * (self.k1**2 - self.k2**2) * inv, 1j * self.k1 * self.k2 * inv

    @cached_property
    def masked_ik(self) -> tuple[np.ndarray, np.ndarray]:
        return 1j * self.k1 * self.mask, 1j * self.k2 * self.mask

    @cached_property
    def top_third(self) -> np.ndarray:
        return (np.abs(self.k1) > self.n / 3) | (np.abs(self.k2) > self.n / 3)

    @cached_property
    def x(self) -> tuple[np.ndarray, np.ndarray]:
        s = 2 * np.pi * np.arange(self.n) / self.n
        return np.meshgrid(s, s, indexing="ij")

    def padded(self, factor: int = 2) -> "Grid":
        return Grid(self.n * factor, self.dealias_fraction)

    # transforms -------------------------------------------------------
    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        return rfft2(np.ascontiguousarray(values, dtype=float), self.n)

    def to_physical(self, coeffs: np.ndarray) -> np.ndarray:
        return irfft2(np.ascontiguousarray(coeffs, dtype=complex), self.n)

    def pad_coeffs(self, coeffs: np.ndarray, factor: int = 2) -> np.ndarray:
        """Embed coefficients into the grid ``factor`` times finer (exact)."""
        big = self.padded(factor)
        n, m = self.n, big.n
        out = np.zeros(coeffs.shape[:-2] + big.spectral_shape, dtype=complex)
        h = n // 2
        # drop the Nyquist row/column: they never carry retained modes
        out[..., :h, :h] = coeffs[..., :h, :h]
        out[..., m - h + 1:, :h] = coeffs[..., h + 1:, :h]
        return out

    def truncate_coeffs(self, coeffs: np.ndarray, factor: int = 2) -> np.ndarray:
        """Inverse of :meth:`pad_coeffs`: restrict fine coefficients to this grid."""
        m = self.n * factor
        h = self.n // 2
        out = np.zeros(coeffs.shape[:-2] + self.spectral_shape, dtype=complex)
        out[..., :h, :h] = coeffs[..., :h, :h]
        out[..., h + 1:, :h] = coeffs[..., m - h + 1:, :h]
        return out


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real scalar field given by its (normalized) Fourier coefficients."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        return cls(grid, grid.to_spectral(np.asarray(values, dtype=float)))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "SpectralField":
        return cls.from_physical(grid, func(*grid.x))

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros(grid.spectral_shape, dtype=complex))

    def physical(self) -> np.ndarray:
        return self.grid.to_physical(self.coeffs)

    def full_coeffs(self) -> np.ndarray:
        """Coefficients on the full ``n x n`` wavenumber lattice (fft2 layout)."""
        return sfft.fft2(self.physical()) / self.grid.n**2

    @property
    def mean(self) -> float:
        return float(self.coeffs[0, 0].real)

    def dealiased(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * self.grid.mask)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Planar vector field; ``coeffs`` has shape ``(2, n, n//2 + 1)``."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    @classmethod
    def from_components(cls, u1: SpectralField, u2: SpectralField) -> "VelocityField":
        return cls(u1.grid, np.stack([u1.coeffs, u2.coeffs]))

    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "VelocityField":
        return cls(grid, grid.to_spectral(np.asarray(values, dtype=float)))

    @classmethod
    def from_stream(cls, psi: SpectralField) -> "VelocityField":
        """u = grad-perp psi = (-d2 psi, d1 psi)."""
        return perp_gradient(psi)

    @property
    def components(self) -> tuple[SpectralField, SpectralField]:
        return SpectralField(self.grid, self.coeffs[0]), SpectralField(self.grid, self.coeffs[1])

    def physical(self) -> np.ndarray:
        return self.grid.to_physical(self.coeffs)

    def divergence_defect(self) -> float:
        """max_k |k . u_hat(k)| relative to max_k |k| |u_hat(k)|."""
        g = self.grid
        div = np.abs(g.k1 * self.coeffs[0] + g.k2 * self.coeffs[1])
        scale = np.max(g.kabs * np.sqrt(np.abs(self.coeffs[0]) ** 2 + np.abs(self.coeffs[1]) ** 2))
        return float(div.max() / scale) if scale > 0 else 0.0

    def shell_coeffs(self) -> np.ndarray:
        """Scalar coefficients u_j with u_hat(j) = u_j j_perp / |j|."""
        g = self.grid
        return (-g.k2 * self.coeffs[0] + g.k1 * self.coeffs[1]) * g.inv_kabs

    def __add__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> "VelocityField":
        return VelocityField(self.grid, -self.coeffs)

    def __mul__(self, scalar: float) -> "VelocityField":
        return VelocityField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# transforms

_PLANS: dict = {}


def _plan(kind: str, shape: tuple, n: int):
    key = (kind, shape)
    plan = _PLANS.get(key)
    if plan is None:
        # ESTIMATE planning is deterministic, so reruns stay bit-identical
        opts = dict(axes=(-2, -1), planner_effort="FFTW_ESTIMATE", threads=1)
        if kind == "r2c":
            tmpl = pyfftw.empty_aligned(shape, dtype="float64")
            plan = pyfftw.builders.rfft2(tmpl, **opts)
        else:
            tmpl = pyfftw.empty_aligned(shape, dtype="complex128")
            plan = pyfftw.builders.irfft2(tmpl, s=(n, n), **opts)
        _PLANS[key] = plan
    return plan


def rfft2(values: np.ndarray, n: int) -> np.ndarray:
    """Normalized forward transform: returns values' Fourier coefficients."""
    if pyfftw is None:
        return sfft.rfft2(values, axes=(-2, -1), norm="forward")
    plan = _plan("r2c", values.shape, n)
    plan.input_array[...] = values
    plan.execute()
    return plan.output_array * (1.0 / (n * n))


def irfft2(coeffs: np.ndarray, n: int) -> np.ndarray:
    """Synthesis sum_k c_k e^{ik.x} on the n x n grid."""
    if pyfftw is None:
        return sfft.irfft2(coeffs, s=(n, n), axes=(-2, -1), norm="forward")
    # c2r destroys its input, so always work on the plan's own buffer
    plan = _plan("c2r", coeffs.shape, n)
    plan.input_array[...] = coeffs
    plan.execute()
    return plan.output_array.copy()


# ---------------------------------------------------------------------------
# linear operators


def _check_mean_free(f: SpectralField, what: str) -> None:
    c0 = abs(f.coeffs[..., 0, 0]).max()
    scale = np.sqrt(np.sum(f.grid.weights * np.abs(f.coeffs) ** 2))
    if c0 > 1e-12 * max(scale, 1e-300) and c0 > 1e-300:
        raise ValueError(f"{what} requires a mean-free field (mean = {c0:.3e})")


def lambda_pow(field: SpectralField, s: float) -> SpectralField:
    """Fractional power Lambda^s = (-Delta)^(s/2), symbol |k|^s."""
    g = field.grid
    if s < 0:
        _check_mean_free(field, "lambda_pow with negative exponent")
        sym = g.inv_kabs ** (-s)
    elif s == 0:
        return SpectralField(g, field.coeffs.copy())
    else:
        sym = g.kabs**s
    return SpectralField(g, field.coeffs * sym)


def riesz_perp(theta: SpectralField) -> VelocityField:
    """SQG velocity u = R_perp theta = grad_perp Lambda^{-1} theta."""
    _check_mean_free(theta, "riesz_perp")
    g = theta.grid
    c = theta.coeffs * g.inv_kabs
    return VelocityField(g, np.stack([-1j * g.k2 * c, 1j * g.k1 * c]))


def leray_project(v: VelocityField) -> VelocityField:
    """Per-mode projection P_j v = (v . j_perp/|j|) j_perp/|j|."""
    g = v.grid
    a = (-g.k2 * v.coeffs[0] + g.k1 * v.coeffs[1]) * g.inv_kabs**2
    return VelocityField(g, np.stack([-g.k2 * a, g.k1 * a]))


def gradient(f: SpectralField) -> VelocityField:
    g = f.grid
    return VelocityField(g, np.stack([1j * g.k1 * f.coeffs, 1j * g.k2 * f.coeffs]))


def perp_gradient(f: SpectralField) -> VelocityField:
    g = f.grid
    return VelocityField(g, np.stack([-1j * g.k2 * f.coeffs, 1j * g.k1 * f.coeffs]))


def divergence(v: VelocityField) -> SpectralField:
    g = v.grid
    return SpectralField(g, 1j * (g.k1 * v.coeffs[0] + g.k2 * v.coeffs[1]))


def laplacian(f):
    """Componentwise Laplacian of a scalar or vector field."""
    return type(f)(f.grid, -f.grid.ksq * f.coeffs)


# ---------------------------------------------------------------------------
# mollifier


def bump(r: np.ndarray) -> np.ndarray:
    """Unnormalized profile exp(-1/(1-r^2)) on r < 1, zero outside."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


@lru_cache(maxsize=None)
def _radial_rule(nodes: int = 400) -> tuple[np.ndarray, np.ndarray, float]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    r = 0.5 * (x + 1.0)
    w = 0.5 * w * bump(r) * r
    mass = 2 * np.pi * w.sum()
    return r, w, mass


def bump_mass() -> float:
    """Integral of the unnormalized bump over the unit disc."""
    return _radial_rule()[2]


def mollifier_symbol(rho: np.ndarray) -> np.ndarray:
    """Fourier transform j_hat(rho) of the unit-mass radial bump at |xi| = rho."""
    r, w, mass = _radial_rule()
    rho = np.asarray(rho, dtype=float)
    flat = rho.ravel()
    out = np.empty_like(flat)
    # chunk so the (len, nodes) table stays small
    for s in range(0, flat.size, 4096):
        chunk = flat[s:s + 4096]
        out[s:s + 4096] = 2 * np.pi * (j0(np.outer(chunk, r)) @ w) / mass
    return out.reshape(rho.shape)


@lru_cache(maxsize=64)
def _symbol_table(n: int, eps: float) -> np.ndarray:
    g = Grid(n)
    kabs = g.kabs
    # symbol is radial: evaluate once per distinct |k|
    ksq = np.rint(g.ksq).astype(np.int64)
    uniq, inv = np.unique(ksq, return_inverse=True)
    vals = mollifier_symbol(eps * np.sqrt(uniq.astype(float)))
    table = vals[inv].reshape(kabs.shape)
    table.setflags(write=False)
    return table


def mollifier_table(grid: Grid, eps: float) -> np.ndarray:
    if eps < 0:
        raise ValueError("mollifier width must be nonnegative")
    if eps == 0:
        return np.ones(grid.spectral_shape)
    return _symbol_table(grid.n, float(eps))


def mollify(field, eps: float):
    """J_eps: convolution with eps^-2 j(x/eps); the identity when eps == 0."""
    if eps < 0:
        raise ValueError("mollifier width must be nonnegative")
    if eps == 0:
        return type(field)(field.grid, field.coeffs.copy())
    return type(field)(field.grid, field.coeffs * mollifier_table(field.grid, eps))


# ---------------------------------------------------------------------------
# norms, inner products, products


def inner(a, b) -> float:
    """Normalized L2 inner product, summed over components for vector fields."""
    w = a.grid.weights
    return float(np.sum(w * (a.coeffs * np.conj(b.coeffs)).real))


def _parseval(f, sym=None) -> float:
    p = np.abs(f.coeffs) ** 2
    if sym is not None:
        p = p * sym
    return float(np.sum(f.grid.weights * p))


def norm(f, which: str = "L2", p: float | None = None, refine: int = 1) -> float:
    """Field norms with respect to the normalized measure.

    ``which`` is one of ``"L2"``, ``"H1/2"`` (inhomogeneous, symbol 1+|k|),
    ``"H1"`` (homogeneous, equals ||grad f||) or ``"Lp"``.  Lp norms are grid
    sampled (optionally on a ``refine`` times finer grid), hence lower bounds.
    """
    g = f.grid
    if which == "L2":
        return np.sqrt(_parseval(f))
    if which in ("H1/2", "H12"):
        return np.sqrt(_parseval(f, 1.0 + g.kabs))
    if which == "H1":
        return np.sqrt(_parseval(f, g.ksq))
    if which == "Lp":
        if p is None or p < 1:
            raise ValueError("Lp norm requires p >= 1")
        if refine > 1:
            vals = g.padded(refine).to_physical(g.pad_coeffs(f.coeffs, refine))
        else:
            vals = f.physical()
        if isinstance(f, VelocityField):
            vals = np.sqrt(vals[0] ** 2 + vals[1] ** 2)
        vals = np.abs(vals)
        if np.isinf(p):
            return float(vals.max())
        return float(np.mean(vals**p) ** (1.0 / p))
    raise ValueError(f"unknown norm {which!r}")


def product(a: SpectralField, b: SpectralField) -> SpectralField:
    """Pointwise product truncated to the dealiased band."""
    g = a.grid
    c = g.to_spectral(a.physical() * b.physical())
    return SpectralField(g, c * g.mask)


class CordobaDensity(NamedTuple):
    values: np.ndarray
    under_resolved: bool


def cordoba_density(phi: SpectralField) -> CordobaDensity:
    """D[phi] = 2 phi Lambda phi - Lambda(phi^2) sampled on the grid points.

    phi^2 is formed on a twice finer grid so its spectrum is exact.
    """
    g = phi.grid
    total = _parseval(phi)
    top = float(np.sum(g.weights * g.top_third * np.abs(phi.coeffs) ** 2))
    under = total > 0 and top > 1e-8 * total
    fine = g.padded(2)
    c = g.pad_coeffs(phi.coeffs, 2)
    ph = fine.to_physical(c)
    lph = fine.to_physical(c * fine.kabs)
    sq = fine.to_spectral(ph * ph)
    lsq = fine.to_physical(sq * fine.kabs)
    d = 2 * ph * lph - lsq
    return CordobaDensity(d[::2, ::2].copy(), bool(under))
