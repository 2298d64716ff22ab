"""YAML run configuration: schema validation, round-trip and solver assembly.

Example::

    equation: sqg
    nu: 1.0e-3
    gamma: 1.0
    grid: {n: 128}
    dt: 5.0e-3
    t_end: 50.0
    discard_fraction: 0.2
    forcing: {kind: default, amplitude: 1.0, kcut: 4}
    seed: 0
    output_dir: out/sqg

Sweeps add ``nus: [...]`` and optionally ``mode: kolmogorov``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .fields import default_sqg_forcing, modes_scalar, random_scalar, random_velocity, shell_velocity
from .integrator import SolverConfig
from .spectral import Grid, SpectralField, VelocityField

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "dump_config"]

TOP_KEYS = {
    "equation", "nu", "nus", "gamma", "grid", "dt", "t_end", "discard_fraction", "forcing",
    "initial", "seed", "output_dir", "sample_stride", "cfl", "mode",
}
GRID_KEYS = {"n", "dealias"}
FORCING_KEYS = {"kind", "modes", "amplitude", "kcut", "wavenumber", "file"}
INITIAL_KEYS = {"kind", "modes", "amplitude", "kcut", "seed", "file"}
FORCING_KINDS = {"sqg": ("default", "modes", "file", "none"), "nse": ("kolmogorov", "modes", "file")}
INITIAL_KINDS = ("zero", "modes", "random", "steady", "file")


class ConfigError(ValueError):
    """Schema violation; ``field`` names the offending key path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ForcingSpec:
    kind: str
    modes: tuple = ()
    amplitude: float = 1.0
    kcut: float = 4.0
    wavenumber: tuple = (1,)
    file: str | None = None


@dataclass(frozen=True)
class InitialSpec:
    kind: str = "zero"
    modes: tuple = ()
    amplitude: float = 1.0
    kcut: float = 8.0
    seed: int | None = None
    file: str | None = None


@dataclass(frozen=True)
class RunConfig:
    equation: str
    nu: float
    n: int
    dt: float
    t_end: float
    forcing: ForcingSpec
    gamma: float = 0.0
    dealias: float = 2.0 / 3.0
    discard_fraction: float = 0.2
    initial: InitialSpec = field(default_factory=InitialSpec)
    seed: int = 0
    output_dir: str = "output"
    sample_stride: int = 1
    cfl: float = 0.5
    nus: tuple = ()
    mode: str | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        out: dict[str, Any] = {
            "equation": self.equation,
            "nu": self.nu,
            "gamma": self.gamma,
            "grid": {"n": self.n, "dealias": self.dealias},
            "dt": self.dt,
            "t_end": self.t_end,
            "discard_fraction": self.discard_fraction,
            "forcing": _clean(d["forcing"]),
            "initial": _clean(d["initial"]),
            "seed": self.seed,
            "output_dir": self.output_dir,
            "sample_stride": self.sample_stride,
            "cfl": self.cfl,
        }
        if self.nus:
            out["nus"] = list(self.nus)
        if self.mode is not None:
            out["mode"] = self.mode
        return out

    @property
    def grid(self) -> Grid:
        return Grid(self.n, self.dealias)

    def with_nu(self, nu: float) -> "RunConfig":
        from dataclasses import replace

        return replace(self, nu=float(nu))

    # assembly -----------------------------------------------------------
    def build_forcing(self, base: Path | None = None):
        g = self.grid
        fs = self.forcing
        if fs.kind == "none":
            return None, None
        if fs.kind == "default":
            return default_sqg_forcing(g, self.seed, fs.kcut, fs.amplitude), None
        if fs.kind == "file":
            return _from_file(g, fs.file, self.equation, base), None
        if fs.kind == "modes":
            if self.equation == "sqg":
                return modes_scalar(g, fs.modes), None
            return shell_velocity(g, fs.modes), None
        from .experiments import kolmogorov_forcing

        w = fs.wavenumber
        return kolmogorov_forcing(g, w[0] if len(w) == 1 else tuple(w), fs.amplitude)

    def build(self, base: Path | None = None) -> tuple[SolverConfig, SpectralField | VelocityField | None]:
        """(SolverConfig, initial field) ready for :func:`sqglab.integrator.simulate`."""
        forcing, lam = self.build_forcing(base)
        cfg = SolverConfig(
            self.equation, nu=self.nu, grid=self.grid, dt=self.dt, t_end=self.t_end,
            gamma=self.gamma, forcing=forcing, seed=self.seed, sample_stride=self.sample_stride,
            cfl=self.cfl, discard_fraction=self.discard_fraction, eigenvalue=lam,
        )
        return cfg, self.build_initial(cfg, base)

    def build_initial(self, cfg: SolverConfig, base: Path | None = None):
        g = self.grid
        ini = self.initial
        seed = self.seed if ini.seed is None else ini.seed
        if ini.kind == "zero":
            return None
        if ini.kind == "file":
            return _from_file(g, ini.file, self.equation, base)
        if ini.kind == "modes":
            return modes_scalar(g, ini.modes) if self.equation == "sqg" else shell_velocity(g, ini.modes)
        if ini.kind == "random":
            if self.equation == "sqg":
                return random_scalar(g, seed, kcut=ini.kcut, l2=ini.amplitude)
            return random_velocity(g, seed, kcut=ini.kcut, l2=ini.amplitude)
        # steady: u_f = f / (nu lambda) for NSE, the linear fixed point for SQG
        if cfg.forcing is None:
            raise ConfigError("initial.kind", "steady start needs a forcing")
        if self.equation == "nse":
            return cfg.forcing * (1.0 / (self.nu * cfg.stokes_eigenvalue()))
        sym = cfg.linear_symbol()
        c = np.zeros_like(cfg.forcing.coeffs)
        nz = sym > 0
        c[nz] = cfg.forcing.coeffs[nz] / sym[nz]
        return SpectralField(g, c)


def _clean(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if v is None or (isinstance(v, tuple) and not v):
            continue
        out[k] = [list(m) if isinstance(m, tuple) else m for m in v] if isinstance(v, tuple) else v
    return out


def _from_file(grid: Grid, path: str, equation: str, base: Path | None):
    p = Path(path)
    if base is not None and not p.is_absolute():
        p = base / p
    try:
        arr = np.load(p)
    except OSError as exc:
        raise ConfigError("file", f"cannot read {p}: {exc}") from None
    want = grid.shape if equation == "sqg" else (2,) + grid.shape
    if arr.shape != want:
        raise ConfigError("file", f"array shape {arr.shape} does not match {want}")
    if equation == "sqg":
        return SpectralField.from_physical(grid, arr)
    return VelocityField.from_physical(grid, arr)


def _number(d: dict, key: str, path: str, default=None, minimum=None, strict=False, kind=float):
    if key not in d:
        if default is None:
            raise ConfigError(path + key, "required")
        return default
    v = d[key]
    if isinstance(v, str):
        # YAML 1.1 reads exponent literals without a dot (1e-3) as strings
        try:
            v = float(v)
        except ValueError:
            pass
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path + key, f"expected a number, got {v!r}")
    if kind is int and (not float(v).is_integer()):
        raise ConfigError(path + key, f"expected an integer, got {v!r}")
    v = kind(v)
    if not math.isfinite(v):
        raise ConfigError(path + key, "must be finite")
    if minimum is not None and (v < minimum or (strict and v == minimum)):
        raise ConfigError(path + key, f"must be {'>' if strict else '>='} {minimum}")
    return v


def _unknown(d: dict, allowed: set, path: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(path + extra[0], "unknown key")


def _modes(raw, path: str) -> tuple:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(path, "expected a non-empty list of [k1, k2, a] or [k1, k2, a, b]")
    out = []
    for i, m in enumerate(raw):
        if not isinstance(m, list) or len(m) not in (3, 4):
            raise ConfigError(f"{path}[{i}]", "expected [k1, k2, a] or [k1, k2, a, b]")
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in m[:2]):
            raise ConfigError(f"{path}[{i}]", "wavenumbers must be integers")
        out.append((int(m[0]), int(m[1])) + tuple(float(x) for x in m[2:]))
    return tuple(out)


def _section(raw: dict, key: str) -> dict:
    sec = raw.get(key)
    if not isinstance(sec, dict):
        raise ConfigError(key, "expected a mapping")
    return sec


def parse_config(raw: Any) -> RunConfig:
    """Validate a mapping (as loaded from YAML) into a :class:`RunConfig`."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping")
    _unknown(raw, TOP_KEYS, "")
    eq = raw.get("equation")
    if eq not in ("sqg", "nse"):
        raise ConfigError("equation", f"must be 'sqg' or 'nse', got {eq!r}")
    nus = ()
    if "nus" in raw:
        if not isinstance(raw["nus"], list) or not raw["nus"]:
            raise ConfigError("nus", "expected a non-empty list")
        nus = tuple(_number({"v": v}, "v", f"nus[{i}].", minimum=0.0, strict=True) for i, v in enumerate(raw["nus"]))
    nu = _number(raw, "nu", "", default=nus[0] if nus else None, minimum=0.0)
    gamma = _number(raw, "gamma", "", default=0.0, minimum=0.0)
    if eq == "nse" and gamma != 0.0:
        raise ConfigError("gamma", "damping applies to sqg only")
    grid = _section(raw, "grid")
    _unknown(grid, GRID_KEYS, "grid.")
    n = _number(grid, "n", "grid.", kind=int, minimum=16)
    if n % 2:
        raise ConfigError("grid.n", "must be even")
    dealias = _number(grid, "dealias", "grid.", default=2.0 / 3.0, minimum=0.0, strict=True)
    if dealias > 1:
        raise ConfigError("grid.dealias", "must lie in (0, 1]")
    dt = _number(raw, "dt", "", minimum=0.0, strict=True)
    t_end = _number(raw, "t_end", "", minimum=0.0, strict=True)
    disc = _number(raw, "discard_fraction", "", default=0.2, minimum=0.0)
    if disc >= 1:
        raise ConfigError("discard_fraction", "must be < 1")
    if "forcing" not in raw:
        if eq == "nse":
            raise ConfigError("forcing", "required for equation 'nse'")
        forcing = ForcingSpec("none")
    else:
        forcing = _forcing(_section(raw, "forcing"), eq)
    initial = _initial(_section(raw, "initial"), eq) if "initial" in raw else InitialSpec()
    seed = _number(raw, "seed", "", default=0, kind=int, minimum=0)
    out = raw.get("output_dir", "output")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir", "expected a non-empty string")
    stride = _number(raw, "sample_stride", "", default=1, kind=int, minimum=1)
    cfl = _number(raw, "cfl", "", default=0.5, minimum=0.0, strict=True)
    if cfl > 0.5:
        raise ConfigError("cfl", "must not exceed 0.5")
    mode = raw.get("mode")
    if mode is not None and mode not in ("sqg", "kolmogorov"):
        raise ConfigError("mode", "must be 'sqg' or 'kolmogorov'")
    if mode == "kolmogorov" and eq != "nse":
        raise ConfigError("mode", "kolmogorov sweeps need equation 'nse'")
    return RunConfig(
        equation=eq, nu=nu, n=n, dt=dt, t_end=t_end, forcing=forcing, gamma=gamma, dealias=dealias,
        discard_fraction=disc, initial=initial, seed=seed, output_dir=out, sample_stride=stride,
        cfl=cfl, nus=nus, mode=mode,
    )


def _forcing(sec: dict, eq: str) -> ForcingSpec:
    _unknown(sec, FORCING_KEYS, "forcing.")
    kind = sec.get("kind")
    if kind not in FORCING_KINDS[eq]:
        raise ConfigError("forcing.kind", f"must be one of {FORCING_KINDS[eq]} for {eq}")
    amp = _number(sec, "amplitude", "forcing.", default=1.0, minimum=0.0)
    kcut = _number(sec, "kcut", "forcing.", default=4.0, minimum=1.0)
    if kind == "modes" and "modes" not in sec:
        raise ConfigError("forcing.modes", "required for kind 'modes'")
    modes = _modes(sec["modes"], "forcing.modes") if kind == "modes" else ()
    wn = (1,)
    if "wavenumber" in sec:
        w = sec["wavenumber"]
        w = w if isinstance(w, list) else [w]
        if not w or len(w) > 2 or not all(isinstance(k, int) and not isinstance(k, bool) and k >= 1 for k in w):
            raise ConfigError("forcing.wavenumber", "expected a positive integer or a pair of them")
        wn = tuple(w)
    path = sec.get("file")
    if kind == "file" and not isinstance(path, str):
        raise ConfigError("forcing.file", "required for kind 'file'")
    return ForcingSpec(kind, modes, amp, kcut, wn, path)


def _initial(sec: dict, eq: str) -> InitialSpec:
    _unknown(sec, INITIAL_KEYS, "initial.")
    kind = sec.get("kind", "zero")
    if kind not in INITIAL_KINDS:
        raise ConfigError("initial.kind", f"must be one of {INITIAL_KINDS}")
    modes = _modes(sec.get("modes"), "initial.modes") if kind == "modes" else ()
    seed = _number(sec, "seed", "initial.", default=-1, kind=int, minimum=-1)
    path = sec.get("file")
    if kind == "file" and not isinstance(path, str):
        raise ConfigError("initial.file", "required for kind 'file'")
    return InitialSpec(
        kind, modes,
        _number(sec, "amplitude", "initial.", default=1.0, minimum=0.0),
        _number(sec, "kcut", "initial.", default=8.0, minimum=1.0),
        None if seed < 0 else seed,
        path,
    )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML: {exc}") from None
    return parse_config(raw)


def dump_config(config: RunConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
