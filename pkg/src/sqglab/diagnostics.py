"""Trajectory records and long-time averaging.

Finite-horizon Cesaro means stand in for generalized limits; every average is
reported together with a convergence verdict so callers can discard runs whose
permanent regime has not settled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

CSV_COLUMNS = ("t", "l2sq", "h12sq", "gradsq", "linf", "inject", "residual", "delta", "mu")


@dataclass
class TrajectoryRecord:
    """Diagnostics sampled at one instant.

    ``residual`` is the signed energy-balance residual accumulated since the
    previous record; the ``cum_*`` channels are step-level trapezoidal time
    integrals from t = 0.
    """

    t: float
    l2sq: float
    h12sq: float
    gradsq: float
    linf: float
    inject: float
    residual: float = 0.0
    delta: float | None = None
    mu: float | None = None
    l1: float = float("nan")
    cum_inject: float = 0.0
    cum_h12sq: float = 0.0
    cum_gradsq: float = 0.0
    cum_abs_residual: float = 0.0
    extras: dict = field(default_factory=dict)

    def csv_row(self) -> list[str]:
        row = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            row.append("" if v is None else repr(float(v)))
        return row


class Trajectory:
    """Append-only sequence of :class:`TrajectoryRecord` for one run."""

    def __init__(self, config=None):
        self.config = config
        self.records: list[TrajectoryRecord] = []
        self.states: list = []
        self.final_state = None

    def append(self, record: TrajectoryRecord, state=None) -> None:
        self.records.append(record)
        if state is not None:
            self.states.append(state)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    def column(self, name: str) -> np.ndarray:
        if self.records and name in self.records[0].extras:
            return np.array([r.extras[name] for r in self.records], dtype=float)
        vals = [getattr(r, name) for r in self.records]
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    def window(self, spec=0.2) -> tuple[int, int]:
        """Index range [i0, i1] of an averaging window.

        ``spec`` is either a discard fraction or an explicit ``(t0, t1)`` pair.
        """
        t = self.times
        if len(t) < 2:
            raise ValueError("trajectory too short for an averaging window")
        if isinstance(spec, (tuple, list)):
            t0, t1 = spec
        else:
            t0, t1 = t[0] + spec * (t[-1] - t[0]), t[-1]
        i0 = int(np.searchsorted(t, t0 - 1e-12 * max(1.0, abs(t0))))
        i1 = int(np.searchsorted(t, t1 + 1e-12 * max(1.0, abs(t1)), side="right")) - 1
        if i1 <= i0:
            raise ValueError("empty averaging window")
        return i0, i1

    def window_average(self, name: str, spec=0.2) -> float:
        """Time average of a channel over the window.

        Uses the step-level cumulative integral when one is recorded,
        otherwise the trapezoid rule on the samples.
        """
        i0, i1 = self.window(spec)
        t = self.times
        cum = "cum_" + name
        if self.records and hasattr(self.records[0], cum):
            c = self.column(cum)
            return float((c[i1] - c[i0]) / (t[i1] - t[i0]))
        y = self.column(name)
        return float(np.trapezoid(y[i0:i1 + 1], t[i0:i1 + 1]) / (t[i1] - t[i0]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow(r.csv_row())


class TimeAverage:
    """Running mean/variance of a sampled observable after a transient.

    Samples with ``t < start`` are ignored.  ``curve`` keeps the Cesaro mean
    after each accepted sample.
    """

    def __init__(self, start: float = 0.0):
        self.start = start
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0
        self.horizon = start
        self.curve: list[tuple[float, float]] = []

    def update(self, t: float, value: float) -> None:
        if t < self.start:
            return
        self.count += 1
        d = value - self.mean
        self.mean += d / self.count
        self._m2 += d * (value - self.mean)
        self.horizon = t
        self.curve.append((t, self.mean))

    @property
    def variance(self) -> float:
        return self._m2 / (self.count - 1) if self.count > 1 else 0.0


class EpsilonEstimate(NamedTuple):
    value: float
    limsup: float
    t0: float
    t1: float


def epsilon_estimate(trajectory: Trajectory, nu: float, window=0.2) -> EpsilonEstimate:
    """nu * time-average of ||grad theta||^2 over the window, plus a limsup proxy.

    The limsup proxy is the largest Cesaro mean over the trailing half of the
    window.
    """
    i0, i1 = trajectory.window(window)
    t = trajectory.times
    cum = trajectory.column("cum_gradsq")
    value = nu * (cum[i1] - cum[i0]) / (t[i1] - t[i0])
    mid = i0 + max(1, (i1 - i0) // 2)
    ces = nu * (cum[mid:i1 + 1] - cum[i0]) / (t[mid:i1 + 1] - t[i0])
    return EpsilonEstimate(float(value), float(np.max(ces)), float(t[i0]), float(t[i1]))


class ConvergenceReport(NamedTuple):
    cesaro: np.ndarray
    mean: float
    oscillation: float
    converged: bool


def cesaro_curve(series: Sequence[float], times: Sequence[float] | None = None) -> np.ndarray:
    y = np.asarray(series, dtype=float)
    t = np.arange(len(y), dtype=float) if times is None else np.asarray(times, dtype=float)
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))])
    elapsed = t - t[0]
    out = np.empty_like(y)
    out[0] = y[0]
    out[1:] = integral[1:] / elapsed[1:]
    return out


def average_convergence(
    series: Sequence[float],
    times: Sequence[float] | None = None,
    rtol: float = 0.05,
    atol: float = 1e-14,
) -> ConvergenceReport:
    """Cesaro curve and a verdict: converged when its spread over the final
    half is below ``rtol`` times the final mean (or below ``atol``)."""
    y = np.asarray(series, dtype=float)
    if y.size < 10:
        raise ValueError("need at least 10 samples")
    ces = cesaro_curve(y, times)
    tail = ces[len(ces) // 2:]
    osc = float(tail.max() - tail.min())
    mean = float(ces[-1])
    ok = bool(np.all(np.isfinite(ces))) and (osc <= atol or osc < rtol * abs(mean))
    return ConvergenceReport(ces, mean, osc, ok)


def lp_envelope(t: np.ndarray, initial: float, forcing: float, gamma: float) -> np.ndarray:
    """e^{-gamma t}(||theta0|| - ||f||/gamma)_+ + ||f||/gamma."""
    if gamma <= 0:
        return np.full_like(np.asarray(t, dtype=float), np.inf)
    steady = forcing / gamma
    return np.exp(-gamma * np.asarray(t)) * max(initial - steady, 0.0) + steady


@dataclass
class SupportReport:
    maxima: dict
    bounds: dict
    h12_average: float
    h12_bound: float
    violations: list
    h12_window_bound: float = math.inf

    @property
    def ok(self) -> bool:
        return not self.violations


def support_envelope(trajectory: Trajectory, forcing, theta0, gamma: float, window=0.2, tol: float = 1e-6) -> SupportReport:
    """Running maxima of the phase-space norms against their predicted bounds.

    ``h12_bound`` is the asymptotic bound ||f||/gamma on the averaged H1/2
    norm.  Violations are judged against the finite-window bound
    gamma avg||theta||^2_{H1/2} <= ||f||^2/gamma + ||theta(t0)||^2 / T_w,
    which follows from the energy balance and holds on every window.
    """
    from .spectral import norm

    refine = getattr(trajectory.config, "linf_refine", 1)

    t = trajectory.times
    series = {
        "h12": np.sqrt(trajectory.column("h12sq")),
        "L1": trajectory.column("l1"),
        "L2": np.sqrt(trajectory.column("l2sq")),
        "Linf": trajectory.column("linf"),
    }
    maxima = {k: float(np.nanmax(v)) for k, v in series.items()}
    bounds = {}
    violations = []
    for name, p in (("L1", 1), ("L2", 2), ("Linf", np.inf)):
        # same sampling as the recorded L-infinity channel
        r = refine if p == np.inf else 1
        f_p = norm(forcing, "Lp", p=p, refine=r) if name != "L2" else norm(forcing)
        t_p = norm(theta0, "Lp", p=p, refine=r) if name != "L2" else norm(theta0)
        bounds[name] = t_p + f_p / gamma
        env = lp_envelope(t, t_p, f_p, gamma)
        s = series[name]
        bad = np.where(s > env + tol)[0]
        if np.isfinite(s).all() and bad.size:
            violations.append(f"{name} exceeds its envelope at t={t[bad[0]]:.6g} by {float((s - env)[bad].max()):.3e}")
    h12_avg = math.sqrt(max(trajectory.window_average("h12sq", window), 0.0))
    h12_bound = norm(forcing) / gamma
    i0, i1 = trajectory.window(window)
    span = t[i1] - t[i0]
    l2_start = trajectory.column("l2sq")[i0]
    window_bound = math.sqrt(h12_bound**2 + l2_start / (gamma * span))
    if h12_avg > window_bound + tol:
        violations.append(f"time-averaged H1/2 norm {h12_avg:.6g} exceeds {window_bound:.6g}")
    return SupportReport(maxima, bounds, h12_avg, h12_bound, violations, window_bound)


class DeltaReport(NamedTuple):
    t: np.ndarray
    delta: np.ndarray
    mu: np.ndarray
    bound: np.ndarray
    delta_plus0: float


def delta_report(trajectory: Trajectory, nu: float) -> DeltaReport:
    """delta(t), mu(t) and the envelope delta(0) exp(-2 nu int_0^t mu)."""
    t = trajectory.times
    d = trajectory.column("delta")
    mu = trajectory.column("mu")
    imu = np.concatenate([[0.0], np.cumsum(0.5 * (mu[1:] + mu[:-1]) * np.diff(t))])
    bound = d[0] * np.exp(-2.0 * nu * imu)
    return DeltaReport(t, d, mu, bound, max(0.0, float(d[0])))


def balance_identity_defect(trajectory: Trajectory, nu: float, gamma: float, window=0.2) -> tuple[float, float]:
    """(epsilon, injection - damping - drift) over the window, both time averages."""
    i0, i1 = trajectory.window(window)
    t = trajectory.times
    span = t[i1] - t[i0]
    eps = epsilon_estimate(trajectory, nu, window).value
    inj = trajectory.window_average("inject", window)
    damp = gamma * trajectory.window_average("h12sq", window)
    l2 = trajectory.column("l2sq")
    drift = 0.5 * (l2[i1] - l2[i0]) / span
    return eps, inj - damp - drift
