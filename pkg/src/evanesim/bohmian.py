"""Polar decomposition, weak momentum values, guiding velocity, trajectories.

The complex weak value of momentum at position x is

    p_w(x) = grad S - i hbar grad R / R        (psi = R e^{i S / hbar})

whose real part divided by m is the phase-gradient velocity v_S (equal to
the guiding velocity j/rho) and whose imaginary part encodes the amplitude
decay rate. Nodes where R falls below a relative threshold are masked: the
formulas presuppose R > 0 and are noise-dominated below it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ExtractionError, PhaseUnwrapError, ValidationError
from .params import UnitSystem
from .stationary import Grid

__all__ = [
    "Axis", "PolarField", "WeakMomentumField", "Trajectory", "EnsembleAverage",
    "polar_decompose", "weak_momentum", "operational_speeds",
    "probability_current", "bohm_velocity", "integrate_trajectory_stationary",
    "ensemble_weak_average",
]

MASK_REL_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class Axis:
    """Bare uniform sample axis. Everything here needs only .x and .h, so a
    Grid or a restriction of one (e.g. the coupled region x >= 0) works."""

    x: np.ndarray
    h: float

    @property
    def n_points(self) -> int:
        return len(self.x)


@dataclass(eq=False)
class PolarField:
    """Amplitude R, unwrapped phase S (action units) and their derivatives."""

    grid: Grid
    R: np.ndarray
    S: np.ndarray
    dR: np.ndarray
    dS: np.ndarray
    valid: np.ndarray
    units: UnitSystem


@dataclass(eq=False)
class WeakMomentumField:
    """Samples of Re p_w = grad S and Im p_w = -hbar grad R / R."""

    grid: Grid
    re: np.ndarray
    im: np.ndarray
    valid: np.ndarray
    units: UnitSystem

    def dump_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("x,re_p_w,im_p_w,valid\n")
            for i in range(self.grid.n_points):
                fh.write("%.17g,%.17g,%.17g,%d\n" % (
                    self.grid.x[i], self.re[i], self.im[i], int(self.valid[i])))


@dataclass(eq=False)
class Trajectory:
    """Time-ordered positions with guiding velocities and weak-value samples."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    weak_actual: np.ndarray          # complex p_w sampled along the path
    stop_reason: str | None = None   # None = ran to completion

    def dump_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,x,v,re_p_w,im_p_w\n")
            for i in range(len(self.times)):
                fh.write("%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                    self.times[i], self.positions[i], self.velocities[i],
                    self.weak_actual[i].real, self.weak_actual[i].imag))


@dataclass(frozen=True)
class EnsembleAverage:
    """Sampled mean of the weak momentum value against the quadrature <p>."""

    mean: complex
    se_real: float
    se_imag: float
    p_quadrature: complex
    n_samples: int
    seed: int


def _unwrap_phase(raw: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Cumulative 1D unwrap over valid nodes.

    Steps between adjacent valid nodes must stay below pi; a step at or
    beyond pi (a sign flip across a density zero that was not masked) is
    ambiguous and raises. Invalid gaps are bridged without the guard.
    """
    out = raw.copy()
    offset = 0.0
    prev = None
    prev_i = None
    for i, ok in enumerate(valid):
        if not ok:
            out[i] = raw[i] + offset
            continue
        if prev is not None:
            step = raw[i] - prev
            folded = (step + math.pi) % (2.0 * math.pi) - math.pi
            if prev_i == i - 1 and abs(folded) >= math.pi * (1.0 - 1e-9):
                raise PhaseUnwrapError(
                    f"phase step ~pi between adjacent valid nodes {i-1}, {i}")
            offset += folded - step
        out[i] = raw[i] + offset
        prev = raw[i]
        prev_i = i
    return out


def polar_decompose(grid: Grid, psi: np.ndarray,
                    units: UnitSystem | None = None) -> PolarField:
    """Split psi = R e^{i S / hbar}; derivatives by second-order differences."""
    units = units or UnitSystem()
    R = np.abs(psi)
    valid = R > MASK_REL_THRESHOLD * R.max()
    S = units.hbar * _unwrap_phase(np.angle(psi), valid)
    dR = np.gradient(R, grid.h)
    dS = np.gradient(S, grid.h)
    return PolarField(grid=grid, R=R, S=S, dR=dR, dS=dS, valid=valid, units=units)


def weak_momentum(polar: PolarField) -> WeakMomentumField:
    """Complex weak momentum from a polar field; invalid nodes carry NaN."""
    re = np.where(polar.valid, polar.dS, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        im = np.where(polar.valid, -polar.units.hbar * polar.dR / polar.R, np.nan)
    return WeakMomentumField(grid=polar.grid, re=re, im=im,
                             valid=polar.valid.copy(), units=polar.units)


def operational_speeds(wm: WeakMomentumField,
                       units: UnitSystem | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(v_S, decay speed) = (Re p_w / m, |Im p_w| / m)."""
    units = units or wm.units
    return wm.re / units.mass, np.abs(wm.im) / units.mass


def probability_current(grid: Grid, psi: np.ndarray,
                        units: UnitSystem | None = None) -> np.ndarray:
    """j = (hbar/m) Im(psi* dpsi/dx) with second-order differences."""
    units = units or UnitSystem()
    dpsi = np.gradient(psi, grid.h)
    return units.hbar / units.mass * np.imag(np.conj(psi) * dpsi)


def bohm_velocity(grid: Grid, psi: np.ndarray,
                  units: UnitSystem | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Guiding velocity j / |psi|^2; returns (v, valid mask)."""
    units = units or UnitSystem()
    rho = np.abs(psi) ** 2
    valid = np.abs(psi) > MASK_REL_THRESHOLD * np.abs(psi).max()
    j = probability_current(grid, psi, units)
    v = np.full(len(psi), np.nan)
    v[valid] = j[valid] / rho[valid]
    return v, valid


def _valid_block(valid: np.ndarray, i0: int) -> tuple[int, int]:
    """Largest contiguous run of valid nodes containing index i0."""
    lo = i0
    while lo > 0 and valid[lo - 1]:
        lo -= 1
    hi = i0
    while hi < len(valid) - 1 and valid[hi + 1]:
        hi += 1
    return lo, hi


def integrate_trajectory_stationary(grid: Grid, psi: np.ndarray, x0: float,
                                    duration: float, dt: float,
                                    units: UnitSystem | None = None) -> Trajectory:
    """Integrate dx/dt = v_B(x) in a time-independent guiding field.

    Fixed-step RK4 on a cubic interpolant of the velocity field; the weak
    momentum value is sampled along the path. Leaving the valid-density
    block truncates the trajectory with a stop reason.
    """
    units = units or UnitSystem()
    v, valid = bohm_velocity(grid, psi, units)
    i0 = int(np.argmin(np.abs(grid.x - x0)))
    if not valid[i0]:
        raise ValidationError("x0", "starting point sits in a masked (near-zero density) region")
    lo, hi = _valid_block(valid, i0)
    if hi - lo < 3:
        raise ExtractionError("valid-density block too small for cubic interpolation")
    xs = grid.x[lo:hi + 1]
    v_spl = CubicSpline(xs, v[lo:hi + 1])
    # weak momentum via the log-derivative route: identical to the polar
    # form where both exist, but needs no global phase unwrap (the field
    # may have sign flips outside the trajectory's valid block)
    with np.errstate(divide="ignore", invalid="ignore"):
        pw = -1j * units.hbar * np.gradient(psi, grid.h) / psi
    re_spl = CubicSpline(xs, np.nan_to_num(pw.real[lo:hi + 1]))
    im_spl = CubicSpline(xs, np.nan_to_num(pw.imag[lo:hi + 1]))

    n_steps = max(1, int(round(duration / dt)))
    times = np.linspace(0.0, n_steps * dt, n_steps + 1)
    pos = np.empty(n_steps + 1)
    vel = np.empty(n_steps + 1)
    weak = np.empty(n_steps + 1, dtype=complex)
    pos[0] = x0
    stop = None
    x_lo, x_hi = xs[0], xs[-1]
    k = 0
    for k in range(n_steps + 1):
        xk = pos[k]
        if not (x_lo <= xk <= x_hi):
            stop = f"left valid region at t = {times[k]:.6g}"
            k -= 1
            break
        vel[k] = v_spl(xk)
        weak[k] = re_spl(xk) + 1j * im_spl(xk)
        if k == n_steps:
            break
        k1 = v_spl(xk)
        k2 = v_spl(np.clip(xk + 0.5 * dt * k1, x_lo, x_hi))
        k3 = v_spl(np.clip(xk + 0.5 * dt * k2, x_lo, x_hi))
        k4 = v_spl(np.clip(xk + dt * k3, x_lo, x_hi))
        pos[k + 1] = xk + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    n_kept = k + 1
    return Trajectory(times=times[:n_kept], positions=pos[:n_kept],
                      velocities=vel[:n_kept], weak_actual=weak[:n_kept],
                      stop_reason=stop)


def sample_positions(grid: Grid, rho: np.ndarray, n: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws from a sampled density (trapezoid CDF on the grid)."""
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * grid.h)])
    total = cdf[-1]
    if not (total > 0 and np.isfinite(total)):
        raise ValidationError("rho", "density is not normalizable on the grid")
    return np.interp(rng.random(n) * total, cdf, grid.x)


def ensemble_weak_average(grid: Grid, psi: np.ndarray, observable: str = "momentum",
                          n_samples: int = 10_000, seed: int = 0,
                          units: UnitSystem | None = None) -> EnsembleAverage:
    """Quantum-equilibrium ensemble mean of the weak momentum value.

    Positions are drawn from |psi|^2, the complex weak value is read off at
    each, and the mean is returned next to the independent quadrature
    expectation  <p> = int psi* (-i hbar d/dx) psi dx / int |psi|^2 dx.
    """
    if observable != "momentum":
        raise ValidationError("observable", f"only 'momentum' is implemented, got {observable!r}")
    units = units or UnitSystem()
    rho = np.abs(psi) ** 2
    norm = np.trapezoid(rho, grid.x)
    if not (norm > 0 and np.isfinite(norm)):
        raise ValidationError("psi", "field is not normalizable on the grid")

    wm = weak_momentum(polar_decompose(grid, psi, units))
    rng = np.random.default_rng(seed)
    xs = sample_positions(grid, rho, n_samples, rng)
    re = np.interp(xs, grid.x, np.nan_to_num(wm.re))
    im = np.interp(xs, grid.x, np.nan_to_num(wm.im))
    mean = complex(np.mean(re), np.mean(im))
    se_re = float(np.std(re, ddof=1) / math.sqrt(n_samples))
    se_im = float(np.std(im, ddof=1) / math.sqrt(n_samples))

    dpsi = np.gradient(psi, grid.h)
    p_quad = np.trapezoid(np.conj(psi) * (-1j * units.hbar) * dpsi, grid.x) / norm
    return EnsembleAverage(mean=mean, se_real=se_re, se_imag=se_im,
                           p_quadrature=complex(p_quad), n_samples=n_samples, seed=seed)
