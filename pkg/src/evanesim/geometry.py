"""Extraction of wave-field geometry from solved fields.

Mirrors the experimental protocol: the decay constant kappa comes from the
log-amplitude slope of the carrier guide, and the speed v from the initial
quadratic growth of the population transferred into guide a,
rho_a(x) ~ (J0 x / v)^2. The transfer is measured relative to the local
carrier population rho_m(x), which cancels the common decay envelope and
makes the fitted v reproduce the closed-form dispersion value; see
fit_speed_v for the window rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ExtractionError, ValidationError
from .params import Params, Regime, UnitSystem, classify
from .stationary import TwoComponentField, mode_wavevectors

__all__ = [
    "GeometryReport", "extract_kappa", "fit_speed_v",
    "v_theory", "v_weak_coupling", "identity_v_kappa", "geometry_report",
]

# Relative-amplitude window for the kappa fit: nodes where |psi_m| has decayed
# to between KAPPA_WIN_LO and KAPPA_WIN_HI of |psi_m(0)|. Deep windows drift
# toward the slowest mode and break the v = hbar*kappa/m identity check.
KAPPA_WIN_LO = 0.02
KAPPA_WIN_HI = 0.2
# Speed-fit window: within a tenth of the mode beat length, above the
# amplitude floor where solver noise would pollute the population ratio.
SPEED_BEAT_FRACTION = 0.1
SPEED_AMP_FLOOR = 0.03
_MIN_SAMPLES = 10


@dataclass(frozen=True)
class GeometryReport:
    """One parameter point's extracted geometry and theory values."""

    kappa: float
    v_fit: float
    v_theory: float | None
    v_weak: float
    decay_length: float
    fit_window: tuple[float, float]
    kappa_window: tuple[float, float]
    fit_rms: float


def _window_slope(xw: np.ndarray, yw: np.ndarray) -> tuple[float, float]:
    """Least-squares line y = s x + c; returns (s, c)."""
    A = np.vstack([xw, np.ones_like(xw)]).T
    (s, c), *_ = np.linalg.lstsq(A, yw, rcond=None)
    return float(s), float(c)


def extract_kappa(field: TwoComponentField,
                  window: tuple[float, float] = (KAPPA_WIN_LO, KAPPA_WIN_HI)) -> float:
    """Decay constant of the carrier guide from the tail of ln |psi_m|.

    Fits a line to ln |psi_m(x)| over the x > 0 nodes where the amplitude
    lies inside `window` relative to |psi_m(0)| and returns the sign-flipped
    slope. In the weak-coupling limit this matches sqrt(2 m |delta|)/hbar.
    """
    lo, hi = window
    if not (0 < lo < hi <= 1):
        raise ValidationError("window", "need 0 < lo < hi <= 1")
    x = field.grid.x
    amp = np.abs(field.psi_m)
    a0 = amp[field.grid.i_zero]
    if a0 <= 0:
        raise ExtractionError("carrier amplitude vanishes at x = 0")
    rel = amp / a0
    sel = (x > 0) & (rel >= lo) & (rel <= hi)
    if np.count_nonzero(sel) < _MIN_SAMPLES:
        raise ExtractionError(
            f"kappa window holds {np.count_nonzero(sel)} samples, need >= {_MIN_SAMPLES}")
    aw = amp[sel]
    if np.any(np.diff(aw) >= 0):
        raise ExtractionError("tail is not monotonically decaying (oscillatory contamination)")
    slope, _ = _window_slope(x[sel], np.log(aw))
    return -slope


def fit_speed_v(field: TwoComponentField,
                beat_fraction: float = SPEED_BEAT_FRACTION,
                amp_floor: float = SPEED_AMP_FLOOR) -> tuple[float, float, tuple[float, float]]:
    """Speed v from the initial growth of the transferred population.

    Fits sqrt(rho_a(x)/rho_m(x)) = (J0/v) x through the origin over
    0 < x <= x_hi, with x_hi the smallest of a tenth of the mode beat
    length, the point where |psi_m| falls below `amp_floor` of |psi_m(0)|,
    and 0.9 x_max. Returns (v, rms, window).
    """
    p = field.params
    modes = mode_wavevectors(p)
    x = field.grid.x
    amp_m = np.abs(field.psi_m)
    a0 = amp_m[field.grid.i_zero]
    if a0 < 1e-12:
        raise ExtractionError("carrier amplitude at x = 0 below 1e-12; cannot normalize")
    x_hi = beat_fraction * modes.beat_length
    kbar = modes.kappa_mean
    if kbar > 0:
        x_hi = min(x_hi, math.log(1.0 / amp_floor) / kbar)
    x_hi = min(x_hi, 0.9 * field.grid.x_max)
    sel = (x > 0) & (x <= x_hi) & (amp_m > 0)
    y = np.zeros(field.grid.n_points)
    y[sel] = np.abs(field.psi_a[sel]) / amp_m[sel]
    usable = sel & (y > 1e-12)
    if np.count_nonzero(usable) < 5:
        raise ExtractionError(
            f"empty speed-fit window (x_hi = {x_hi:.3g}, {np.count_nonzero(usable)} usable samples)")
    xf, yf = x[usable], y[usable]
    slope = float(np.dot(xf, yf) / np.dot(xf, xf))
    if slope <= 0:
        raise ExtractionError("non-positive transfer slope")
    rms = float(np.sqrt(np.mean((yf - slope * xf) ** 2)))
    return p.J0 / slope, rms, (float(xf[0]), float(xf[-1]))


def v_theory(params: Params, branch: str = "+") -> float:
    """Closed-form speed sqrt(|delta +/- sqrt(delta^2 - (hbar J0)^2)| / m).

    The default "+" branch is the one continuous with the weak-coupling law
    as |delta|/(hbar J0) grows. Raises outside delta^2 >= (hbar J0)^2.
    """
    if branch not in ("+", "-"):
        raise ValidationError("branch", "must be '+' or '-'")
    hj = params.hbar * params.J0
    disc = params.delta ** 2 - hj ** 2
    if disc < 0:
        raise ValidationError(
            "delta", f"gap regime |delta| < hbar*J0 (disc = {disc:.3g}): speed branch is complex")
    root = math.sqrt(disc)
    # "+" grows |delta| by the discriminant root: the branch continuous with
    # the weak-coupling law as |delta|/(hbar J0) -> infinity
    inner = abs(params.delta) + root if branch == "+" else abs(params.delta) - root
    return math.sqrt(abs(inner) / params.mass)


def v_weak_coupling(params: Params) -> float:
    """Weak-coupling law sqrt(2 |delta| / m)."""
    return math.sqrt(2.0 * abs(params.delta) / params.mass)


def identity_v_kappa(v_fit: float, kappa: float, units: UnitSystem) -> float:
    """Relative discrepancy |v_fit - hbar*kappa/m| / v_fit."""
    return abs(v_fit - units.hbar * kappa / units.mass) / v_fit


def geometry_report(field: TwoComponentField) -> GeometryReport:
    """Run the full extraction on an evanescent-regime field."""
    p = field.params
    kappa = extract_kappa(field)
    v_fit, rms, window = fit_speed_v(field)
    regime = classify(p)
    vth = v_theory(p) if regime is not Regime.GAP else None
    x = field.grid.x
    rel = np.abs(field.psi_m) / np.abs(field.psi_m[field.grid.i_zero])
    sel = (x > 0) & (rel >= KAPPA_WIN_LO) & (rel <= KAPPA_WIN_HI)
    kw = (float(x[sel][0]), float(x[sel][-1]))
    return GeometryReport(kappa=kappa, v_fit=v_fit, v_theory=vth,
                          v_weak=v_weak_coupling(p), decay_length=1.0 / kappa,
                          fit_window=window, kappa_window=kw, fit_rms=rms)
