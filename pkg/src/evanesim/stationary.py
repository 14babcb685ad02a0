"""Stationary scattering states of the coupled two-waveguide step.

Two independent routes to the same solution:

* solve_analytic  -- normal-mode superposition matched at x = 0 in closed form,
* solve_bvp_oracle -- second-order finite differences with radiation/decay
  boundary rows, solved as one sparse banded system.

Waveguide a starts at x = 0 with a hard wall (psi_a(0) = 0); the incident
wave in guide m has unit amplitude, so every intensity is relative to it.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DomainError, SolverError, ValidationError
from .params import Params, Regime, classify

__all__ = [
    "Grid", "TwoComponentField", "ModeWavevectors",
    "mode_wavevectors", "solve_analytic", "solve_bvp_oracle", "residual",
    "incident_flux", "reflected_flux", "transmitted_flux",
]

# Growing-mode amplitude guard: |q_s - q_a| below this (relative) means the
# matching system is numerically singular.
_DEGENERATE_REL = 1e-8
_CONDITION_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform 1D grid straddling x = 0 with a node exactly at 0."""

    x: np.ndarray
    h: float
    i_zero: int

    def __post_init__(self):
        if self.n_points < 3:
            raise ValidationError("n_points", "grid needs at least 3 nodes")
        if self.x[self.i_zero] != 0.0:
            raise ValidationError("x", "grid must contain a node exactly at x = 0")
        if not (self.x[0] < 0.0 < self.x[-1]):
            raise ValidationError("x", "grid must straddle x = 0")

    @classmethod
    def make(cls, x_min: float, x_max: float, h: float) -> "Grid":
        """Build a grid of spacing h covering [x_min, x_max], snapped outward
        so that x = 0 falls on a node."""
        if h <= 0:
            raise ValidationError("h", "spacing must be > 0")
        if not (x_min < 0.0 < x_max):
            raise ValidationError("x_min/x_max", "domain must straddle x = 0")
        n_neg = int(math.ceil(-x_min / h - 1e-12))
        n_pos = int(math.ceil(x_max / h - 1e-12))
        x = h * np.arange(-n_neg, n_pos + 1, dtype=float)
        x[n_neg] = 0.0
        return cls(x=x, h=h, i_zero=n_neg)

    @classmethod
    def from_points(cls, x_min: float, x_max: float, n_points: int) -> "Grid":
        h = (x_max - x_min) / (n_points - 1)
        return cls.make(x_min, x_max, h)

    @property
    def n_points(self) -> int:
        return len(self.x)

    @property
    def x_min(self) -> float:
        return float(self.x[0])

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    def refined(self) -> "Grid":
        """Same domain, half the spacing. Coarse nodes sit at even indices."""
        x = self.x_min + 0.5 * self.h * np.arange(2 * (self.n_points - 1) + 1)
        x[2 * self.i_zero] = 0.0
        return Grid(x=x, h=0.5 * self.h, i_zero=2 * self.i_zero)


@dataclass(frozen=True, eq=False)
class ModeWavevectors:
    """Wavevectors of the symmetric/antisymmetric normal modes for x > 0.

    (hbar q_s)^2/2m = delta - hbar J0 and (hbar q_a)^2/2m = delta + hbar J0,
    with the branch Im q >= 0 (decaying) or q real >= 0 (outgoing).
    """

    q_s: complex
    q_a: complex

    @property
    def kappa_s(self) -> float:
        return self.q_s.imag

    @property
    def kappa_a(self) -> float:
        return self.q_a.imag

    @property
    def kappa_mean(self) -> float:
        """Mean decay rate (kappa_s + kappa_a)/2; the near-field log-slope."""
        return 0.5 * (self.q_s.imag + self.q_a.imag)

    @property
    def beat_length(self) -> float:
        split = abs(self.q_s - self.q_a)
        return 1.0 / split if split > 0 else math.inf

    @property
    def slowest_decay(self) -> float | None:
        """Smallest positive decay rate, or None if nothing decays."""
        rates = [q.imag for q in (self.q_s, self.q_a) if q.imag > 1e-300]
        return min(rates) if rates else None


@dataclass(eq=False)
class TwoComponentField:
    """Sampled stationary solution (psi_m, psi_a) plus matching metadata.

    psi_a is identically zero for x < 0 and vanishes at x = 0.
    r is the reflection amplitude of the unit incident wave (None when the
    field was not produced by a solver).
    """

    grid: Grid
    psi_m: np.ndarray
    psi_a: np.ndarray
    params: Params
    r: complex | None = None

    def __post_init__(self):
        neg = self.grid.x < 0
        if np.any(self.psi_a[neg] != 0) or self.psi_a[self.grid.i_zero] != 0:
            raise ValidationError("psi_a", "must vanish for x < 0 and at x = 0")
        if np.max(np.abs(self.psi_m)) == 0:
            raise ValidationError("psi_m", "trivial solution")

    def dump_csv(self, path) -> None:
        """Write x, Re/Im of both components; header carries params and r."""
        header = [f"# params = {self.params.to_json()}"]
        if self.r is not None:
            header.append(f"# r = {self.r.real!r}{'+' if self.r.imag >= 0 else '-'}{abs(self.r.imag)!r}j")
        header.append("x,re_psi_m,im_psi_m,re_psi_a,im_psi_a")
        with open(path, "w") as fh:
            fh.write("\n".join(header) + "\n")
            for i in range(self.grid.n_points):
                fh.write("%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                    self.grid.x[i], self.psi_m[i].real, self.psi_m[i].imag,
                    self.psi_a[i].real, self.psi_a[i].imag))


def mode_wavevectors(params: Params) -> ModeWavevectors:
    """Dispersion of the two normal modes in the coupled region."""
    hbar, m = params.hbar, params.mass
    w_s = params.delta - hbar * params.J0
    w_a = params.delta + hbar * params.J0
    q_s = cmath.sqrt(2.0 * m * complex(w_s)) / hbar
    q_a = cmath.sqrt(2.0 * m * complex(w_a)) / hbar
    return ModeWavevectors(q_s=q_s, q_a=q_a)


def _matching(params: Params):
    """Closed-form matching at x = 0: reflection r and common mode amplitude a.

    psi_m(x>0) = a (e^{i q_s x} + e^{i q_a x}),
    psi_a(x>0) = a (e^{i q_s x} - e^{i q_a x}),
    fixed by psi_m, psi_m' continuity and psi_a(0) = 0.
    """
    modes = mode_wavevectors(params)
    q_s, q_a = modes.q_s, modes.q_a
    scale = max(abs(q_s), abs(q_a))
    if abs(q_s - q_a) <= _DEGENERATE_REL * scale:
        raise SolverError(f"degenerate modes q_s ~ q_a ~ {q_s}: matching is singular")
    k = params.k_in
    q_mean = 0.5 * (q_s + q_a)
    r = (k - q_mean) / (k + q_mean)
    a = 0.5 * (1.0 + r)
    return modes, r, a


def solve_analytic(params: Params, grid: Grid) -> TwoComponentField:
    """Stationary field from the normal-mode superposition.

    For x < 0: psi_m = e^{i k x} + r e^{-i k x}; growing modes never appear
    because the branch choice in mode_wavevectors discards them.
    """
    modes, r, a = _matching(params)
    x = grid.x
    k = params.k_in
    neg = x < 0
    pos = ~neg
    psi_m = np.empty(grid.n_points, dtype=complex)
    psi_a = np.zeros(grid.n_points, dtype=complex)
    psi_m[neg] = np.exp(1j * k * x[neg]) + r * np.exp(-1j * k * x[neg])
    e_s = np.exp(1j * modes.q_s * x[pos])
    e_a = np.exp(1j * modes.q_a * x[pos])
    psi_m[pos] = a * (e_s + e_a)
    psi_a[pos] = a * (e_s - e_a)
    psi_a[grid.i_zero] = 0.0
    return TwoComponentField(grid=grid, psi_m=psi_m, psi_a=psi_a, params=params, r=r)


def _discrete_incident_k(params: Params, h: float) -> float:
    """Wavevector of the discrete plane wave with energy E on spacing h."""
    c = 1.0 - params.mass * params.E * h * h / params.hbar**2
    if c <= -1.0:
        raise DomainError(f"grid spacing h={h} too coarse for E={params.E}")
    return math.acos(c) / h


def _discrete_mode_factor(w: float, params: Params, h: float) -> complex:
    """One-step transfer factor e^{i q~ h} of the discrete mode at energy w."""
    c = 1.0 - params.mass * w * h * h / params.hbar**2
    if c >= 1.0:
        return math.exp(-math.acosh(c))       # decaying
    if c <= -1.0:
        raise DomainError(f"grid spacing h={h} too coarse for mode energy {w}")
    return cmath.exp(1j * math.acos(c))       # outgoing


def _check_resolution(params: Params, grid: Grid) -> ModeWavevectors:
    modes = mode_wavevectors(params)
    rate = max(abs(modes.q_s), abs(modes.q_a), params.k_in)
    if grid.h * rate > 0.05 + 1e-12:
        raise DomainError(
            f"h*max(rate) = {grid.h * rate:.3g} exceeds 0.05; refine the grid")
    kappa = modes.slowest_decay
    if classify(params) is Regime.EVANESCENT and kappa is not None:
        if math.exp(-kappa * grid.x_max) > 1e-8:
            raise DomainError(
                f"domain too short: exp(-kappa_a*x_max) = {math.exp(-kappa * grid.x_max):.3g} > 1e-8")
    return modes


def solve_bvp_oracle(params: Params, grid: Grid, check_condition: bool = True) -> TwoComponentField:
    """Independent finite-difference solve of the stationary system.

    Central differences at interior nodes; the node at x = 0 carries half
    weights of V0 and J0 (average of the one-sided equations, keeps the
    scheme second order across the step). Unit-amplitude incident+reflected
    radiation row at x_min, psi_a = 0 for x <= 0, and discrete decaying or
    outgoing mode rows at x_max. One banded sparse LU solve, no shooting.
    """
    modes = _check_resolution(params, grid)
    x, h, n = grid.x, grid.h, grid.n_points
    hbar, m = params.hbar, params.mass
    t = hbar * hbar / (2.0 * m * h * h)
    kt = _discrete_incident_k(params, h)
    e_s = _discrete_mode_factor(params.delta - hbar * params.J0, params, h)
    e_a = _discrete_mode_factor(params.delta + hbar * params.J0, params, h)

    rows, cols, vals = [], [], []
    b = np.zeros(2 * n, dtype=complex)

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    # radiation row: psi_m(x1) - e^{-i kt h} psi_m(x0) = 2i sin(kt h) e^{i kt x0}
    add(0, 0, -cmath.exp(-1j * kt * h))
    add(0, 2, 1.0)
    b[0] = cmath.exp(1j * kt * x[0]) * 2j * math.sin(kt * h)

    for j in range(n):
        if x[j] <= 0:
            add(2 * j + 1, 2 * j + 1, 1.0)    # psi_a constrained to 0

    # interior rows are scaled by 1/(2t) so every row is O(1); without the
    # equilibration the condition estimate just measures t ~ 1/h^2
    s = 1.0 / (2.0 * t)
    for j in range(1, n - 1):
        w = 1.0 if x[j] > 0 else (0.5 if j == grid.i_zero else 0.0)
        add(2 * j, 2 * (j - 1), -t * s)
        add(2 * j, 2 * j, (2.0 * t + (params.V0 - hbar * params.J0) * w - params.E) * s)
        if w > 0:
            add(2 * j, 2 * j + 1, hbar * params.J0 * w * s)
        add(2 * j, 2 * (j + 1), -t * s)
        if x[j] > 0:
            add(2 * j + 1, 2 * (j - 1) + 1, -t * s)
            add(2 * j + 1, 2 * j + 1, (2.0 * t + params.V0 - hbar * params.J0 - params.E) * s)
            add(2 * j + 1, 2 * j, hbar * params.J0 * s)
            add(2 * j + 1, 2 * (j + 1) + 1, -t * s)

    # far boundary: sum/difference of the per-mode one-step relations
    J = n - 1
    add(2 * J, 2 * J, 2.0)
    add(2 * J, 2 * (J - 1), -(e_s + e_a))
    add(2 * J, 2 * (J - 1) + 1, -(e_s - e_a))
    add(2 * J + 1, 2 * J + 1, 2.0)
    add(2 * J + 1, 2 * (J - 1), -(e_s - e_a))
    add(2 * J + 1, 2 * (J - 1) + 1, -(e_s + e_a))

    A = sp.csc_matrix((vals, (rows, cols)), shape=(2 * n, 2 * n))
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SolverError(f"sparse LU failed: {exc}") from exc

    if check_condition:
        norm_a = spla.onenormest(A)
        inv_op = spla.LinearOperator(A.shape, matvec=lu.solve,
                                     rmatvec=lambda v: lu.solve(v, trans="H"),
                                     dtype=complex)
        cond = norm_a * spla.onenormest(inv_op)
        if cond > _CONDITION_LIMIT:
            raise SolverError(f"system ill-conditioned: estimate {cond:.3g} > {_CONDITION_LIMIT:.0e}")

    z = lu.solve(b)
    psi_m = z[0::2].copy()
    psi_a = z[1::2].copy()
    psi_a[x <= 0] = 0.0

    kappa = modes.slowest_decay
    if classify(params) is Regime.EVANESCENT and kappa is not None:
        tail = abs(psi_m[-1]) / max(abs(psi_m[grid.i_zero]), 1e-300)
        if tail > 1e-6:
            raise DomainError(f"tail not converged: |psi_m(x_max)| = {tail:.3g} of |psi_m(0)|")

    r = (psi_m[0] - cmath.exp(1j * kt * x[0])) / cmath.exp(-1j * kt * x[0])
    return TwoComponentField(grid=grid, psi_m=psi_m, psi_a=psi_a, params=params, r=complex(r))


def residual(field: TwoComponentField) -> tuple[float, float]:
    """Max stationary-equation defect per component, normalized by max |psi|.

    Central differences at interior nodes. The interface node x = 0 is
    skipped (psi'' jumps there), as are the two domain ends.
    """
    p = field.params
    x, h = field.grid.x, field.grid.h
    hbar, m = p.hbar, p.mass
    pm, pa = field.psi_m, field.psi_a
    kin = hbar * hbar / (2.0 * m * h * h)
    scale = max(np.abs(pm).max(), np.abs(pa).max())

    d2m = pm[:-2] - 2.0 * pm[1:-1] + pm[2:]
    d2a = pa[:-2] - 2.0 * pa[1:-1] + pa[2:]
    xi = x[1:-1]
    pos = xi > 0
    neg = xi < 0

    def_m = np.zeros(len(xi))
    def_m[neg] = np.abs(p.E * pm[1:-1][neg] + kin * d2m[neg])
    def_m[pos] = np.abs(p.E * pm[1:-1][pos] + kin * d2m[pos]
                        - p.V0 * pm[1:-1][pos]
                        - hbar * p.J0 * (pa[1:-1][pos] - pm[1:-1][pos]))
    def_a = np.zeros(len(xi))
    def_a[pos] = np.abs(p.E * pa[1:-1][pos] + kin * d2a[pos]
                        - p.V0 * pa[1:-1][pos]
                        - hbar * p.J0 * (pm[1:-1][pos] - pa[1:-1][pos]))
    return float(def_m.max() / scale), float(def_a.max() / scale)


def incident_flux(params: Params) -> float:
    """Flux of the unit incident wave, hbar k_in / m."""
    return params.hbar * params.k_in / params.mass


def reflected_flux(field: TwoComponentField) -> float:
    if field.r is None:
        raise ValidationError("r", "field carries no reflection amplitude")
    return abs(field.r) ** 2 * incident_flux(field.params)


def transmitted_flux(field: TwoComponentField) -> float:
    """Flux carried to x -> +inf by the open (real-q) normal modes."""
    modes, r, a = _matching(field.params)
    hbar, m = field.params.hbar, field.params.mass
    flux = 0.0
    for q in (modes.q_s, modes.q_a):
        if abs(q.imag) < 1e-300 and q.real > 0:
            flux += 2.0 * abs(a) ** 2 * (hbar * q.real / m)
    return flux
