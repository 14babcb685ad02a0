"""Acceptance suite: every release-gating check at its stated tolerance.

One test per criterion; each prints a single PASS/FAIL line (visible with
pytest -s). The heavy scattering run is shared through session fixtures.
"""

import math

import numpy as np
import pytest

from evanesim import (make_params, solve_analytic, solve_bvp_oracle,
                      ensemble_weak_average)
from evanesim.bohmian import Axis
from evanesim.dwell import compare_dwell, dwell_qm, tau_lambda
from evanesim.stationary import Grid
from evanesim.cli import (SEPARATION_DELTAS, _separation_spec, default_grid,
                          run_sweep, scenario, transient_setup)
from evanesim.tdse import (PacketSpec, ks_distance, norm_beyond, propagate,
                           quasi_steady_profile_error,
                           transient_insensitivity_check)

from conftest import SEED, dispersed_gaussian


def report(num, name, ok):
    print(f"ACCEPTANCE {num:2d} {name}: {'PASS' if ok else 'FAIL'}")
    assert ok, f"criterion {num} ({name}) failed"


@pytest.fixture(scope="module")
def separation_rows():
    return run_sweep(_separation_spec(seed=SEED))


def test_criterion_01_closed_form_agreement(separation_rows):
    """Fitted v matches sqrt(2|delta|/m) within 1% and the dispersion
    closed form within 0.5% across the weak-coupling sweep."""
    ok = True
    for row in separation_rows:
        ok &= row.error == ""
        ok &= abs(row.v_fit / row.v_weak - 1.0) <= 0.01
        ok &= abs(row.v_fit / row.v_theory_plus - 1.0) <= 0.005
    report(1, "closed-form speed agreement", ok)


def test_criterion_02_identity_v_kappa(separation_rows):
    """|v_fit m/(hbar kappa_fit) - 1| <= 1% from |delta|/(hbar J0) >= 10 on,
    decreasing monotonically along the sweep."""
    discrepancies = []
    for row in separation_rows:
        d = abs(row.v_fit / row.kappa - 1.0)   # hbar = m = 1
        discrepancies.append((abs(row.delta_over_hJ0), d))
    discrepancies.sort()
    ok = all(b < a for (_, a), (_, b) in zip(discrepancies, discrepancies[1:]))
    for ratio, d in discrepancies:
        if ratio >= 10.0:
            ok &= d <= 0.01
    report(2, "identity v = hbar*kappa/m", ok)


def test_criterion_03_operational_separation(separation_rows):
    """Phase-gradient speed at noise level while the decay speed equals
    hbar*kappa/m within 1% at every evanescent sweep point."""
    from evanesim.bohmian import (operational_speeds, polar_decompose,
                                  weak_momentum)
    ok = True
    for delta, row in zip(SEPARATION_DELTAS, separation_rows):
        ok &= row.v_S_max_abs <= 1e-8 * row.kappa
        p = make_params(J0=0.01, V0=1.0 - delta + 0.01, E=1.0)
        g = default_grid(p)
        f = solve_analytic(p, g)
        pos = g.x >= 0
        sub = Axis(x=g.x[pos].copy(), h=g.h)
        wm = weak_momentum(polar_decompose(sub, f.psi_m[pos], p.units))
        _, dec = operational_speeds(wm, p.units)
        rel = np.abs(f.psi_m[pos]) / np.abs(f.psi_m[g.i_zero])
        window = (rel >= 0.02) & (rel <= 0.2) & wm.valid
        ok &= abs(np.nanmedian(dec[window]) / row.kappa - 1.0) <= 0.01
    report(3, "operational separation v_S ~ 0, v > 0", ok)


def test_criterion_04_oracle_equivalence():
    """Closed form vs finite differences: max relative deviation <= 1e-6
    after one Richardson refinement, ten points spanning all regimes."""
    points = [(-5.0, 1.0), (-3.0, 1.0), (-2.0, 1.0), (-1.3, 1.0),
              (-0.9, 1.0), (-0.5, 1.0), (0.0, 1.0), (0.9, 1.0),
              (2.0, 1.0), (4.0, 1.0)]
    ok = True
    for delta, J0 in points:
        p = make_params(J0=J0, V0=1.0 - delta + J0, E=1.0)
        g = default_grid(p, fit_samples=None)
        ref = solve_analytic(p, g)
        scale = max(np.abs(ref.psi_m).max(), np.abs(ref.psi_a).max())
        coarse = solve_bvp_oracle(p, g)
        fine = solve_bvp_oracle(p, g.refined())
        pm = (4.0 * fine.psi_m[0::2] - coarse.psi_m) / 3.0
        pa = (4.0 * fine.psi_a[0::2] - coarse.psi_a) / 3.0
        dev = max(np.abs(pm - ref.psi_m).max(), np.abs(pa - ref.psi_a).max()) / scale
        ok &= dev <= 1e-6
    report(4, "analytic vs finite-difference oracle", ok)


def test_criterion_05_dwell_table():
    """Divergent Bohmian dwell time at every evanescent point, the exact
    ratio identity, and coincidence of the finite times at kappa = k_in."""
    ok = True
    for delta in SEPARATION_DELTAS:
        p = make_params(J0=0.01, V0=1.0 - delta + 0.01, E=1.0)
        rep = compare_dwell(solve_analytic(p, default_grid(p)))
        ok &= math.isinf(rep.tau_bohm)
        ok &= abs(rep.ratio / (p.k_in / rep.kappa) - 1.0) <= 1e-12
    p = make_params(J0=0.01, V0=2.01, E=1.0)   # delta = -E: kappa ~ k_in
    ok &= tau_lambda(p.k_in, p.units) == dwell_qm(p, p.k_in)
    rep = compare_dwell(solve_analytic(p, default_grid(p)))
    ok &= abs(rep.tau_lambda / rep.tau_qm - 1.0) <= 1e-3
    report(5, "dwell-time table", ok)


def test_criterion_06_weak_actual_ensemble():
    """Sampled mean of the weak momentum value matches the quadrature <p>
    within three standard errors, for three seeds at n = 1e4."""
    g = Grid.make(-25.0, 25.0, 0.02)
    psi = dispersed_gaussian(g.x, -3.0, 1.0, 2.0, 2.0)
    ok = True
    for seed in (11, 12, 13):
        out = ensemble_weak_average(g, psi, n_samples=10_000, seed=seed)
        ok &= abs(out.mean.real - out.p_quadrature.real) <= 3.0 * out.se_real
        ok &= abs(out.mean.imag - out.p_quadrature.imag) <= 3.0 * out.se_imag
    report(6, "weak-actual ensemble theorem", ok)


def test_criterion_07_time_dependent_suite(deep_run):
    """Norm conservation, second-order continuity under refinement, and the
    quasi-steady late-time profile within 2% over one decay length."""
    params, spec, grid, kappa, cfg, snaps = deep_run
    ok = abs(snaps.norms[-1] - snaps.norms[0]) / snaps.norms[0] <= 1e-7
    ok &= snaps.max_step_drift <= 1e-10

    p = make_params(J0=0.01, V0=3.01, E=1.0)
    spec_small = PacketSpec(x0=-10.0, sigma_x=1.2, k0=p.k_in)

    def residual(h, dt):
        g = Grid.make(-25.0, 5.0, h)
        s = propagate(p, spec_small, T=1.6, dt=dt, snapshot_stride=1, grid=g)
        return np.nanmax(s.continuity)

    ratio = residual(0.04, 0.04) / residual(0.02, 0.02)
    ok &= 3.0 < ratio < 5.5
    ok &= quasi_steady_profile_error(snaps, depth=1.0 / kappa) <= 0.02
    report(7, "time-dependent suite", ok)


def test_criterion_08_transient_bohmian_picture(deep_run, deep_bundle):
    """Trajectories enter the forbidden region transiently and return,
    nothing is transmitted, no crossings, and the ensemble stays
    |psi|^2-distributed (KS <= 0.02 at n = 1e4)."""
    params, spec, grid, kappa, cfg, snaps = deep_run
    b = deep_bundle
    ok = b.n_particles == 10_000
    ok &= b.penetration_fraction > 0
    ok &= norm_beyond(snaps, 5.0 / kappa) <= 1e-4
    ok &= b.order_violations == 0
    ok &= bool((b.final_positions < 0).all())
    rho_T = np.abs(snaps.psi_m[-1]) ** 2 + np.abs(snaps.psi_a[-1]) ** 2
    ok &= ks_distance(b.final_positions, grid, rho_T) <= 0.02
    report(8, "transient Bohmian picture", ok)


def test_criterion_09_transient_insensitivity():
    """Fitted v from late-time profiles at bandwidth knobs 0.2 and 0.1 both
    within 2% of the stationary fit, the narrower spectrum strictly closer."""
    params, spec1, grid, kappa, cfg = transient_setup(0.2)
    _, spec2, _, _, _ = transient_setup(0.1)
    rep = transient_insensitivity_check(params, [spec1, spec2], grid, dt=cfg["dt"])
    ok = max(rep.rel_devs) <= 0.02
    ok &= rep.rel_devs[1] < rep.rel_devs[0]
    ok &= rep.improves_with_narrow_spectrum
    report(9, "transient insensitivity of the fitted speed", ok)


def test_criterion_10_determinism(tmp_path):
    """Scenario runs with a fixed seed emit byte-identical CSV."""
    outs = []
    for name in ("run1", "run2"):
        d = tmp_path / name
        assert scenario("separation-table", str(d), seed=123) == 0
        assert scenario("dwell-table", str(d), seed=123) == 0
        outs.append(d)
    ok = ((outs[0] / "separation_table.csv").read_bytes()
          == (outs[1] / "separation_table.csv").read_bytes())
    ok &= ((outs[0] / "dwell_table.csv").read_bytes()
           == (outs[1] / "dwell_table.csv").read_bytes())
    report(10, "seeded scenario determinism", ok)
