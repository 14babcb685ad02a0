import numpy as np
import pytest

from evanesim import make_params, solve_analytic
from evanesim.cli import default_grid, transient_setup
from evanesim.tdse import bohm_trajectories_td, propagate

SEED = 20250811


@pytest.fixture(scope="session")
def weak_params():
    """Weak coupling, deep evanescent: J0 = 0.01, delta = -2, kappa ~ 2."""
    return make_params(J0=0.01, V0=3.01, E=1.0)


@pytest.fixture(scope="session")
def weak_field(weak_params):
    grid = default_grid(weak_params)
    return solve_analytic(weak_params, grid)


@pytest.fixture(scope="session")
def strong_params():
    """Strong coupling: J0 = 1, delta = -2."""
    return make_params(J0=1.0, V0=4.0, E=1.0)


@pytest.fixture(scope="session")
def strong_field(strong_params):
    grid = default_grid(strong_params)
    return solve_analytic(strong_params, grid)


@pytest.fixture(scope="session")
def deep_run():
    """Full deep-evanescent scattering run shared by the heavy acceptance
    tests: bandwidth knob 0.1 (sigma_x = 10), delta = -2."""
    params, spec, grid, kappa, cfg = transient_setup(0.1)
    snaps = propagate(params, spec, T=cfg["T"], dt=cfg["dt"],
                      snapshot_stride=cfg["stride"], grid=grid)
    return params, spec, grid, kappa, cfg, snaps


@pytest.fixture(scope="session")
def deep_bundle(deep_run):
    _, _, _, _, cfg, snaps = deep_run
    return bohm_trajectories_td(snaps, cfg["n_particles"], SEED, n_sub=3)


def dispersed_gaussian(x, x0, sigma, k0, t, hbar=1.0, mass=1.0):
    """Analytic free Gaussian at time t (oracle for packet tests)."""
    tau = hbar * t / (2.0 * mass * sigma * sigma)
    w = 1.0 + 1j * tau
    xc = x0 + hbar * k0 * t / mass
    pref = (2.0 * np.pi * sigma * sigma) ** -0.25 / np.sqrt(w)
    phase = k0 * (x - x0) - hbar * k0 ** 2 * t / (2.0 * mass)
    return pref * np.exp(-((x - xc) ** 2) / (4.0 * sigma * sigma * w) + 1j * phase)
