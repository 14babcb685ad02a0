"""evanesim: coupled-waveguide step scattering and Bohmian diagnostics.

Separates two operationally distinct quantities of an evanescent wave
field: the phase-gradient (guiding) velocity, which vanishes for decaying
stationary states, and the amplitude-decay speed hbar*kappa/m extracted
from the spatial profile, which stays finite.
"""

__version__ = "0.1.0"

from .params import UnitSystem, Params, Regime, make_params, classify
from .stationary import (Grid, TwoComponentField, ModeWavevectors,
                         mode_wavevectors, solve_analytic, solve_bvp_oracle, residual)
from .geometry import (GeometryReport, extract_kappa, fit_speed_v, v_theory,
                       v_weak_coupling, identity_v_kappa, geometry_report)
from .bohmian import (polar_decompose, weak_momentum, operational_speeds,
                      probability_current, bohm_velocity,
                      integrate_trajectory_stationary, ensemble_weak_average)
from .dwell import (DwellReport, integrated_density, dwell_bohmian, dwell_qm,
                    tau_lambda, compare_dwell)
from .tdse import (TDState, PacketSpec, make_gaussian_packet, step, propagate,
                   bohm_trajectories_td, transient_insensitivity_check)

__all__ = [
    "__version__",
    "UnitSystem", "Params", "Regime", "make_params", "classify",
    "Grid", "TwoComponentField", "ModeWavevectors", "mode_wavevectors",
    "solve_analytic", "solve_bvp_oracle", "residual",
    "GeometryReport", "extract_kappa", "fit_speed_v", "v_theory",
    "v_weak_coupling", "identity_v_kappa", "geometry_report",
    "polar_decompose", "weak_momentum", "operational_speeds",
    "probability_current", "bohm_velocity", "integrate_trajectory_stationary",
    "ensemble_weak_average",
    "DwellReport", "integrated_density", "dwell_bohmian", "dwell_qm",
    "tau_lambda", "compare_dwell",
    "TDState", "PacketSpec", "make_gaussian_packet", "step", "propagate",
    "bohm_trajectories_td", "transient_insensitivity_check",
]
