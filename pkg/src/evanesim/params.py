"""Physical configuration of the step-coupled two-waveguide system.

Waveguide m runs along the whole line; waveguide a exists for x >= 0 only.
For x >= 0 both guides sit at potential V0 and exchange amplitude at rate J0.
The detuning  delta = E - V0 + hbar*J0  controls whether the region x > 0
supports propagating or exponentially decaying solutions.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

from .errors import ValidationError

__all__ = ["UnitSystem", "Params", "Regime", "make_params", "classify"]


@dataclass(frozen=True)
class UnitSystem:
    """Action and mass scales. Natural units hbar = mass = 1 by default."""

    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise ValidationError("hbar", "must be finite and > 0")
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValidationError("mass", "must be finite and > 0")


@dataclass(frozen=True)
class Params:
    """Immutable run configuration with derived quantities.

    delta and k_in are always recomputed from (E, V0, J0, units); construct
    through make_params so validation cannot be skipped.
    """

    units: UnitSystem
    J0: float
    V0: float
    E: float
    delta: float = field(init=False)
    k_in: float = field(init=False)

    def __post_init__(self):
        hbar = self.units.hbar
        object.__setattr__(self, "delta", self.E - self.V0 + hbar * self.J0)
        object.__setattr__(self, "k_in", math.sqrt(2.0 * self.units.mass * self.E) / hbar)

    @property
    def hbar(self) -> float:
        return self.units.hbar

    @property
    def mass(self) -> float:
        return self.units.mass

    def to_dict(self) -> dict:
        return {"hbar": self.hbar, "mass": self.mass, "J0": self.J0,
                "V0": self.V0, "E": self.E}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Params":
        return make_params(units=UnitSystem(hbar=d.get("hbar", 1.0), mass=d.get("mass", 1.0)),
                           J0=d["J0"], V0=d["V0"], E=d["E"])

    @classmethod
    def from_json(cls, text: str) -> "Params":
        return cls.from_dict(json.loads(text))


class Regime(enum.Enum):
    """Character of the x > 0 region, classified by delta / (hbar*J0).

    Both normal modes decay (EVANESCENT), both propagate (PROPAGATING), or
    one of each (GAP). The boundaries |delta| = hbar*J0 belong to GAP.
    """

    EVANESCENT = "evanescent"
    GAP = "gap"
    PROPAGATING = "propagating"


def make_params(units: UnitSystem | None = None, *, J0: float, V0: float, E: float) -> Params:
    """Validate and build a Params. Rejects J0 <= 0 and E <= 0 by name."""
    units = units if units is not None else UnitSystem()
    for name, value in (("J0", J0), ("V0", V0), ("E", E)):
        if not math.isfinite(value):
            raise ValidationError(name, "must be finite")
    if J0 <= 0:
        raise ValidationError("J0", f"coupling rate must be > 0, got {J0}")
    if E <= 0:
        raise ValidationError("E", f"total energy must be > 0 so the x < 0 region propagates, got {E}")
    return Params(units=units, J0=J0, V0=V0, E=E)


def classify(params: Params) -> Regime:
    """Three-way regime split; depends only on the ratio delta/(hbar*J0)."""
    hj = params.hbar * params.J0
    if params.delta < -hj:
        return Regime.EVANESCENT
    if params.delta > hj:
        return Regime.PROPAGATING
    return Regime.GAP
