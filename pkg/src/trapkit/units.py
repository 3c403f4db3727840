"""Physical constants, ion species, and the shared trap context.

All frequencies are stored as angular frequencies (rad/s) internally; the
CLI layer converts from Hz on the way in. Masses are exact isotope masses
in kg so that cross-species normalization ratios are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# CODATA 2018
ATOMIC_MASS_KG = 1.66053906660e-27
ELEMENTARY_CHARGE = 1.602176634e-19
HBAR = 1.054571817e-34

TWO_PI = 2.0 * math.pi


class UnitError(ValueError):
    """Arithmetic attempted across mismatched physical dimensions."""


class UnknownSpeciesError(ValueError):
    """Species name not present in the species table."""


DIMENSIONS = frozenset(
    {"frequency", "time", "length", "field", "dB", "quanta_per_time", "dimensionless"}
)


@dataclass(frozen=True)
class Quantity:
    """A scalar tagged with one of the dimensions this toolkit uses.

    Addition and subtraction require matching dimensions; multiplication
    and division by bare numbers rescale the value. This is deliberately
    not a general units library.
    """

    value: float
    unit: str

    def __post_init__(self):
        if self.unit not in DIMENSIONS:
            raise UnitError(f"unknown dimension tag {self.unit!r}")

    def _check(self, other: "Quantity") -> None:
        if not isinstance(other, Quantity):
            raise UnitError("can only combine Quantity with Quantity")
        if other.unit != self.unit:
            raise UnitError(f"dimension mismatch: {self.unit!r} vs {other.unit!r}")

    def __add__(self, other):
        self._check(other)
        return Quantity(self.value + other.value, self.unit)

    def __sub__(self, other):
        self._check(other)
        return Quantity(self.value - other.value, self.unit)

    def __mul__(self, scalar):
        if isinstance(scalar, Quantity):
            raise UnitError("Quantity*Quantity products are not supported")
        return Quantity(self.value * float(scalar), self.unit)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, Quantity):
            self._check(scalar)
            return self.value / scalar.value
        return Quantity(self.value / float(scalar), self.unit)

    def __neg__(self):
        return Quantity(-self.value, self.unit)


@dataclass(frozen=True)
class IonSpecies:
    name: str
    mass: float  # kg
    charge: float  # C, +1e for everything used here

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.charge <= 0:
            raise ValueError(f"charge must be positive, got {self.charge}")


# Exact isotope masses (u): Yb-171 170.936, Ca-40 39.963
SPECIES_TABLE: dict[str, IonSpecies] = {
    "Yb-171": IonSpecies("Yb-171", 170.936 * ATOMIC_MASS_KG, ELEMENTARY_CHARGE),
    "Ca-40": IonSpecies("Ca-40", 39.963 * ATOMIC_MASS_KG, ELEMENTARY_CHARGE),
}


def get_species(name: str, table: dict[str, IonSpecies] | None = None) -> IonSpecies:
    table = SPECIES_TABLE if table is None else table
    try:
        return table[name]
    except KeyError:
        raise UnknownSpeciesError(
            f"unknown species {name!r}; known: {sorted(table)}"
        ) from None


# Plausibility window for the axial secular frequency, rad/s
AXIAL_FREQ_WINDOW = (TWO_PI * 0.1e6, TWO_PI * 20e6)


@dataclass(frozen=True)
class TrapContext:
    """Ion species plus the trap operating point shared by all analyses."""

    species: IonSpecies
    axial_freq: float  # rad/s
    radial_freq: float  # rad/s
    ion_surface_distance: float  # m
    rf_drive_freq: float = 74.5e6  # Hz

    def __post_init__(self):
        for name in ("axial_freq", "radial_freq", "rf_drive_freq", "ion_surface_distance"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def axial_freq_hz(self) -> float:
        return self.axial_freq / TWO_PI


def make_trap_context(
    species_name: str,
    axial_freq: float,
    radial_freq: float,
    distance: float,
    rf_drive_freq: float = 74.5e6,
    species_table: dict[str, IonSpecies] | None = None,
    axial_window: tuple[float, float] = AXIAL_FREQ_WINDOW,
) -> TrapContext:
    """Build a validated TrapContext from a species name and trap frequencies.

    Frequencies are angular (rad/s). The axial frequency must fall inside the
    configured plausibility window (default 2*pi x 0.1..20 MHz).
    """
    species = get_species(species_name, species_table)
    ctx = TrapContext(species, axial_freq, radial_freq, distance, rf_drive_freq)
    lo, hi = axial_window
    if not (lo <= axial_freq <= hi):
        raise ValueError(
            f"axial_freq {axial_freq:.4g} rad/s outside plausibility window "
            f"[{lo:.4g}, {hi:.4g}]"
        )
    return ctx


def db_chain(losses) -> float:
    """Total loss of a chain of optical elements, each specified in dB."""
    losses = list(losses)
    if not losses:
        raise ValueError("db_chain requires at least one term")
    if not all(math.isfinite(x) for x in losses):
        raise ValueError("db_chain terms must be finite")
    return math.fsum(losses)
