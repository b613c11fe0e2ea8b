"""Weight-based pediatric dosing: age bands, unit conversion, Clark's rule.

Pure functions over value types; no I/O, no clocks, no shared state.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum

LB_PER_KG = 2.20462  # single source of truth for the kg -> lb conversion
REFERENCE_ADULT_WEIGHT_LB = 150  # denominator of Clark's rule
MAX_PEDIATRIC_AGE_MONTHS = 216  # 18 years; upper bound of the pediatric population

_TWO_PLACES = Decimal("0.01")


class DosingError(ValueError):
    """Base class for dosing input errors."""


class NotPediatric(DosingError):
    """Age is outside the pediatric range of 0 to 216 months."""


class NonPositiveWeight(DosingError):
    """Weight must be strictly positive."""


class NonPositiveDose(DosingError):
    """Dose amount must be strictly positive."""


class AgeBand(Enum):
    NEONATE = "neonate"        # [0, 1) months
    INFANT = "infant"          # [1, 24) months
    CHILD = "child"            # [24, 144) months
    ADOLESCENT = "adolescent"  # [144, 216] months


class DoseFlag(Enum):
    EXCEEDS_CAP = "exceeds_cap"
    BELOW_MEASURABLE = "below_measurable"


@dataclass(frozen=True)
class WeightLb:
    """A body weight in pounds, as Clark's rule expects."""

    value: float

    def __post_init__(self) -> None:
        if not self.value > 0:
            raise NonPositiveWeight(f"weight must be > 0 lb, got {self.value}")


@dataclass(frozen=True)
class AdultDose:
    """Reference adult dose from a drug monograph."""

    amount: float
    unit: str
    frequency: str = ""

    def __post_init__(self) -> None:
        if not self.amount > 0:
            raise NonPositiveDose(f"adult dose must be > 0, got {self.amount}")
        if not self.unit:
            raise DosingError("dose unit must be non-empty")


@dataclass(frozen=True)
class ChildDose:
    """A computed child dose, rounded for display.

    ``amount`` is the half-up 2-decimal rounding of the raw Clark's-rule
    value; it can round down to 0.0, in which case the dose must carry the
    BELOW_MEASURABLE flag (see ``check_dose_cap``).
    """

    amount: float
    unit: str
    flags: tuple[DoseFlag, ...] = ()

    def __post_init__(self) -> None:
        if self.amount < 0:
            raise NonPositiveDose(f"child dose cannot be negative, got {self.amount}")
        if not self.unit:
            raise DosingError("dose unit must be non-empty")
        object.__setattr__(self, "flags", tuple(self.flags))


def classify_age_band(age_months: float) -> AgeBand:
    """Classify an age in decimal months into the pediatric band it falls in.

    Bands are half-open toward the older band ([0,1) neonate, [1,24) infant,
    [24,144) child) with the final adolescent band closed at 216 months, so
    the four bands partition [0, 216] exactly.
    """
    if age_months < 0 or age_months > MAX_PEDIATRIC_AGE_MONTHS:
        raise NotPediatric(
            f"age {age_months} months is outside the pediatric range [0, {MAX_PEDIATRIC_AGE_MONTHS}]"
        )
    if age_months < 1:
        return AgeBand.NEONATE
    if age_months < 24:
        return AgeBand.INFANT
    if age_months < 144:
        return AgeBand.CHILD
    return AgeBand.ADOLESCENT


def kg_to_lb(weight_kg: float) -> WeightLb:
    """Convert a weight in kilograms to pounds, unrounded."""
    if not weight_kg > 0:
        raise NonPositiveWeight(f"weight must be > 0 kg, got {weight_kg}")
    return WeightLb(weight_kg * LB_PER_KG)


def round_dose(raw_amount: float) -> float:
    """Round a raw dose amount half-up to 2 decimal places.

    Rounding goes through ``Decimal(str(...))`` so values like 2.675 round
    up on their printed decimal value rather than their binary one.
    """
    if not raw_amount > 0:
        raise NonPositiveDose(f"raw dose must be > 0, got {raw_amount}")
    return float(Decimal(str(raw_amount)).quantize(_TWO_PLACES, rounding=ROUND_HALF_UP))


def clarks_dose(weight: WeightLb, adult: AdultDose) -> ChildDose:
    """Compute the child dose by Clark's rule: weight_lb * adult_dose / 150 lb.

    The quotient is computed in decimal arithmetic and rounded per
    ``round_dose``; the unit is copied from the adult dose. Flags are left
    empty; attach cap/zero flags via ``check_dose_cap``.
    """
    raw = (
        Decimal(str(weight.value))
        * Decimal(str(adult.amount))
        / Decimal(REFERENCE_ADULT_WEIGHT_LB)
    )
    rounded = float(raw.quantize(_TWO_PLACES, rounding=ROUND_HALF_UP))
    return ChildDose(amount=rounded, unit=adult.unit)


def check_dose_cap(dose: ChildDose, monograph_cap: float | None) -> list[DoseFlag]:
    """Return safety flags for a computed dose.

    EXCEEDS_CAP when the monograph declares a maximum child dose and the
    computed amount is above it; BELOW_MEASURABLE when rounding produced
    0.0. Flags never block: the prescriber decides.
    """
    flags: list[DoseFlag] = []
    if monograph_cap is not None and dose.amount > monograph_cap:
        flags.append(DoseFlag.EXCEEDS_CAP)
    if dose.amount == 0:
        flags.append(DoseFlag.BELOW_MEASURABLE)
    return flags
