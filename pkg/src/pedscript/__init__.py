"""Pediatric e-prescription platform: dosing, formulary, lifecycle, store, API."""

from .codes import code_checksum_valid, generate_code
from .dosing import (
    AdultDose,
    AgeBand,
    ChildDose,
    DoseFlag,
    WeightLb,
    check_dose_cap,
    clarks_dose,
    classify_age_band,
    kg_to_lb,
    round_dose,
)
from .formulary import Formulary, load_formulary
from .lifecycle import Prescription, PrescriptionItem, PrescriptionStatus
from .store import RecordsStore, Role

__version__ = "0.1.0"

__all__ = [
    "AdultDose",
    "AgeBand",
    "ChildDose",
    "DoseFlag",
    "Formulary",
    "Prescription",
    "PrescriptionItem",
    "PrescriptionStatus",
    "RecordsStore",
    "Role",
    "WeightLb",
    "check_dose_cap",
    "clarks_dose",
    "classify_age_band",
    "code_checksum_valid",
    "generate_code",
    "kg_to_lb",
    "load_formulary",
    "round_dose",
    "__version__",
]
