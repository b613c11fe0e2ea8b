"""Prescription lifecycle: Draft -> Issued -> Dispensed | Expired.

Prescription values are immutable; every transition returns a new value.
An issued prescription can be dispensed only while it is valid, i.e. for
exactly 72 hours from ``issued_at`` (boundary-exclusive). The persistence
layer applies transitions with compare-and-set on status so concurrent
dispense attempts have exactly one winner.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from enum import Enum

from .codes import code_checksum_valid
from .dosing import AdultDose, ChildDose

VALIDITY_WINDOW = timedelta(hours=72)  # the three-day pickup window


class LifecycleError(Exception):
    """Base class for illegal lifecycle operations."""


class IllegalTransition(LifecycleError):
    """Operation not defined for the prescription's current status."""


class EmptyPrescription(LifecycleError):
    """A prescription cannot be issued without items."""


class NotIssued(LifecycleError):
    """Validity is undefined for a draft prescription."""


class AlreadyDispensed(LifecycleError):
    """The prescription was already dispensed; dispensing is one-shot."""


class ExpiredPrescription(LifecycleError):
    """The 72-hour pickup window has closed."""


class PrescriptionStatus(str, Enum):
    DRAFT = "draft"
    ISSUED = "issued"
    DISPENSED = "dispensed"
    EXPIRED = "expired"


@dataclass(frozen=True)
class PrescriptionItem:
    """One drug line with its dose frozen at issue time."""

    drug_id: str
    adult_reference_dose: AdultDose
    computed_child_dose: ChildDose
    frequency: str
    duration_days: int
    route: str
    notes: str = ""

    def __post_init__(self) -> None:
        if not self.drug_id:
            raise ValueError("item drug_id must be non-empty")
        if self.duration_days <= 0:
            raise ValueError(f"duration_days must be > 0, got {self.duration_days}")


@dataclass(frozen=True)
class Prescription:
    internal_id: str
    patient_id: str
    prescriber_id: str
    diagnosis: str
    items: tuple[PrescriptionItem, ...]
    status: PrescriptionStatus = PrescriptionStatus.DRAFT
    code: str | None = None
    issued_at: datetime | None = None
    dispensed_at: datetime | None = None
    dispensing_pharmacist_id: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        if not self.internal_id:
            raise ValueError("internal_id must be non-empty")
        if not self.patient_id:
            raise ValueError("patient_id must be non-empty")
        if not self.prescriber_id:
            raise ValueError("prescriber_id must always be present")
        issued = self.status is not PrescriptionStatus.DRAFT
        if issued:
            if not self.items:
                raise ValueError("an issued prescription must have items")
            if self.code is None:
                raise ValueError("code must be present from issue onward")
            if self.issued_at is None:
                raise ValueError("issued_at must be set from issue onward")
        else:
            if self.issued_at is not None:
                raise ValueError("a draft cannot carry issued_at")
        if self.status is PrescriptionStatus.DISPENSED:
            if self.dispensed_at is None or self.dispensing_pharmacist_id is None:
                raise ValueError("a dispensed prescription must record when and by whom")
        elif self.dispensed_at is not None:
            raise ValueError("dispensed_at is only set on dispensed prescriptions")


def make_draft(
    patient_id: str,
    prescriber_id: str,
    diagnosis: str,
    items: list[PrescriptionItem] | tuple[PrescriptionItem, ...],
    internal_id: str | None = None,
) -> Prescription:
    """Create a draft prescription with a fresh internal id."""
    return Prescription(
        internal_id=internal_id or uuid.uuid4().hex,
        patient_id=patient_id,
        prescriber_id=prescriber_id,
        diagnosis=diagnosis,
        items=tuple(items),
    )


def issue(draft: Prescription, code: str, now: datetime) -> Prescription:
    """Attach a code to a draft and mark it issued at ``now``."""
    if draft.status is not PrescriptionStatus.DRAFT:
        raise IllegalTransition(f"cannot issue a prescription in status {draft.status.value}")
    if not draft.items:
        raise EmptyPrescription("cannot issue a prescription with no items")
    if not code_checksum_valid(code):
        raise ValueError(f"not a well-formed prescription code: {code!r}")
    return replace(draft, status=PrescriptionStatus.ISSUED, code=code, issued_at=now)


def is_valid_at(prescription: Prescription, now: datetime) -> bool:
    """True iff the prescription is issued and within its 72-hour window.

    False at the boundary instant (strict less-than) and for dispensed or
    expired prescriptions; raises for drafts, whose validity is undefined.
    """
    if prescription.status is PrescriptionStatus.DRAFT:
        raise NotIssued("a draft prescription has no validity window")
    return (
        prescription.status is PrescriptionStatus.ISSUED
        and now < prescription.issued_at + VALIDITY_WINDOW
    )


def dispense(prescription: Prescription, pharmacist_id: str, now: datetime) -> Prescription:
    """Dispense an issued, still-valid prescription. One-shot and terminal."""
    if prescription.status is PrescriptionStatus.DRAFT:
        raise IllegalTransition("cannot dispense a draft prescription")
    if prescription.status is PrescriptionStatus.DISPENSED:
        raise AlreadyDispensed(f"prescription {prescription.internal_id} was already dispensed")
    if prescription.status is PrescriptionStatus.EXPIRED or not is_valid_at(prescription, now):
        raise ExpiredPrescription(
            f"prescription {prescription.internal_id} expired at "
            f"{(prescription.issued_at + VALIDITY_WINDOW).isoformat()}"
        )
    return replace(
        prescription,
        status=PrescriptionStatus.DISPENSED,
        dispensed_at=now,
        dispensing_pharmacist_id=pharmacist_id,
    )


def expire_sweep(
    prescriptions: list[Prescription] | tuple[Prescription, ...],
    now: datetime,
) -> tuple[list[Prescription], int]:
    """Mark every issued prescription past its window as expired.

    Returns the updated list and the number of transitions applied.
    Idempotent: a second sweep over the result transitions nothing.
    """
    out: list[Prescription] = []
    transitions = 0
    for p in prescriptions:
        if p.status is PrescriptionStatus.ISSUED and now >= p.issued_at + VALIDITY_WINDOW:
            out.append(replace(p, status=PrescriptionStatus.EXPIRED))
            transitions += 1
        else:
            out.append(p)
    return out, transitions
