"""Printable prescription documents.

The plain-text fallback the pediatrician hands to the patient when the
network is down: 80-column fixed-width lines, byte-stable for identical
inputs, carrying the code, prescriber id, patient name, every item, and
the issue timestamp.
"""

from __future__ import annotations

from typing import Mapping

from .lifecycle import NotIssued, Prescription

LINE_WIDTH = 80


def render_printable(
    prescription: Prescription,
    patient_name: str,
    drug_names: Mapping[str, str] | None = None,
) -> list[str]:
    """Render an issued prescription as fixed-width text lines.

    ``drug_names`` maps drug_id to a display name; ids are printed as-is
    when no name is known. Drafts have nothing to hand-deliver and raise.
    """
    if prescription.code is None or prescription.issued_at is None:
        raise NotIssued("only an issued prescription can be printed")
    names = drug_names or {}
    lines = [
        "PEDIATRIC E-PRESCRIPTION".center(LINE_WIDTH),
        "=" * LINE_WIDTH,
        f"RX CODE: {prescription.code}",
        f"PRESCRIBER ID: {prescription.prescriber_id}",
        f"PATIENT: {patient_name}",
        f"ISSUED AT: {prescription.issued_at.isoformat()}",
        f"DIAGNOSIS: {prescription.diagnosis}",
        "-" * LINE_WIDTH,
    ]
    for number, item in enumerate(prescription.items, start=1):
        dose = item.computed_child_dose
        lines.append(f"{number}. {names.get(item.drug_id, item.drug_id)}")
        lines.append(f"   DOSE: {dose.amount} {dose.unit}    FREQUENCY: {item.frequency}")
        lines.append(f"   DURATION: {item.duration_days} days    ROUTE: {item.route}")
        if item.notes:
            lines.append(f"   NOTES: {item.notes}")
    lines.append("-" * LINE_WIDTH)
    lines.append("Hand-deliver to the dispensing pharmacy; the code above is required for pickup.")
    lines.append("=" * LINE_WIDTH)
    return [line[:LINE_WIDTH].ljust(LINE_WIDTH) for line in lines]
