"""Drug formulary knowledge base.

Monographs load from a local JSON document (a top-level array of records)
that replaces the live Monthly Prescribing Reference lookup. Parsing is
strict: unknown fields are rejected so typos in clinical data fail loudly
instead of silently dropping information. A loaded formulary is immutable
and safe to share across threads; reloading swaps the whole value.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import IO, Iterable

from .dosing import AdultDose


class FormularyError(Exception):
    """Base class for formulary problems."""


class ParseError(FormularyError):
    """The formulary document is malformed; the message carries the position."""


class DuplicateDrugId(FormularyError):
    """Two records share a drug_id."""


class UnknownDrug(FormularyError):
    """No monograph with that drug_id."""


@dataclass(frozen=True)
class DrugMonograph:
    drug_id: str
    name: str
    ingredients: tuple[str, ...]
    indications: tuple[str, ...]
    adult_dose: AdultDose
    route: str
    max_child_dose: float | None = None
    contraindication_notes: str = ""


@dataclass(frozen=True)
class AllergyConflict:
    drug_id: str
    matched_ingredient: str
    patient_allergen: str


@dataclass(frozen=True)
class Formulary:
    monographs: dict[str, DrugMonograph]
    version: str
    loaded_at: datetime


_REQUIRED_FIELDS = {"drug_id", "name", "ingredients", "indications", "adult_dose", "route"}
_OPTIONAL_FIELDS = {"max_child_dose", "contraindication_notes"}
_DOSE_REQUIRED_FIELDS = {"amount", "unit"}
_DOSE_OPTIONAL_FIELDS = {"frequency"}


def _normalize(text: str) -> str:
    return text.strip().lower()


def _parse_string(record_pos: str, field: str, value: object) -> str:
    if not isinstance(value, str) or not value.strip():
        raise ParseError(f"{record_pos}: field '{field}' must be a non-empty string")
    return value


def _parse_string_list(record_pos: str, field: str, value: object) -> tuple[str, ...]:
    if not isinstance(value, list) or not value:
        raise ParseError(f"{record_pos}: field '{field}' must be a non-empty array of strings")
    out = []
    for entry in value:
        if not isinstance(entry, str) or not entry.strip():
            raise ParseError(f"{record_pos}: field '{field}' must contain non-empty strings")
        out.append(_normalize(entry))
    return tuple(out)


def _parse_number(record_pos: str, field: str, value: object) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
        raise ParseError(f"{record_pos}: field '{field}' must be a positive number")
    return float(value)


def _parse_adult_dose(record_pos: str, value: object) -> AdultDose:
    if not isinstance(value, dict):
        raise ParseError(f"{record_pos}: field 'adult_dose' must be an object")
    unknown = set(value) - _DOSE_REQUIRED_FIELDS - _DOSE_OPTIONAL_FIELDS
    if unknown:
        raise ParseError(f"{record_pos}: unknown adult_dose field '{sorted(unknown)[0]}'")
    missing = _DOSE_REQUIRED_FIELDS - set(value)
    if missing:
        raise ParseError(f"{record_pos}: adult_dose is missing field '{sorted(missing)[0]}'")
    frequency = value.get("frequency", "")
    if not isinstance(frequency, str):
        raise ParseError(f"{record_pos}: adult_dose field 'frequency' must be a string")
    return AdultDose(
        amount=_parse_number(record_pos, "adult_dose.amount", value["amount"]),
        unit=_parse_string(record_pos, "adult_dose.unit", value["unit"]),
        frequency=frequency,
    )


def _parse_record(index: int, record: object) -> DrugMonograph:
    pos = f"record {index}"
    if not isinstance(record, dict):
        raise ParseError(f"{pos}: expected an object")
    unknown = set(record) - _REQUIRED_FIELDS - _OPTIONAL_FIELDS
    if unknown:
        raise ParseError(f"{pos}: unknown field '{sorted(unknown)[0]}'")
    missing = _REQUIRED_FIELDS - set(record)
    if missing:
        raise ParseError(f"{pos}: missing field '{sorted(missing)[0]}'")
    max_child_dose = record.get("max_child_dose")
    if max_child_dose is not None:
        max_child_dose = _parse_number(pos, "max_child_dose", max_child_dose)
    notes = record.get("contraindication_notes", "")
    if not isinstance(notes, str):
        raise ParseError(f"{pos}: field 'contraindication_notes' must be a string")
    return DrugMonograph(
        drug_id=_parse_string(pos, "drug_id", record["drug_id"]),
        name=_parse_string(pos, "name", record["name"]),
        ingredients=_parse_string_list(pos, "ingredients", record["ingredients"]),
        indications=_parse_string_list(pos, "indications", record["indications"]),
        adult_dose=_parse_adult_dose(pos, record["adult_dose"]),
        route=_parse_string(pos, "route", record["route"]),
        max_child_dose=max_child_dose,
        contraindication_notes=notes,
    )


def load_formulary(
    source: IO[bytes] | IO[str] | bytes | str,
    now: datetime | None = None,
) -> Formulary:
    """Parse a formulary document from a readable stream or its raw content.

    The version string is a digest of the normalized records, so two loads
    of the same content report the same version.
    """
    raw = source.read() if hasattr(source, "read") else source
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        document = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(document, list):
        raise ParseError("top level of a formulary document must be an array of records")

    monographs: dict[str, DrugMonograph] = {}
    for index, record in enumerate(document, start=1):
        monograph = _parse_record(index, record)
        if monograph.drug_id in monographs:
            raise DuplicateDrugId(f"record {index}: duplicate drug_id '{monograph.drug_id}'")
        monographs[monograph.drug_id] = monograph

    canonical = json.dumps(
        [_record_dict(m) for m in monographs.values()], sort_keys=True, separators=(",", ":")
    )
    version = hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]
    return Formulary(
        monographs=monographs,
        version=version,
        loaded_at=now or datetime.now(timezone.utc),
    )


def _record_dict(m: DrugMonograph) -> dict:
    record = {
        "drug_id": m.drug_id,
        "name": m.name,
        "ingredients": list(m.ingredients),
        "indications": list(m.indications),
        "adult_dose": {
            "amount": m.adult_dose.amount,
            "unit": m.adult_dose.unit,
            "frequency": m.adult_dose.frequency,
        },
        "route": m.route,
        "contraindication_notes": m.contraindication_notes,
    }
    if m.max_child_dose is not None:
        record["max_child_dose"] = m.max_child_dose
    return record


def dump_formulary(formulary: Formulary) -> list[dict]:
    """Re-emit the formulary as a list of records; loading it back round-trips."""
    return [_record_dict(m) for m in formulary.monographs.values()]


def find_by_indication(formulary: Formulary, indication: str) -> list[DrugMonograph]:
    """All monographs listing the indication, sorted by name then drug_id.

    Matching is exact on the normalized (lowercase, trimmed) code; no fuzzy
    or free-text search.
    """
    needle = _normalize(indication)
    matches = [m for m in formulary.monographs.values() if needle in m.indications]
    return sorted(matches, key=lambda m: (m.name, m.drug_id))


def get_monograph(formulary: Formulary, drug_id: str) -> DrugMonograph:
    try:
        return formulary.monographs[drug_id]
    except KeyError:
        raise UnknownDrug(f"no monograph with drug_id '{drug_id}'") from None


def allergy_conflicts(
    monograph: DrugMonograph, allergens: Iterable[str]
) -> list[AllergyConflict]:
    """Cross the monograph's ingredients against a patient's allergen list.

    One conflict per (ingredient, allergen) pair that is equal after
    lowercase/trim normalization; an empty result means no known conflict.
    No drug-class expansion is attempted.
    """
    conflicts = []
    for ingredient in monograph.ingredients:
        for allergen in allergens:
            if ingredient == _normalize(allergen):
                conflicts.append(
                    AllergyConflict(
                        drug_id=monograph.drug_id,
                        matched_ingredient=ingredient,
                        patient_allergen=allergen,
                    )
                )
    return conflicts
