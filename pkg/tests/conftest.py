"""Shared fixtures: a small realistic formulary, a store, seeded users."""

from __future__ import annotations

import json
from datetime import datetime, timezone

import pytest

from pedscript.formulary import load_formulary
from pedscript.store import RecordsStore

FORMULARY_RECORDS = [
    {
        "drug_id": "amox-250",
        "name": "Amoxicillin",
        "ingredients": ["amoxicillin", "penicillin"],
        "indications": ["otitis-media", "sinusitis"],
        "adult_dose": {"amount": 500, "unit": "mg", "frequency": "every 8 hours"},
        "route": "oral",
        "max_child_dose": 500,
        "contraindication_notes": "penicillin class; avoid with penicillin allergy",
    },
    {
        "drug_id": "azith-250",
        "name": "Azithromycin",
        "ingredients": ["azithromycin"],
        "indications": ["otitis-media", "pneumonia"],
        "adult_dose": {"amount": 500, "unit": "mg", "frequency": "once daily"},
        "route": "oral",
    },
    {
        "drug_id": "para-500",
        "name": "Paracetamol",
        "ingredients": ["paracetamol"],
        "indications": ["fever", "pain"],
        "adult_dose": {"amount": 1000, "unit": "mg", "frequency": "every 6 hours"},
        "route": "oral",
        "max_child_dose": 500,
        "contraindication_notes": "hepatic impairment",
    },
    {
        "drug_id": "ibu-400",
        "name": "Ibuprofen",
        "ingredients": ["ibuprofen"],
        "indications": ["fever", "pain"],
        "adult_dose": {"amount": 400, "unit": "mg", "frequency": "every 8 hours"},
        "route": "oral",
        "max_child_dose": 400,
    },
    {
        "drug_id": "rani-150",
        "name": "Ranitidine",
        "ingredients": ["ranitidine"],
        "indications": ["reflux"],
        "adult_dose": {"amount": 150, "unit": "mg", "frequency": "twice daily"},
        "route": "oral",
    },
    {
        "drug_id": "cefix-200",
        "name": "Cefixime",
        "ingredients": ["cefixime"],
        "indications": ["uti"],
        "adult_dose": {"amount": 400, "unit": "mg", "frequency": "once daily"},
        "route": "oral",
    },
]

NOW = datetime(2026, 8, 9, 12, 0, 0, tzinfo=timezone.utc)


@pytest.fixture
def formulary():
    return load_formulary(json.dumps(FORMULARY_RECORDS))


@pytest.fixture
def store(tmp_path):
    s = RecordsStore(tmp_path / "records.db")
    yield s
    s.close()


@pytest.fixture
def users(store):
    return {
        "admin": store.create_user("admin", "admin-pass-1", "admin"),
        "pediatrician": store.create_user("dr-ada", "peds-pass-1", "pediatrician"),
        "pharmacist": store.create_user("ph-musa", "pharm-pass-1", "pharmacist"),
        "ministry": store.create_user("moh-analyst", "moh-pass-1", "ministry"),
    }
