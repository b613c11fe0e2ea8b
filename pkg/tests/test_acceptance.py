"""Acceptance suite: one test per product criterion, timed against its budget.

Each test prints a [PASS]/[FAIL] line (run with ``pytest -s`` to see them
live). Expected values are frozen from independent oracles: hand
arithmetic for doses, a brute-force scan for formulary search, and an
independent restatement of the checksum rule for codes.
"""

from __future__ import annotations

import json
import random
import threading
import time
from contextlib import contextmanager
from datetime import date, datetime, timedelta, timezone

import pytest
from fastapi.testclient import TestClient

from pedscript.api import create_app
from pedscript.codes import CODE_ALPHABET, code_checksum_valid, generate_code
from pedscript.dosing import (
    AdultDose,
    AgeBand,
    WeightLb,
    clarks_dose,
    classify_age_band,
    kg_to_lb,
    round_dose,
)
from pedscript.formulary import dump_formulary, find_by_indication, load_formulary
from pedscript.lifecycle import (
    VALIDITY_WINDOW,
    AlreadyDispensed,
    EmptyPrescription,
    ExpiredPrescription,
    IllegalTransition,
    NotIssued,
    PrescriptionStatus,
    dispense,
    expire_sweep,
    is_valid_at,
    issue,
    make_draft,
)
from pedscript.store import RecordsStore

from conftest import FORMULARY_RECORDS
from test_lifecycle import draft as make_test_draft
from test_lifecycle import dispensed, expired, issued, item

T0 = datetime(2026, 8, 1, 9, 0, 0, tzinfo=timezone.utc)


@contextmanager
def criterion(name: str, budget_seconds: float):
    start = time.monotonic()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {name}")
        raise
    elapsed = time.monotonic() - start
    print(f"[PASS] {name} ({elapsed:.2f}s, budget {budget_seconds:g}s)")
    assert elapsed < budget_seconds, f"{name} took {elapsed:.2f}s, budget {budget_seconds}s"


def test_clarks_rule_suite():
    """Identity at 150 lb, linearity in both arguments, monotonicity, units."""
    with criterion("Clark's-rule property suite (10,000 pairs)", 5.0):
        rng = random.Random(20260809)
        units = ["mg", "ml", "mcg", "units"]
        for n in range(10_000):
            weight = rng.uniform(0.5, 350.0)
            amount = rng.uniform(0.05, 4000.0)
            unit = units[n % 4]
            adult = AdultDose(amount, unit)

            identity = clarks_dose(WeightLb(150), adult)
            assert identity.amount == round_dose(amount)

            single = clarks_dose(WeightLb(weight), adult).amount
            double_weight = clarks_dose(WeightLb(2 * weight), adult).amount
            assert abs(double_weight - 2 * single) <= 0.01 + 1e-9

            double_dose = clarks_dose(WeightLb(weight), AdultDose(2 * amount, unit)).amount
            assert abs(double_dose - 2 * single) <= 0.01 + 1e-9

            other = rng.uniform(0.5, 350.0)
            lo, hi = sorted((weight, other))
            assert (
                clarks_dose(WeightLb(lo), adult).amount
                <= clarks_dose(WeightLb(hi), adult).amount
            )

            assert clarks_dose(WeightLb(weight), adult).unit == unit


def test_age_band_partition():
    """Every quarter-month age in [0, 216] maps to exactly one monotone band."""
    with criterion("Age-band partition (0.25-month steps, exhaustive)", 1.0):
        order = [AgeBand.NEONATE, AgeBand.INFANT, AgeBand.CHILD, AgeBand.ADOLESCENT]
        previous = 0
        seen = set()
        for quarter in range(0, 216 * 4 + 1):
            age = quarter / 4
            band = classify_age_band(age)
            assert isinstance(band, AgeBand)  # total: exactly one band per age
            index = order.index(band)
            assert index >= previous, f"bands went backwards at {age} months"
            previous = index
            seen.add(band)
        assert seen == set(order)
        # frozen anchors from the band definitions
        assert classify_age_band(0) is AgeBand.NEONATE
        assert classify_age_band(12) is AgeBand.INFANT
        assert classify_age_band(216) is AgeBand.ADOLESCENT


def test_code_security_suite():
    """Distinctness at 100k, full single-substitution rejection, seeded repro."""
    with criterion("Code security (100k distinct, 310k substitutions)", 30.0):
        codes = [generate_code() for _ in range(100_000)]
        assert len(set(codes)) == 100_000

        rejected = 0
        checked = 0
        for code in codes[:1000]:
            for position in range(10):  # body positions
                original = code[position]
                prefix, suffix = code[:position], code[position + 1 :]
                for replacement in CODE_ALPHABET:
                    if replacement == original:
                        continue
                    checked += 1
                    if not code_checksum_valid(prefix + replacement + suffix):
                        rejected += 1
        assert checked == 310_000
        assert rejected == 310_000, f"only {rejected}/310000 substitutions rejected"

        first = [generate_code(random.Random(99)) for _ in range(100)]
        second = [generate_code(random.Random(99)) for _ in range(100)]
        assert first == second


def test_lifecycle_exhaustiveness(tmp_path):
    """The transition table, the dispense race, and the 72h boundary flip."""
    with criterion("Lifecycle exhaustiveness + dispense-once race", 10.0):
        fixtures = {
            PrescriptionStatus.DRAFT: make_test_draft(),
            PrescriptionStatus.ISSUED: issued(T0),
            PrescriptionStatus.DISPENSED: dispensed(T0),
            PrescriptionStatus.EXPIRED: expired(T0),
        }
        code = fixtures[PrescriptionStatus.ISSUED].code
        now = T0 + timedelta(hours=1)

        transition_table = {
            ("issue", PrescriptionStatus.DRAFT): PrescriptionStatus.ISSUED,
            ("issue", PrescriptionStatus.ISSUED): IllegalTransition,
            ("issue", PrescriptionStatus.DISPENSED): IllegalTransition,
            ("issue", PrescriptionStatus.EXPIRED): IllegalTransition,
            ("dispense", PrescriptionStatus.DRAFT): IllegalTransition,
            ("dispense", PrescriptionStatus.ISSUED): PrescriptionStatus.DISPENSED,
            ("dispense", PrescriptionStatus.DISPENSED): AlreadyDispensed,
            ("dispense", PrescriptionStatus.EXPIRED): ExpiredPrescription,
            ("is_valid_at", PrescriptionStatus.DRAFT): NotIssued,
            ("is_valid_at", PrescriptionStatus.ISSUED): True,
            ("is_valid_at", PrescriptionStatus.DISPENSED): False,
            ("is_valid_at", PrescriptionStatus.EXPIRED): False,
        }
        operations = {
            "issue": lambda p: issue(p, code, T0).status,
            "dispense": lambda p: dispense(p, "ph-1", now).status,
            "is_valid_at": lambda p: is_valid_at(p, now),
        }
        for (op_name, status), expected in transition_table.items():
            p = fixtures[status]
            try:
                outcome = operations[op_name](p)
            except Exception as exc:
                outcome = type(exc)
            assert outcome == expected, f"{op_name} on {status.value}: {outcome} != {expected}"

        # expire_sweep row: only stale issued prescriptions transition; idempotent
        batch = list(fixtures.values())
        swept, count = expire_sweep(batch, T0 + VALIDITY_WINDOW)
        assert count == 1
        assert expire_sweep(swept, T0 + VALIDITY_WINDOW)[1] == 0

        # validity flips exactly at issued_at + 72h
        p = fixtures[PrescriptionStatus.ISSUED]
        boundary = p.issued_at + VALIDITY_WINDOW
        assert is_valid_at(p, boundary - timedelta(microseconds=1)) is True
        assert is_valid_at(p, boundary) is False

        # dispense-once under 100 concurrent attempts via the store's CAS
        store = RecordsStore(tmp_path / "race.db")
        prescriber = store.create_user("dr-race", "pw-race-1", "pediatrician")
        patient = store.register_patient(
            full_name="Race Case", date_of_birth=date(2022, 1, 1), weight_kg=12.0, sex="F", now=T0
        )
        p = issue(
            make_draft(patient.patient_id, prescriber.user_id, "otitis-media", [item()]),
            generate_code(random.Random(1)),
            T0,
        )
        store.store_prescription(p)
        outcomes: list[str] = []
        guard = threading.Lock()

        def attempt(n: int) -> None:
            try:
                store.dispense_prescription(p.internal_id, f"ph-{n}", now)
                verdict = "success"
            except AlreadyDispensed:
                verdict = "already_dispensed"
            with guard:
                outcomes.append(verdict)

        threads = [threading.Thread(target=attempt, args=(n,)) for n in range(100)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert outcomes.count("success") == 1
        assert outcomes.count("already_dispensed") == 99
        store.close()


def test_end_to_end_flow(tmp_path):
    """Login -> register -> suggest -> prescribe (override) -> dispense -> report."""
    with criterion("End-to-end prescribe/dispense/report flow", 10.0):
        store = RecordsStore(tmp_path / "clinic.db")
        for username, password, role in [
            ("admin", "admin-pass-1", "admin"),
            ("dr-ada", "peds-pass-1", "pediatrician"),
            ("ph-musa", "pharm-pass-1", "pharmacist"),
            ("moh-analyst", "moh-pass-1", "ministry"),
        ]:
            store.create_user(username, password, role)
        app = create_app(store, load_formulary(json.dumps(FORMULARY_RECORDS)))
        client = TestClient(app)

        def login(username: str, password: str) -> dict:
            response = client.post("/login", json={"username": username, "password": password})
            assert response.status_code == 200
            return {"Authorization": f"Bearer {response.json()['token']}"}

        ped = login("dr-ada", "peds-pass-1")

        patient = client.post(
            "/patients",
            json={
                "full_name": "Adaeze Obi",
                "date_of_birth": "2022-03-01",
                "weight_kg": 13.6078,  # 30 lb within a hundredth
                "sex": "F",
                "allergens": ["penicillin"],
                "guardian_contact": "+234-800-000-0001",
            },
            headers=ped,
        ).json()

        # suggestion dose equals an independent dosing-core call and the
        # hand-derived 30 lb * 150 mg / 150 lb = 30 mg
        entries = client.post(
            "/suggestions",
            json={"patient_id": patient["patient_id"], "diagnosis": "reflux"},
            headers=ped,
        ).json()
        assert len(entries) == 1
        independent = clarks_dose(kg_to_lb(13.6078), AdultDose(150, "mg", "twice daily"))
        assert entries[0]["proposed_child_dose"]["amount"] == independent.amount == 30.0

        # prescribing the conflicting drug requires an override
        blocked = client.post(
            "/prescriptions",
            json={
                "patient_id": patient["patient_id"],
                "diagnosis": "otitis-media",
                "items": [{"drug_id": "amox-250", "duration_days": 7}],
            },
            headers=ped,
        )
        assert blocked.status_code == 400
        assert blocked.json()["error_code"] == "ALLERGY_OVERRIDE_REQUIRED"

        issued_body = client.post(
            "/prescriptions",
            json={
                "patient_id": patient["patient_id"],
                "diagnosis": "otitis-media",
                "items": [
                    {"drug_id": "amox-250", "duration_days": 7},
                    {"drug_id": "azith-250", "duration_days": 5},
                ],
                "override_reasons": {"amox-250": "negative challenge test on file"},
            },
            headers=ped,
        ).json()
        code = issued_body["code"]
        assert code_checksum_valid(code)
        assert issued_body["prescription"]["status"] == "issued"
        for api_item in issued_body["prescription"]["items"]:
            adult = api_item["adult_reference_dose"]
            check = clarks_dose(
                kg_to_lb(patient["weight_kg"]),
                AdultDose(adult["amount"], adult["unit"], adult["frequency"]),
            )
            assert api_item["computed_child_dose"]["amount"] == check.amount

        # pharmacist fetches by code, sees the patient binding, dispenses once
        pharmacist = login("ph-musa", "pharm-pass-1")
        view = client.get(f"/prescriptions/{code}", headers=pharmacist).json()
        assert view["patient_name"] == "Adaeze Obi"
        assert view["valid_now"] is True
        dispensed_response = client.post(f"/prescriptions/{code}/dispense", headers=pharmacist)
        assert dispensed_response.status_code == 200
        assert dispensed_response.json()["prescription"]["status"] == "dispensed"
        again = client.post(f"/prescriptions/{code}/dispense", headers=pharmacist)
        assert again.status_code == 409
        assert again.json()["error_code"] == "ALREADY_DISPENSED"

        # ministry sees the aggregate, never the patient
        ministry = login("moh-analyst", "moh-pass-1")
        now = datetime.now(timezone.utc)
        report = client.get(
            "/reports/ministry",
            params={
                "from": (now - timedelta(hours=1)).isoformat(),
                "to": (now + timedelta(hours=1)).isoformat(),
            },
            headers=ministry,
        )
        assert report.status_code == 200
        rows = report.json()["rows"]
        assert rows == [
            {"diagnosis": "otitis-media", "prescription_count": 1, "distinct_drug_count": 2}
        ]
        assert patient["patient_id"] not in report.text
        assert "Adaeze" not in report.text and "Obi" not in report.text
        store.close()


def test_formulary_round_trip_and_oracle():
    """Dump/load identity and brute-force search equivalence at <= 50 records."""
    with criterion("Formulary round-trip + brute-force search oracle", 1.0):
        loaded = load_formulary(json.dumps(FORMULARY_RECORDS))
        reloaded = load_formulary(json.dumps(dump_formulary(loaded)))
        assert reloaded.monographs == loaded.monographs
        assert reloaded.version == loaded.version

        rng = random.Random(42)
        pool = ["otitis-media", "fever", "uti", "reflux", "pain", "cough", "asthma"]
        for _ in range(25):
            records = [
                {
                    "drug_id": f"drug-{n}",
                    "name": f"Drug {rng.randrange(10_000):04d}",
                    "ingredients": [f"ingredient-{n}"],
                    "indications": rng.sample(pool, rng.randint(1, 4)),
                    "adult_dose": {"amount": rng.randint(1, 1000), "unit": "mg"},
                    "route": "oral",
                }
                for n in range(rng.randint(0, 50))
            ]
            formulary = load_formulary(json.dumps(records))
            round_tripped = load_formulary(json.dumps(dump_formulary(formulary)))
            assert round_tripped.monographs == formulary.monographs
            for indication in pool:
                got = [m.drug_id for m in find_by_indication(formulary, indication)]
                oracle = [
                    drug_id
                    for _, drug_id in sorted(
                        (r["name"], r["drug_id"])
                        for r in records
                        if indication in r["indications"]
                    )
                ]
                assert got == oracle
