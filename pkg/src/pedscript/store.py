"""Records store: patients (EHR), users, sessions, and stored prescriptions.

Backed by an embedded SQLite database behind a narrow interface so a
networked database could replace it later. All mutations run inside a
transaction under one lock; prescription status transitions additionally
use compare-and-set on the stored status, so concurrent dispense attempts
have exactly one winner even across store instances sharing a file.
"""

from __future__ import annotations

import hashlib
import hmac
import json
import secrets
import sqlite3
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import date, datetime, timedelta
from enum import Enum
from pathlib import Path

from . import lifecycle
from .codes import code_checksum_valid
from .dosing import AdultDose, ChildDose, DoseFlag, NotPediatric
from .lifecycle import Prescription, PrescriptionItem, PrescriptionStatus

SESSION_LIFETIME = timedelta(hours=8)  # one clinical shift
MAX_REGISTRATION_AGE_MONTHS = 216
DAYS_PER_MONTH = 30.4375  # 365.25 / 12, so a year is exactly 12 months

_SCRYPT_N, _SCRYPT_R, _SCRYPT_P = 2**14, 8, 1


class StoreError(Exception):
    """Base class for records-store failures."""


class InvalidCredentials(StoreError):
    """Unknown user or wrong password; deliberately indistinguishable."""


class ValidationFailed(StoreError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnknownPatient(StoreError):
    pass


class UnknownUser(StoreError):
    pass


class UnknownPrescription(StoreError):
    pass


class MalformedCode(StoreError):
    """The code failed its checksum; a typo, not a missing prescription."""


class DuplicateCode(StoreError):
    """Prescription codes are a unique key."""


class Role(str, Enum):
    ADMIN = "admin"
    PEDIATRICIAN = "pediatrician"
    PHARMACIST = "pharmacist"
    MINISTRY = "ministry"


@dataclass(frozen=True)
class User:
    user_id: str
    username: str
    role: Role


@dataclass(frozen=True)
class Session:
    token: str
    user_id: str
    role: Role
    expires_at: datetime


@dataclass(frozen=True)
class AdrEntry:
    drug_id: str
    note: str
    recorded_at: datetime


@dataclass(frozen=True)
class Patient:
    patient_id: str
    full_name: str
    date_of_birth: date
    weight_kg: float
    sex: str
    allergens: tuple[str, ...] = ()
    adr_history: tuple[AdrEntry, ...] = ()
    family_history_notes: str = ""
    guardian_contact: str = ""


def hash_password(password: str) -> str:
    """Salted scrypt digest; memory-hard, one per user."""
    salt = secrets.token_bytes(16)
    key = hashlib.scrypt(
        password.encode("utf-8"), salt=salt, n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P
    )
    return f"scrypt${_SCRYPT_N}${_SCRYPT_R}${_SCRYPT_P}${salt.hex()}${key.hex()}"


def verify_password(password: str, digest: str) -> bool:
    """Constant-time comparison of the recomputed digest."""
    try:
        scheme, n, r, p, salt_hex, key_hex = digest.split("$")
        if scheme != "scrypt":
            return False
        key = hashlib.scrypt(
            password.encode("utf-8"), salt=bytes.fromhex(salt_hex), n=int(n), r=int(r), p=int(p)
        )
        return hmac.compare_digest(key, bytes.fromhex(key_hex))
    except (ValueError, TypeError):
        return False


_DUMMY_DIGEST = hash_password("incorrect-by-construction")


def age_in_months(date_of_birth: date, at: date | datetime) -> float:
    """Age in decimal months, with a month fixed at 365.25/12 days."""
    reference = at.date() if isinstance(at, datetime) else at
    return (reference - date_of_birth).days / DAYS_PER_MONTH


_SCHEMA = """
CREATE TABLE IF NOT EXISTS users (
    user_id TEXT PRIMARY KEY,
    username TEXT NOT NULL UNIQUE,
    password_digest TEXT NOT NULL,
    role TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS sessions (
    token TEXT PRIMARY KEY,
    user_id TEXT NOT NULL REFERENCES users(user_id),
    role TEXT NOT NULL,
    expires_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS patients (
    patient_id TEXT PRIMARY KEY,
    full_name TEXT NOT NULL,
    date_of_birth TEXT NOT NULL,
    weight_kg REAL NOT NULL,
    sex TEXT NOT NULL,
    allergens TEXT NOT NULL,
    adr_history TEXT NOT NULL,
    family_history_notes TEXT NOT NULL,
    guardian_contact TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS prescriptions (
    internal_id TEXT PRIMARY KEY,
    code TEXT UNIQUE,
    patient_id TEXT NOT NULL REFERENCES patients(patient_id),
    prescriber_id TEXT NOT NULL REFERENCES users(user_id),
    diagnosis TEXT NOT NULL,
    status TEXT NOT NULL,
    issued_at TEXT,
    dispensed_at TEXT,
    dispensing_pharmacist_id TEXT,
    items TEXT NOT NULL
);
"""


class RecordsStore:
    """Persistence and identity behind one SQLite file (or ':memory:')."""

    def __init__(self, path: str | Path = ":memory:"):
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._lock = threading.RLock()
        with self._lock:
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    def close(self) -> None:
        self._conn.close()

    # -- users and sessions ------------------------------------------------

    def create_user(self, username: str, password: str, role: Role | str) -> User:
        username = username.strip()
        if not username:
            raise ValidationFailed("username", "must be non-empty")
        if not password:
            raise ValidationFailed("password", "must be non-empty")
        role = Role(role)
        user = User(user_id=uuid.uuid4().hex, username=username, role=role)
        with self._lock:
            try:
                self._conn.execute(
                    "INSERT INTO users VALUES (?, ?, ?, ?)",
                    (user.user_id, username, hash_password(password), role.value),
                )
                self._conn.commit()
            except sqlite3.IntegrityError:
                self._conn.rollback()
                raise ValidationFailed("username", f"'{username}' is already taken") from None
        return user

    def get_user(self, user_id: str) -> User:
        with self._lock:
            row = self._conn.execute(
                "SELECT user_id, username, role FROM users WHERE user_id = ?", (user_id,)
            ).fetchone()
        if row is None:
            raise UnknownUser(f"no user with id '{user_id}'")
        return User(row["user_id"], row["username"], Role(row["role"]))

    def authenticate(self, username: str, password: str, now: datetime) -> Session:
        """Issue a fresh 8-hour session on a digest match.

        Unknown user and wrong password raise the same error, and a dummy
        digest is verified for unknown users so the two cases cost the same.
        """
        with self._lock:
            row = self._conn.execute(
                "SELECT user_id, password_digest, role FROM users WHERE username = ?",
                (username,),
            ).fetchone()
        if row is None:
            verify_password(password, _DUMMY_DIGEST)
            raise InvalidCredentials("invalid credentials")
        if not verify_password(password, row["password_digest"]):
            raise InvalidCredentials("invalid credentials")
        session = Session(
            token=secrets.token_hex(16),
            user_id=row["user_id"],
            role=Role(row["role"]),
            expires_at=now + SESSION_LIFETIME,
        )
        with self._lock:
            self._conn.execute(
                "INSERT INTO sessions VALUES (?, ?, ?, ?)",
                (session.token, session.user_id, session.role.value, session.expires_at.isoformat()),
            )
            self._conn.commit()
        return session

    def session_for_token(self, token: str, now: datetime) -> Session | None:
        """The live session for a token, or None if absent or expired."""
        with self._lock:
            row = self._conn.execute(
                "SELECT token, user_id, role, expires_at FROM sessions WHERE token = ?", (token,)
            ).fetchone()
        if row is None:
            return None
        expires_at = datetime.fromisoformat(row["expires_at"])
        if now >= expires_at:
            return None
        return Session(row["token"], row["user_id"], Role(row["role"]), expires_at)

    # -- patients ------------------------------------------------------------

    def register_patient(
        self,
        *,
        full_name: str,
        date_of_birth: date,
        weight_kg: float,
        sex: str,
        allergens: list[str] | tuple[str, ...] = (),
        family_history_notes: str = "",
        guardian_contact: str = "",
        now: datetime,
    ) -> Patient:
        if not full_name.strip():
            raise ValidationFailed("full_name", "must be non-empty")
        if not isinstance(weight_kg, (int, float)) or not weight_kg > 0:
            raise ValidationFailed("weight_kg", "must be a number > 0")
        age = age_in_months(date_of_birth, now)
        if age < 0:
            raise ValidationFailed("date_of_birth", "cannot be in the future")
        if age > MAX_REGISTRATION_AGE_MONTHS:
            raise NotPediatric(
                f"patient is {age:.1f} months old; this clinic registers ages 0-216 months"
            )
        normalized: list[str] = []
        for allergen in allergens:
            cleaned = allergen.strip().lower()
            if cleaned and cleaned not in normalized:
                normalized.append(cleaned)
        patient = Patient(
            patient_id=uuid.uuid4().hex,
            full_name=full_name.strip(),
            date_of_birth=date_of_birth,
            weight_kg=float(weight_kg),
            sex=sex.strip(),
            allergens=tuple(normalized),
            adr_history=(),
            family_history_notes=family_history_notes,
            guardian_contact=guardian_contact,
        )
        with self._lock:
            self._conn.execute(
                "INSERT INTO patients VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    patient.patient_id,
                    patient.full_name,
                    patient.date_of_birth.isoformat(),
                    patient.weight_kg,
                    patient.sex,
                    json.dumps(list(patient.allergens)),
                    json.dumps([]),
                    patient.family_history_notes,
                    patient.guardian_contact,
                ),
            )
            self._conn.commit()
        return patient

    def get_patient(self, patient_id: str) -> Patient:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM patients WHERE patient_id = ?", (patient_id,)
            ).fetchone()
        if row is None:
            raise UnknownPatient(f"no patient with id '{patient_id}'")
        return self._patient_from_row(row)

    def list_patients(self, query: str | None = None) -> list[Patient]:
        """All patients, name-sorted; optional case-insensitive name filter."""
        with self._lock:
            rows = self._conn.execute("SELECT * FROM patients").fetchall()
        patients = [self._patient_from_row(row) for row in rows]
        if query:
            needle = query.casefold()
            patients = [p for p in patients if needle in p.full_name.casefold()]
        return sorted(patients, key=lambda p: (p.full_name.casefold(), p.patient_id))

    def record_adr(self, patient_id: str, drug_id: str, note: str, now: datetime) -> Patient:
        with self._lock:
            patient = self.get_patient(patient_id)
            entry = AdrEntry(drug_id=drug_id, note=note, recorded_at=now)
            history = patient.adr_history + (entry,)
            self._conn.execute(
                "UPDATE patients SET adr_history = ? WHERE patient_id = ?",
                (
                    json.dumps(
                        [
                            {"drug_id": e.drug_id, "note": e.note, "recorded_at": e.recorded_at.isoformat()}
                            for e in history
                        ]
                    ),
                    patient_id,
                ),
            )
            self._conn.commit()
        return replace(patient, adr_history=history)

    @staticmethod
    def _patient_from_row(row: sqlite3.Row) -> Patient:
        return Patient(
            patient_id=row["patient_id"],
            full_name=row["full_name"],
            date_of_birth=date.fromisoformat(row["date_of_birth"]),
            weight_kg=row["weight_kg"],
            sex=row["sex"],
            allergens=tuple(json.loads(row["allergens"])),
            adr_history=tuple(
                AdrEntry(e["drug_id"], e["note"], datetime.fromisoformat(e["recorded_at"]))
                for e in json.loads(row["adr_history"])
            ),
            family_history_notes=row["family_history_notes"],
            guardian_contact=row["guardian_contact"],
        )

    # -- prescriptions ---------------------------------------------------------

    def store_prescription(self, prescription: Prescription) -> None:
        """Persist a prescription; its patient and prescriber must exist."""
        with self._lock:
            if (
                self._conn.execute(
                    "SELECT 1 FROM patients WHERE patient_id = ?", (prescription.patient_id,)
                ).fetchone()
                is None
            ):
                raise UnknownPatient(f"no patient with id '{prescription.patient_id}'")
            if (
                self._conn.execute(
                    "SELECT 1 FROM users WHERE user_id = ?", (prescription.prescriber_id,)
                ).fetchone()
                is None
            ):
                raise UnknownUser(f"no prescriber with id '{prescription.prescriber_id}'")
            try:
                self._conn.execute(
                    "INSERT INTO prescriptions VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                    (
                        prescription.internal_id,
                        prescription.code,
                        prescription.patient_id,
                        prescription.prescriber_id,
                        prescription.diagnosis,
                        prescription.status.value,
                        prescription.issued_at.isoformat() if prescription.issued_at else None,
                        prescription.dispensed_at.isoformat() if prescription.dispensed_at else None,
                        prescription.dispensing_pharmacist_id,
                        json.dumps(_items_to_json(prescription.items)),
                    ),
                )
                self._conn.commit()
            except sqlite3.IntegrityError as exc:
                self._conn.rollback()
                if "code" in str(exc):
                    raise DuplicateCode(f"a prescription with code {prescription.code} exists") from None
                raise StoreError(str(exc)) from None

    def fetch_prescription(self, internal_id: str) -> Prescription:
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM prescriptions WHERE internal_id = ?", (internal_id,)
            ).fetchone()
        if row is None:
            raise UnknownPrescription(f"no prescription with id '{internal_id}'")
        return _prescription_from_row(row)

    def fetch_prescription_by_code(self, code: str) -> Prescription:
        """Look a prescription up by its code.

        A checksum failure raises MalformedCode so callers can tell a typo
        apart from a prescription that does not exist.
        """
        if not code_checksum_valid(code):
            raise MalformedCode(f"'{code}' is not a well-formed prescription code")
        with self._lock:
            row = self._conn.execute(
                "SELECT * FROM prescriptions WHERE code = ?", (code,)
            ).fetchone()
        if row is None:
            raise UnknownPrescription(f"no prescription with code '{code}'")
        return _prescription_from_row(row)

    def dispense_prescription(self, internal_id: str, pharmacist_id: str, now: datetime) -> Prescription:
        """Apply the dispense transition with compare-and-set on status.

        Exactly one concurrent attempt wins; losers get AlreadyDispensed.
        An issued prescription found past its window is materialized as
        expired on the way out, so correctness never waits for a sweep.
        """
        with self._lock:
            current = self.fetch_prescription(internal_id)
            try:
                updated = lifecycle.dispense(current, pharmacist_id, now)
            except lifecycle.ExpiredPrescription:
                if current.status is PrescriptionStatus.ISSUED:
                    self._conn.execute(
                        "UPDATE prescriptions SET status = ? WHERE internal_id = ? AND status = ?",
                        (PrescriptionStatus.EXPIRED.value, internal_id, PrescriptionStatus.ISSUED.value),
                    )
                    self._conn.commit()
                raise
            cursor = self._conn.execute(
                "UPDATE prescriptions SET status = ?, dispensed_at = ?, dispensing_pharmacist_id = ?"
                " WHERE internal_id = ? AND status = ?",
                (
                    updated.status.value,
                    updated.dispensed_at.isoformat(),
                    updated.dispensing_pharmacist_id,
                    internal_id,
                    PrescriptionStatus.ISSUED.value,
                ),
            )
            self._conn.commit()
            if cursor.rowcount == 0:
                contended = self.fetch_prescription(internal_id)
                if contended.status is PrescriptionStatus.DISPENSED:
                    raise lifecycle.AlreadyDispensed(
                        f"prescription {internal_id} was already dispensed"
                    )
                if contended.status is PrescriptionStatus.EXPIRED:
                    raise lifecycle.ExpiredPrescription(f"prescription {internal_id} has expired")
                raise lifecycle.IllegalTransition(
                    f"prescription {internal_id} is {contended.status.value}"
                )
        return updated

    def expire_sweep(self, now: datetime) -> int:
        """Expire every issued prescription past its window; returns the count."""
        transitions = 0
        with self._lock:
            rows = self._conn.execute(
                "SELECT internal_id, issued_at FROM prescriptions WHERE status = ?",
                (PrescriptionStatus.ISSUED.value,),
            ).fetchall()
            for row in rows:
                issued_at = datetime.fromisoformat(row["issued_at"])
                if now >= issued_at + lifecycle.VALIDITY_WINDOW:
                    cursor = self._conn.execute(
                        "UPDATE prescriptions SET status = ? WHERE internal_id = ? AND status = ?",
                        (PrescriptionStatus.EXPIRED.value, row["internal_id"], PrescriptionStatus.ISSUED.value),
                    )
                    transitions += cursor.rowcount
            self._conn.commit()
        return transitions

    def prescriptions_issued_between(self, start: datetime, end: datetime) -> list[Prescription]:
        """Prescriptions with issued_at in [start, end), any post-issue status."""
        with self._lock:
            rows = self._conn.execute(
                "SELECT * FROM prescriptions WHERE issued_at IS NOT NULL"
            ).fetchall()
        out = []
        for row in rows:
            issued_at = datetime.fromisoformat(row["issued_at"])
            if start <= issued_at < end:
                out.append(_prescription_from_row(row))
        return out

    # -- fixtures -----------------------------------------------------------

    def load_fixtures(self, document: dict, now: datetime) -> dict[str, int]:
        """Seed users and patients from a fixtures document.

        Shape: {"users": [{username, password, role}], "patients": [{...}]}
        with patient fields as in register_patient. Unknown keys are
        rejected, same as the formulary loader.
        """
        if not isinstance(document, dict):
            raise ValidationFailed("fixtures", "top level must be an object")
        unknown = set(document) - {"users", "patients"}
        if unknown:
            raise ValidationFailed("fixtures", f"unknown section '{sorted(unknown)[0]}'")
        counts = {"users": 0, "patients": 0}
        for index, entry in enumerate(document.get("users", []), start=1):
            unknown = set(entry) - {"username", "password", "role"}
            if unknown:
                raise ValidationFailed(f"users[{index}]", f"unknown field '{sorted(unknown)[0]}'")
            try:
                self.create_user(entry["username"], entry["password"], entry["role"])
            except KeyError as exc:
                raise ValidationFailed(f"users[{index}]", f"missing field {exc}") from None
            counts["users"] += 1
        patient_fields = {
            "full_name", "date_of_birth", "weight_kg", "sex",
            "allergens", "family_history_notes", "guardian_contact",
        }
        for index, entry in enumerate(document.get("patients", []), start=1):
            unknown = set(entry) - patient_fields
            if unknown:
                raise ValidationFailed(f"patients[{index}]", f"unknown field '{sorted(unknown)[0]}'")
            try:
                self.register_patient(
                    full_name=entry["full_name"],
                    date_of_birth=date.fromisoformat(entry["date_of_birth"]),
                    weight_kg=entry["weight_kg"],
                    sex=entry["sex"],
                    allergens=entry.get("allergens", ()),
                    family_history_notes=entry.get("family_history_notes", ""),
                    guardian_contact=entry.get("guardian_contact", ""),
                    now=now,
                )
            except KeyError as exc:
                raise ValidationFailed(f"patients[{index}]", f"missing field {exc}") from None
            counts["patients"] += 1
        return counts


def _items_to_json(items: tuple[PrescriptionItem, ...]) -> list[dict]:
    return [
        {
            "drug_id": item.drug_id,
            "adult_reference_dose": {
                "amount": item.adult_reference_dose.amount,
                "unit": item.adult_reference_dose.unit,
                "frequency": item.adult_reference_dose.frequency,
            },
            "computed_child_dose": {
                "amount": item.computed_child_dose.amount,
                "unit": item.computed_child_dose.unit,
                "flags": [flag.value for flag in item.computed_child_dose.flags],
            },
            "frequency": item.frequency,
            "duration_days": item.duration_days,
            "route": item.route,
            "notes": item.notes,
        }
        for item in items
    ]


def _items_from_json(payload: list[dict]) -> tuple[PrescriptionItem, ...]:
    return tuple(
        PrescriptionItem(
            drug_id=entry["drug_id"],
            adult_reference_dose=AdultDose(
                amount=entry["adult_reference_dose"]["amount"],
                unit=entry["adult_reference_dose"]["unit"],
                frequency=entry["adult_reference_dose"]["frequency"],
            ),
            computed_child_dose=ChildDose(
                amount=entry["computed_child_dose"]["amount"],
                unit=entry["computed_child_dose"]["unit"],
                flags=tuple(DoseFlag(v) for v in entry["computed_child_dose"]["flags"]),
            ),
            frequency=entry["frequency"],
            duration_days=entry["duration_days"],
            route=entry["route"],
            notes=entry["notes"],
        )
        for entry in payload
    )


def _prescription_from_row(row: sqlite3.Row) -> Prescription:
    return Prescription(
        internal_id=row["internal_id"],
        code=row["code"],
        patient_id=row["patient_id"],
        prescriber_id=row["prescriber_id"],
        diagnosis=row["diagnosis"],
        status=PrescriptionStatus(row["status"]),
        issued_at=datetime.fromisoformat(row["issued_at"]) if row["issued_at"] else None,
        dispensed_at=datetime.fromisoformat(row["dispensed_at"]) if row["dispensed_at"] else None,
        dispensing_pharmacist_id=row["dispensing_pharmacist_id"],
        items=_items_from_json(json.loads(row["items"])),
    )
