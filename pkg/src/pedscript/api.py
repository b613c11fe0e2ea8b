"""HTTP surface: pediatrician, pharmacist, admin, and ministry endpoints.

Request handlers are stateless; all state lives in the records store and
the immutable formulary. Sessions travel in the Authorization header as
``Bearer <token>``. Errors are structured bodies
``{error_code, message, field?}`` so the workstation UI can render them
distinctly.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass, replace
from datetime import date, datetime, timezone
from typing import Callable

from fastapi import Depends, FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from . import dosing, lifecycle, store as store_mod
from .codes import generate_code
from .dosing import ChildDose, DoseFlag, check_dose_cap, clarks_dose, kg_to_lb
from .formulary import (
    AllergyConflict,
    DrugMonograph,
    Formulary,
    UnknownDrug,
    allergy_conflicts,
    find_by_indication,
    get_monograph,
)
from .lifecycle import Prescription, PrescriptionItem, PrescriptionStatus
from .printing import render_printable
from .store import Patient, RecordsStore, Role, Session


class ApiError(Exception):
    """Errors raised by the orchestration layer itself."""

    def __init__(self, message: str):
        super().__init__(message)


class AllergyOverrideRequired(ApiError):
    """Conflicting items need a non-empty override reason before issuing."""

    def __init__(self, conflicts: list[AllergyConflict]):
        drugs = ", ".join(sorted({c.drug_id for c in conflicts}))
        super().__init__(f"allergy conflicts require an override reason for: {drugs}")
        self.conflicts = conflicts


class InvalidPeriod(ApiError):
    """Report period must satisfy from < to."""


class InvalidSession(ApiError):
    """Missing, unknown, or expired session token."""


class Forbidden(ApiError):
    """The session's role is not allowed on this endpoint."""


class NotPrintable(ApiError):
    """Only issued prescriptions have a printable fallback document."""


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


# -- request bodies ---------------------------------------------------------


class LoginRequest(BaseModel):
    username: str
    password: str


class PatientCreate(BaseModel):
    full_name: str
    date_of_birth: date
    weight_kg: float
    sex: str
    allergens: list[str] = Field(default_factory=list)
    family_history_notes: str = ""
    guardian_contact: str = ""


class SuggestionRequest(BaseModel):
    patient_id: str
    diagnosis: str


class PrescriptionItemCreate(BaseModel):
    drug_id: str
    duration_days: int
    frequency: str | None = None
    route: str | None = None
    notes: str = ""


class PrescriptionCreate(BaseModel):
    patient_id: str
    diagnosis: str
    items: list[PrescriptionItemCreate]
    override_reasons: dict[str, str] = Field(default_factory=dict)


class UserCreate(BaseModel):
    username: str
    password: str
    role: Role


class AdrCreate(BaseModel):
    drug_id: str
    note: str


# -- suggestion orchestration -------------------------------------------------


@dataclass(frozen=True)
class SuggestionEntry:
    """One prescribable drug with its computed dose and safety annotations."""

    monograph: DrugMonograph
    proposed_child_dose: ChildDose
    conflicts: tuple[AllergyConflict, ...]
    flags: tuple[DoseFlag, ...]


def build_suggestions(formulary: Formulary, patient: Patient, diagnosis: str) -> list[SuggestionEntry]:
    """Formulary matches for a diagnosis, dosed for this patient.

    Every entry's dose is Clark's rule over the patient's weight; allergy
    conflicts and cap flags annotate but never filter the list, because
    the prescribing decision stays with the pediatrician.
    """
    weight = kg_to_lb(patient.weight_kg)
    entries = []
    for monograph in find_by_indication(formulary, diagnosis):
        dose = clarks_dose(weight, monograph.adult_dose)
        flags = tuple(check_dose_cap(dose, monograph.max_child_dose))
        entries.append(
            SuggestionEntry(
                monograph=monograph,
                proposed_child_dose=replace(dose, flags=flags),
                conflicts=tuple(allergy_conflicts(monograph, patient.allergens)),
                flags=flags,
            )
        )
    return entries


# -- serialization -----------------------------------------------------------


def _dose_dict(dose: ChildDose) -> dict:
    return {
        "amount": dose.amount,
        "unit": dose.unit,
        "display": f"{dose.amount} {dose.unit}",
        "flags": [flag.value for flag in dose.flags],
    }


def _monograph_dict(m: DrugMonograph) -> dict:
    return {
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
        "max_child_dose": m.max_child_dose,
        "contraindication_notes": m.contraindication_notes,
    }


def _conflict_dict(c: AllergyConflict) -> dict:
    return {
        "drug_id": c.drug_id,
        "matched_ingredient": c.matched_ingredient,
        "patient_allergen": c.patient_allergen,
    }


def _patient_dict(p: Patient) -> dict:
    return {
        "patient_id": p.patient_id,
        "full_name": p.full_name,
        "date_of_birth": p.date_of_birth.isoformat(),
        "weight_kg": p.weight_kg,
        "sex": p.sex,
        "allergens": list(p.allergens),
        "adr_history": [
            {"drug_id": e.drug_id, "note": e.note, "recorded_at": e.recorded_at.isoformat()}
            for e in p.adr_history
        ],
        "family_history_notes": p.family_history_notes,
        "guardian_contact": p.guardian_contact,
    }


def _prescription_dict(p: Prescription) -> dict:
    return {
        "internal_id": p.internal_id,
        "code": p.code,
        "patient_id": p.patient_id,
        "prescriber_id": p.prescriber_id,
        "diagnosis": p.diagnosis,
        "status": p.status.value,
        "issued_at": p.issued_at.isoformat() if p.issued_at else None,
        "dispensed_at": p.dispensed_at.isoformat() if p.dispensed_at else None,
        "dispensing_pharmacist_id": p.dispensing_pharmacist_id,
        "items": [
            {
                "drug_id": item.drug_id,
                "adult_reference_dose": {
                    "amount": item.adult_reference_dose.amount,
                    "unit": item.adult_reference_dose.unit,
                    "frequency": item.adult_reference_dose.frequency,
                },
                "computed_child_dose": _dose_dict(item.computed_child_dose),
                "frequency": item.frequency,
                "duration_days": item.duration_days,
                "route": item.route,
                "notes": item.notes,
            }
            for item in p.items
        ],
    }


# -- error mapping -------------------------------------------------------------

_ERROR_MAP: list[tuple[type[Exception], int, str]] = [
    (store_mod.InvalidCredentials, 401, "INVALID_CREDENTIALS"),
    (InvalidSession, 401, "INVALID_SESSION"),
    (Forbidden, 403, "FORBIDDEN"),
    (store_mod.ValidationFailed, 400, "VALIDATION_FAILED"),
    (dosing.NotPediatric, 400, "NOT_PEDIATRIC"),
    (dosing.DosingError, 400, "VALIDATION_FAILED"),
    (store_mod.UnknownPatient, 404, "UNKNOWN_PATIENT"),
    (store_mod.UnknownUser, 404, "UNKNOWN_USER"),
    (store_mod.UnknownPrescription, 404, "UNKNOWN_PRESCRIPTION"),
    (UnknownDrug, 404, "UNKNOWN_DRUG"),
    (store_mod.MalformedCode, 400, "MALFORMED_CODE"),
    (lifecycle.EmptyPrescription, 400, "EMPTY_PRESCRIPTION"),
    (AllergyOverrideRequired, 400, "ALLERGY_OVERRIDE_REQUIRED"),
    (InvalidPeriod, 400, "INVALID_PERIOD"),
    (lifecycle.AlreadyDispensed, 409, "ALREADY_DISPENSED"),
    (lifecycle.ExpiredPrescription, 409, "EXPIRED_PRESCRIPTION"),
    (NotPrintable, 409, "NOT_PRINTABLE"),
    (lifecycle.NotIssued, 409, "NOT_ISSUED"),
    (lifecycle.IllegalTransition, 409, "ILLEGAL_TRANSITION"),
]


def _error_response(exc: Exception) -> JSONResponse:
    for exc_type, status, code in _ERROR_MAP:
        if isinstance(exc, exc_type):
            body = {"error_code": code, "message": str(exc)}
            if isinstance(exc, store_mod.ValidationFailed):
                body["field"] = exc.field
            if isinstance(exc, AllergyOverrideRequired):
                body["conflicts"] = [_conflict_dict(c) for c in exc.conflicts]
            return JSONResponse(status_code=status, content=body)
    return JSONResponse(
        status_code=500,
        content={"error_code": "INTERNAL", "message": f"{type(exc).__name__}: {exc}"},
    )


# -- application ----------------------------------------------------------------


def create_app(
    store: RecordsStore,
    formulary: Formulary,
    clock: Callable[[], datetime] = utcnow,
) -> FastAPI:
    """Assemble the service around a records store and a loaded formulary."""
    app = FastAPI(title="pedscript", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def current_session(request: Request) -> Session:
        header = request.headers.get("authorization", "")
        if not header.startswith("Bearer "):
            raise InvalidSession("missing bearer session token")
        session = store.session_for_token(header[len("Bearer "):].strip(), clock())
        if session is None:
            raise InvalidSession("session is unknown or expired")
        return session

    def require_role(*roles: Role) -> Callable[[Request], Session]:
        def dependency(request: Request) -> Session:
            session = current_session(request)
            if session.role not in roles:
                raise Forbidden(
                    f"role '{session.role.value}' may not call this endpoint"
                )
            return session

        return dependency

    # specific bases, not Exception: these run in the routing middleware and
    # return the response instead of re-raising into the server
    for exc_base in (
        store_mod.StoreError,
        lifecycle.LifecycleError,
        dosing.DosingError,
        UnknownDrug,
        ApiError,
    ):

        @app.exception_handler(exc_base)
        async def domain_error_handler(request: Request, exc: Exception):
            return _error_response(exc)

    @app.exception_handler(RequestValidationError)
    async def validation_error_handler(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        field = ".".join(str(part) for part in first.get("loc", []) if part != "body")
        return JSONResponse(
            status_code=422,
            content={
                "error_code": "VALIDATION_FAILED",
                "message": first.get("msg", "invalid request body"),
                "field": field or None,
            },
        )

    @app.post("/login")
    def login(body: LoginRequest):
        session = store.authenticate(body.username, body.password, clock())
        return {
            "token": session.token,
            "role": session.role.value,
            "expires_at": session.expires_at.isoformat(),
        }

    @app.get("/patients")
    def list_patients(
        query: str | None = None,
        session: Session = Depends(require_role(Role.PEDIATRICIAN, Role.ADMIN)),
    ):
        return [_patient_dict(p) for p in store.list_patients(query)]

    @app.post("/patients", status_code=201)
    def create_patient(
        body: PatientCreate,
        session: Session = Depends(require_role(Role.PEDIATRICIAN, Role.ADMIN)),
    ):
        patient = store.register_patient(
            full_name=body.full_name,
            date_of_birth=body.date_of_birth,
            weight_kg=body.weight_kg,
            sex=body.sex,
            allergens=body.allergens,
            family_history_notes=body.family_history_notes,
            guardian_contact=body.guardian_contact,
            now=clock(),
        )
        return _patient_dict(patient)

    @app.post("/patients/{patient_id}/adr", status_code=201)
    def add_adr(
        patient_id: str,
        body: AdrCreate,
        session: Session = Depends(require_role(Role.PEDIATRICIAN)),
    ):
        return _patient_dict(store.record_adr(patient_id, body.drug_id, body.note, clock()))

    @app.post("/suggestions")
    def suggestions(
        body: SuggestionRequest,
        session: Session = Depends(require_role(Role.PEDIATRICIAN)),
    ):
        patient = store.get_patient(body.patient_id)
        return [
            {
                "monograph": _monograph_dict(entry.monograph),
                "proposed_child_dose": _dose_dict(entry.proposed_child_dose),
                "conflicts": [_conflict_dict(c) for c in entry.conflicts],
                "flags": [flag.value for flag in entry.flags],
            }
            for entry in build_suggestions(formulary, patient, body.diagnosis)
        ]

    @app.post("/prescriptions", status_code=201)
    def create_prescription(
        body: PrescriptionCreate,
        session: Session = Depends(require_role(Role.PEDIATRICIAN)),
    ):
        patient = store.get_patient(body.patient_id)
        if not body.items:
            raise lifecycle.EmptyPrescription("a prescription needs at least one item")
        weight = kg_to_lb(patient.weight_kg)
        items: list[PrescriptionItem] = []
        unresolved: list[AllergyConflict] = []
        for entry in body.items:
            monograph = get_monograph(formulary, entry.drug_id)
            dose = clarks_dose(weight, monograph.adult_dose)
            flags = tuple(check_dose_cap(dose, monograph.max_child_dose))
            conflicts = allergy_conflicts(monograph, patient.allergens)
            notes = entry.notes
            if conflicts:
                reason = body.override_reasons.get(entry.drug_id, "").strip()
                if not reason:
                    unresolved.extend(conflicts)
                    continue
                suffix = f"allergy override: {reason}"
                notes = f"{notes}; {suffix}" if notes else suffix
            items.append(
                PrescriptionItem(
                    drug_id=entry.drug_id,
                    adult_reference_dose=monograph.adult_dose,
                    computed_child_dose=replace(dose, flags=flags),
                    frequency=entry.frequency or monograph.adult_dose.frequency,
                    duration_days=entry.duration_days,
                    route=entry.route or monograph.route,
                    notes=notes,
                )
            )
        if unresolved:
            raise AllergyOverrideRequired(unresolved)
        draft = lifecycle.make_draft(
            patient_id=patient.patient_id,
            prescriber_id=session.user_id,
            diagnosis=body.diagnosis.strip().lower(),
            items=items,
        )
        issued = None
        for _ in range(3):  # code collisions are ~2^-50; retry regardless
            try:
                issued = lifecycle.issue(draft, generate_code(), clock())
                store.store_prescription(issued)
                break
            except store_mod.DuplicateCode:
                draft = replace(draft, internal_id=uuid.uuid4().hex)
                issued = None
        if issued is None:
            raise store_mod.StoreError("could not allocate a unique prescription code")
        return {"code": issued.code, "prescription": _prescription_dict(issued)}

    @app.get("/prescriptions/{code}")
    def view_prescription(
        code: str,
        session: Session = Depends(require_role(Role.PHARMACIST)),
    ):
        prescription = store.fetch_prescription_by_code(code)
        patient = store.get_patient(prescription.patient_id)
        now = clock()
        return {
            "prescription": _prescription_dict(prescription),
            "patient_name": patient.full_name,
            "valid_now": lifecycle.is_valid_at(prescription, now),
            "checked_at": now.isoformat(),
        }

    @app.post("/prescriptions/{code}/dispense")
    def dispense_prescription(
        code: str,
        session: Session = Depends(require_role(Role.PHARMACIST)),
    ):
        prescription = store.fetch_prescription_by_code(code)
        updated = store.dispense_prescription(prescription.internal_id, session.user_id, clock())
        return {"prescription": _prescription_dict(updated)}

    @app.get("/prescriptions/{internal_id}/print", response_class=PlainTextResponse)
    def print_prescription(
        internal_id: str,
        session: Session = Depends(require_role(Role.PEDIATRICIAN)),
    ):
        prescription = store.fetch_prescription(internal_id)
        if prescription.status is not PrescriptionStatus.ISSUED:
            raise NotPrintable(
                f"prescription is {prescription.status.value}; only issued ones print"
            )
        patient = store.get_patient(prescription.patient_id)
        names = {
            drug_id: formulary.monographs[drug_id].name
            for drug_id in (item.drug_id for item in prescription.items)
            if drug_id in formulary.monographs
        }
        lines = render_printable(prescription, patient.full_name, names)
        return PlainTextResponse("\n".join(lines) + "\n")

    @app.get("/reports/ministry")
    def ministry_report(
        from_: datetime = Query(alias="from"),
        to: datetime = Query(),
        session: Session = Depends(require_role(Role.MINISTRY)),
    ):
        if from_.tzinfo is None:
            from_ = from_.replace(tzinfo=timezone.utc)
        if to.tzinfo is None:
            to = to.replace(tzinfo=timezone.utc)
        if from_ >= to:
            raise InvalidPeriod("report period requires from < to")
        groups: dict[str, list[Prescription]] = {}
        for p in store.prescriptions_issued_between(from_, to):
            groups.setdefault(p.diagnosis, []).append(p)
        rows = [
            {
                "diagnosis": diagnosis,
                "prescription_count": len(group),
                "distinct_drug_count": len({item.drug_id for p in group for item in p.items}),
            }
            for diagnosis, group in groups.items()
        ]
        rows.sort(key=lambda row: (-row["prescription_count"], row["diagnosis"]))
        return {
            "period": {"from": from_.isoformat(), "to": to.isoformat()},
            "rows": rows,
        }

    @app.post("/users", status_code=201)
    def create_user(
        body: UserCreate,
        session: Session = Depends(require_role(Role.ADMIN)),
    ):
        user = store.create_user(body.username, body.password, body.role)
        return {"user_id": user.user_id, "username": user.username, "role": user.role.value}

    return app
