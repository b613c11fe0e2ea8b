// Workstation view-state machine.
//
// Screens mirror the clinical flow: the pediatrician goes login ->
// patient list/form -> symptom entry -> drug selection -> review -> sent;
// the pharmacist goes login -> code lookup -> dispense result. Screens
// past login require a session and pharmacist screens require the
// pharmacist role. Every displayed dose is a server-supplied string,
// shown verbatim; this module performs no dose arithmetic.

import {
  ApiClient,
  ApiError,
  ConflictInfo,
  PatientCreate,
  PatientInfo,
  PrescriptionInfo,
  PrescriptionView,
  SuggestionInfo,
} from './api.js'
import { codeChecksumValid, normalizeCodeInput } from './checksum.js'

export type Screen =
  | 'login'
  | 'patient_list'
  | 'patient_form'
  | 'symptom_entry'
  | 'drug_selection'
  | 'review'
  | 'sent'
  | 'pharmacist_lookup'
  | 'dispense_result'

export interface SessionInfo {
  token: string
  role: string
}

export interface PrescriptionRow {
  drugId: string
  drugName: string
  doseDisplay: string // server-supplied; rendered byte-for-byte
  frequency: string
  route: string
  durationDays: number
  conflicts: ConflictInfo[]
  flags: string[]
  overrideReason: string
  notes: string
}

export type LookupStatus =
  | 'idle'
  | 'typo'
  | 'valid'
  | 'expired'
  | 'already_dispensed'
  | 'unknown'
  | 'malformed'
  | 'error'

export interface LookupState {
  codeInput: string
  status: LookupStatus
  message: string | null
  view: PrescriptionView | null
  dispensing: boolean // confirm button disables itself after the first click
}

export interface WorkstationState {
  screen: Screen
  session: SessionInfo | null
  error: string | null
  patients: PatientInfo[]
  selectedPatient: PatientInfo | null
  symptomsNotes: string // free text; only the diagnosis code is transmitted
  diagnosis: string
  suggestions: SuggestionInfo[]
  rows: PrescriptionRow[]
  sentCode: string | null
  sentPrescription: PrescriptionInfo | null
  printout: string | null
  lookup: LookupState
  dispensed: PrescriptionInfo | null
}

export function initialState(): WorkstationState {
  return {
    screen: 'login',
    session: null,
    error: null,
    patients: [],
    selectedPatient: null,
    symptomsNotes: '',
    diagnosis: '',
    suggestions: [],
    rows: [],
    sentCode: null,
    sentPrescription: null,
    printout: null,
    lookup: { codeInput: '', status: 'idle', message: null, view: null, dispensing: false },
    dispensed: null,
  }
}

const PEDIATRICIAN_SCREENS: ReadonlySet<Screen> = new Set([
  'patient_list',
  'patient_form',
  'symptom_entry',
  'drug_selection',
  'review',
  'sent',
])
const PHARMACIST_SCREENS: ReadonlySet<Screen> = new Set(['pharmacist_lookup', 'dispense_result'])

export class RoleGuardError extends Error {}

/** Every screen past login needs a session; clinical screens need the right role. */
export function guardScreen(state: WorkstationState, screen: Screen): void {
  if (screen === 'login') return
  if (!state.session) throw new RoleGuardError(`screen ${screen} requires a session`)
  if (PEDIATRICIAN_SCREENS.has(screen) && state.session.role !== 'pediatrician') {
    throw new RoleGuardError(`screen ${screen} requires the pediatrician role`)
  }
  if (PHARMACIST_SCREENS.has(screen) && state.session.role !== 'pharmacist') {
    throw new RoleGuardError(`screen ${screen} requires the pharmacist role`)
  }
}

function goTo(state: WorkstationState, screen: Screen): WorkstationState {
  guardScreen(state, screen)
  return { ...state, screen, error: null }
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error)
}

// -- login -------------------------------------------------------------------

/** Route by role on success; surface the server's error inline on failure. */
export async function loginFlow(
  client: ApiClient,
  state: WorkstationState,
  username: string,
  password: string,
): Promise<WorkstationState> {
  try {
    const result = await client.login(username, password)
    const session = { token: result.token, role: result.role }
    if (result.role === 'pediatrician') {
      const patients = await client.listPatients()
      return goTo({ ...state, session, patients }, 'patient_list')
    }
    if (result.role === 'pharmacist') {
      return goTo({ ...state, session }, 'pharmacist_lookup')
    }
    return { ...state, session, error: `no workstation screens for role '${result.role}'` }
  } catch (error) {
    return { ...state, screen: 'login', session: null, error: describe(error) }
  }
}

// -- pediatrician flow ----------------------------------------------------------

export async function refreshPatients(
  client: ApiClient,
  state: WorkstationState,
  query?: string,
): Promise<WorkstationState> {
  guardScreen(state, 'patient_list')
  const patients = await client.listPatients(query)
  return { ...goTo(state, 'patient_list'), patients }
}

export function openPatientForm(state: WorkstationState): WorkstationState {
  return goTo(state, 'patient_form')
}

export async function registerPatientFlow(
  client: ApiClient,
  state: WorkstationState,
  body: PatientCreate,
): Promise<WorkstationState> {
  guardScreen(state, 'patient_form')
  try {
    const patient = await client.createPatient(body)
    return { ...goTo(state, 'symptom_entry'), selectedPatient: patient }
  } catch (error) {
    return { ...state, error: describe(error) }
  }
}

export function selectPatient(state: WorkstationState, patient: PatientInfo): WorkstationState {
  return { ...goTo(state, 'symptom_entry'), selectedPatient: patient }
}

/** Symptom entry feeds the suggestion endpoint; free text stays local. */
export async function submitDiagnosisFlow(
  client: ApiClient,
  state: WorkstationState,
  diagnosis: string,
  symptomsNotes: string,
): Promise<WorkstationState> {
  guardScreen(state, 'symptom_entry')
  if (!state.selectedPatient) throw new RoleGuardError('no patient selected')
  try {
    const suggestions = await client.suggestions(state.selectedPatient.patient_id, diagnosis)
    return {
      ...goTo(state, 'drug_selection'),
      diagnosis,
      symptomsNotes,
      suggestions,
      rows: [],
    }
  } catch (error) {
    return { ...state, error: describe(error) }
  }
}

/** Append a suggested drug; the dose column is the server's display string. */
export function addPrescriptionRow(
  state: WorkstationState,
  suggestion: SuggestionInfo,
  durationDays: number,
  notes = '',
): WorkstationState {
  guardScreen(state, 'drug_selection')
  const row: PrescriptionRow = {
    drugId: suggestion.monograph.drug_id,
    drugName: suggestion.monograph.name,
    doseDisplay: suggestion.proposed_child_dose.display,
    frequency: suggestion.monograph.adult_dose.frequency,
    route: suggestion.monograph.route,
    durationDays,
    conflicts: suggestion.conflicts,
    flags: suggestion.flags,
    overrideReason: '',
    notes,
  }
  return { ...state, rows: [...state.rows, row], error: null }
}

export function setOverrideReason(
  state: WorkstationState,
  drugId: string,
  reason: string,
): WorkstationState {
  return {
    ...state,
    rows: state.rows.map((row) => (row.drugId === drugId ? { ...row, overrideReason: reason } : row)),
  }
}

export function openReview(state: WorkstationState): WorkstationState {
  guardScreen(state, 'review')
  if (state.rows.length === 0) {
    return { ...state, error: 'add at least one drug before review' }
  }
  return goTo(state, 'review')
}

/** Rows with allergy conflicts cannot be sent without an override reason. */
export function rowsMissingOverride(state: WorkstationState): PrescriptionRow[] {
  return state.rows.filter((row) => row.conflicts.length > 0 && row.overrideReason.trim() === '')
}

export async function sendPrescriptionFlow(
  client: ApiClient,
  state: WorkstationState,
): Promise<WorkstationState> {
  guardScreen(state, 'review')
  if (!state.selectedPatient) throw new RoleGuardError('no patient selected')
  const missing = rowsMissingOverride(state)
  if (missing.length > 0) {
    const names = missing.map((row) => row.drugName).join(', ')
    return { ...state, error: `override reason required for: ${names}` }
  }
  const overrideReasons: Record<string, string> = {}
  for (const row of state.rows) {
    if (row.overrideReason.trim() !== '') overrideReasons[row.drugId] = row.overrideReason
  }
  try {
    const result = await client.createPrescription({
      patient_id: state.selectedPatient.patient_id,
      diagnosis: state.diagnosis,
      items: state.rows.map((row) => ({
        drug_id: row.drugId,
        duration_days: row.durationDays,
        notes: row.notes,
      })),
      override_reasons: overrideReasons,
    })
    return {
      ...goTo(state, 'sent'),
      sentCode: result.code,
      sentPrescription: result.prescription,
    }
  } catch (error) {
    if (error instanceof ApiError && error.errorCode === 'ALLERGY_OVERRIDE_REQUIRED') {
      return { ...state, error: error.message }
    }
    return { ...state, error: describe(error) }
  }
}

export async function fetchPrintoutFlow(
  client: ApiClient,
  state: WorkstationState,
): Promise<WorkstationState> {
  guardScreen(state, 'sent')
  if (!state.sentPrescription) throw new RoleGuardError('nothing was sent yet')
  try {
    const printout = await client.printDocument(state.sentPrescription.internal_id)
    return { ...state, printout, error: null }
  } catch (error) {
    return { ...state, error: describe(error) }
  }
}

export function startNewPrescription(state: WorkstationState): WorkstationState {
  return {
    ...goTo(state, 'patient_list'),
    selectedPatient: null,
    diagnosis: '',
    symptomsNotes: '',
    suggestions: [],
    rows: [],
    sentCode: null,
    sentPrescription: null,
    printout: null,
  }
}

// -- pharmacist flow ---------------------------------------------------------------

/** Checksum locally first: a typo never costs a network round trip. */
export async function lookupCodeFlow(
  client: ApiClient,
  state: WorkstationState,
  rawCode: string,
): Promise<WorkstationState> {
  guardScreen(state, 'pharmacist_lookup')
  const code = normalizeCodeInput(rawCode)
  const base = { ...goTo(state, 'pharmacist_lookup'), dispensed: null }
  if (!codeChecksumValid(code)) {
    return {
      ...base,
      lookup: {
        codeInput: code,
        status: 'typo',
        message: 'possible typo: the code fails its check character',
        view: null,
        dispensing: false,
      },
    }
  }
  try {
    const view = await client.getPrescription(code)
    let status: LookupStatus
    if (view.prescription.status === 'dispensed') status = 'already_dispensed'
    else if (view.prescription.status === 'expired' || !view.valid_now) status = 'expired'
    else status = 'valid'
    return {
      ...base,
      lookup: { codeInput: code, status, message: null, view, dispensing: false },
    }
  } catch (error) {
    let status: LookupStatus = 'error'
    if (error instanceof ApiError) {
      if (error.errorCode === 'MALFORMED_CODE') status = 'malformed'
      else if (error.errorCode === 'UNKNOWN_PRESCRIPTION') status = 'unknown'
    }
    return {
      ...base,
      lookup: { codeInput: code, status, message: describe(error), view: null, dispensing: false },
    }
  }
}

/** Only a currently-valid view exposes the confirm button. */
export function canDispense(state: WorkstationState): boolean {
  return state.lookup.status === 'valid' && state.lookup.view !== null && !state.lookup.dispensing
}

export async function confirmDispenseFlow(
  client: ApiClient,
  state: WorkstationState,
): Promise<WorkstationState> {
  guardScreen(state, 'dispense_result')
  if (!canDispense(state) || !state.lookup.view) {
    return { ...state, error: 'nothing dispensable is on screen' }
  }
  const pending = { ...state, lookup: { ...state.lookup, dispensing: true } }
  try {
    const result = await client.dispense(pending.lookup.codeInput)
    return { ...goTo(pending, 'dispense_result'), dispensed: result.prescription }
  } catch (error) {
    let status: LookupStatus = 'error'
    if (error instanceof ApiError) {
      if (error.errorCode === 'ALREADY_DISPENSED') status = 'already_dispensed'
      else if (error.errorCode === 'EXPIRED_PRESCRIPTION') status = 'expired'
      else if (error.errorCode === 'MALFORMED_CODE') status = 'malformed'
      else if (error.errorCode === 'UNKNOWN_PRESCRIPTION') status = 'unknown'
    }
    return {
      ...goTo(pending, 'dispense_result'),
      dispensed: null,
      lookup: { ...pending.lookup, status, message: describe(error), dispensing: false },
    }
  }
}

export function backToLookup(state: WorkstationState): WorkstationState {
  return {
    ...goTo(state, 'pharmacist_lookup'),
    dispensed: null,
    lookup: { codeInput: '', status: 'idle', message: null, view: null, dispensing: false },
  }
}
