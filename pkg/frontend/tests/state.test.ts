import { readFileSync, readdirSync } from 'node:fs'
import { dirname, join } from 'node:path'
import { fileURLToPath } from 'node:url'

import { describe, expect, it } from 'vitest'

import { ApiClient, ApiError, PatientInfo, SuggestionInfo } from '../src/api.js'
import {
  RoleGuardError,
  addPrescriptionRow,
  canDispense,
  confirmDispenseFlow,
  guardScreen,
  initialState,
  loginFlow,
  lookupCodeFlow,
  openReview,
  rowsMissingOverride,
  selectPatient,
  sendPrescriptionFlow,
  setOverrideReason,
  submitDiagnosisFlow,
} from '../src/state.js'

const SRC_DIR = join(dirname(fileURLToPath(import.meta.url)), '..', 'src')
const VALID_CODE = 'VCRWD18YGFJ' // frozen from the service implementation

const PATIENT: PatientInfo = {
  patient_id: 'p-1',
  full_name: 'Adaeze Obi',
  date_of_birth: '2022-03-01',
  weight_kg: 13.6078,
  sex: 'F',
  allergens: ['penicillin'],
  adr_history: [],
  family_history_notes: '',
  guardian_contact: '',
}

const SUGGESTION: SuggestionInfo = {
  monograph: {
    drug_id: 'amox-250',
    name: 'Amoxicillin',
    ingredients: ['amoxicillin', 'penicillin'],
    indications: ['otitis-media'],
    adult_dose: { amount: 500, unit: 'mg', frequency: 'every 8 hours' },
    route: 'oral',
    max_child_dose: 500,
    contraindication_notes: '',
  },
  proposed_child_dose: { amount: 100.0, unit: 'mg', display: '100.0 mg', flags: [] },
  conflicts: [
    { drug_id: 'amox-250', matched_ingredient: 'penicillin', patient_allergen: 'penicillin' },
  ],
  flags: [],
}

class FakeApi {
  token: string | null = null
  calls: string[] = []
  role = 'pediatrician'
  lookupOutcome: 'valid' | 'dispensed' | 'expired' | 'unknown' = 'valid'

  async login(username: string, _password: string) {
    this.calls.push(`login:${username}`)
    if (username === 'bad') throw new ApiError(401, 'INVALID_CREDENTIALS', 'invalid credentials')
    this.token = 'fake-token'
    return { token: 'fake-token', role: this.role, expires_at: '' }
  }

  async listPatients() {
    this.calls.push('listPatients')
    return [PATIENT]
  }

  async suggestions(patientId: string, diagnosis: string) {
    this.calls.push(`suggestions:${patientId}:${diagnosis}`)
    return diagnosis === 'otitis-media' ? [SUGGESTION] : []
  }

  private makePrescription(status = 'issued') {
    return {
      internal_id: 'rx-1',
      code: VALID_CODE,
      patient_id: PATIENT.patient_id,
      prescriber_id: 'dr-1',
      diagnosis: 'otitis-media',
      status,
      issued_at: '2026-08-09T09:00:00+00:00',
      dispensed_at: null,
      dispensing_pharmacist_id: null,
      items: [],
    }
  }

  async createPrescription(body: { override_reasons?: Record<string, string> }) {
    this.calls.push('createPrescription')
    if (!body.override_reasons?.['amox-250']) {
      throw new ApiError(400, 'ALLERGY_OVERRIDE_REQUIRED', 'override required', null, SUGGESTION.conflicts)
    }
    return { code: VALID_CODE, prescription: this.makePrescription() }
  }

  async getPrescription(code: string) {
    this.calls.push(`getPrescription:${code}`)
    if (this.lookupOutcome === 'unknown') {
      throw new ApiError(404, 'UNKNOWN_PRESCRIPTION', 'no such prescription')
    }
    const status =
      this.lookupOutcome === 'dispensed'
        ? 'dispensed'
        : this.lookupOutcome === 'expired'
          ? 'expired'
          : 'issued'
    return {
      prescription: this.makePrescription(status),
      patient_name: PATIENT.full_name,
      valid_now: status === 'issued',
      checked_at: '',
    }
  }

  async dispense(code: string) {
    this.calls.push(`dispense:${code}`)
    return { prescription: this.makePrescription('dispensed') }
  }
}

function asClient(fake: FakeApi): ApiClient {
  return fake as unknown as ApiClient
}

describe('login flow', () => {
  it('routes the pediatrician to the patient list', async () => {
    const fake = new FakeApi()
    const state = await loginFlow(asClient(fake), initialState(), 'dr-ada', 'pw')
    expect(state.screen).toBe('patient_list')
    expect(state.patients).toHaveLength(1)
  })

  it('routes the pharmacist to code lookup', async () => {
    const fake = new FakeApi()
    fake.role = 'pharmacist'
    const state = await loginFlow(asClient(fake), initialState(), 'ph-musa', 'pw')
    expect(state.screen).toBe('pharmacist_lookup')
  })

  it('stays on login with the server error inline', async () => {
    const fake = new FakeApi()
    const state = await loginFlow(asClient(fake), initialState(), 'bad', 'pw')
    expect(state.screen).toBe('login')
    expect(state.session).toBeNull()
    expect(state.error).toContain('invalid credentials')
  })
})

describe('screen guards', () => {
  it('screens past login require a session', () => {
    expect(() => guardScreen(initialState(), 'patient_list')).toThrow(RoleGuardError)
    expect(() => guardScreen(initialState(), 'pharmacist_lookup')).toThrow(RoleGuardError)
  })

  it('pharmacist screens require the pharmacist role', () => {
    const state = { ...initialState(), session: { token: 't', role: 'pediatrician' } }
    expect(() => guardScreen(state, 'pharmacist_lookup')).toThrow(RoleGuardError)
  })

  it('pediatrician screens refuse the pharmacist role', () => {
    const state = { ...initialState(), session: { token: 't', role: 'pharmacist' } }
    expect(() => guardScreen(state, 'drug_selection')).toThrow(RoleGuardError)
  })
})

describe('prescribe flow', () => {
  async function atDrugSelection(fake: FakeApi) {
    let state = await loginFlow(asClient(fake), initialState(), 'dr-ada', 'pw')
    state = selectPatient(state, PATIENT)
    expect(state.screen).toBe('symptom_entry')
    state = await submitDiagnosisFlow(asClient(fake), state, 'otitis-media', 'ear pain, fever at night')
    expect(state.screen).toBe('drug_selection')
    return state
  }

  it('shows server doses verbatim and never recomputes them', async () => {
    const fake = new FakeApi()
    const state = await atDrugSelection(fake)
    expect(state.suggestions[0]?.proposed_child_dose.display).toBe('100.0 mg')
    const added = addPrescriptionRow(state, SUGGESTION, 7)
    expect(added.rows[0]?.doseDisplay).toBe('100.0 mg')
  })

  it('keeps symptom free text local', async () => {
    const fake = new FakeApi()
    const state = await atDrugSelection(fake)
    expect(state.symptomsNotes).toContain('ear pain')
    expect(fake.calls.join('|')).not.toContain('ear pain')
  })

  it('blocks send while a conflicting row lacks an override reason', async () => {
    const fake = new FakeApi()
    let state = await atDrugSelection(fake)
    state = addPrescriptionRow(state, SUGGESTION, 7)
    state = openReview(state)
    expect(state.screen).toBe('review')
    expect(rowsMissingOverride(state)).toHaveLength(1)
    state = await sendPrescriptionFlow(asClient(fake), state)
    expect(state.screen).toBe('review')
    expect(state.error).toContain('Amoxicillin')
    expect(fake.calls).not.toContain('createPrescription')
  })

  it('sends with a reason and lands on the code screen', async () => {
    const fake = new FakeApi()
    let state = await atDrugSelection(fake)
    state = addPrescriptionRow(state, SUGGESTION, 7)
    state = setOverrideReason(state, 'amox-250', 'negative challenge test')
    state = openReview(state)
    state = await sendPrescriptionFlow(asClient(fake), state)
    expect(state.screen).toBe('sent')
    expect(state.sentCode).toBe(VALID_CODE)
    expect(state.sentCode).toHaveLength(11)
  })
})

describe('dispense flow', () => {
  async function asPharmacist(fake: FakeApi) {
    fake.role = 'pharmacist'
    return loginFlow(asClient(fake), initialState(), 'ph-musa', 'pw')
  }

  it('flags a typo locally without any network call', async () => {
    const fake = new FakeApi()
    let state = await asPharmacist(fake)
    const mutated = VALID_CODE.slice(0, -1) + '0'
    state = await lookupCodeFlow(asClient(fake), state, mutated)
    expect(state.lookup.status).toBe('typo')
    expect(fake.calls.filter((c) => c.startsWith('getPrescription'))).toHaveLength(0)
  })

  it('normalizes grouped input before checking', async () => {
    const fake = new FakeApi()
    let state = await asPharmacist(fake)
    state = await lookupCodeFlow(asClient(fake), state, 'vcr-wd18-ygfj')
    expect(state.lookup.status).toBe('valid')
    expect(fake.calls).toContain(`getPrescription:${VALID_CODE}`)
  })

  it('renders expired, dispensed, and unknown distinctly', async () => {
    const fake = new FakeApi()
    let state = await asPharmacist(fake)
    fake.lookupOutcome = 'expired'
    state = await lookupCodeFlow(asClient(fake), state, VALID_CODE)
    expect(state.lookup.status).toBe('expired')
    expect(canDispense(state)).toBe(false)
    fake.lookupOutcome = 'dispensed'
    state = await lookupCodeFlow(asClient(fake), state, VALID_CODE)
    expect(state.lookup.status).toBe('already_dispensed')
    expect(canDispense(state)).toBe(false)
    fake.lookupOutcome = 'unknown'
    state = await lookupCodeFlow(asClient(fake), state, VALID_CODE)
    expect(state.lookup.status).toBe('unknown')
  })

  it('dispenses a valid view exactly once', async () => {
    const fake = new FakeApi()
    let state = await asPharmacist(fake)
    state = await lookupCodeFlow(asClient(fake), state, VALID_CODE)
    expect(canDispense(state)).toBe(true)
    state = await confirmDispenseFlow(asClient(fake), state)
    expect(state.screen).toBe('dispense_result')
    expect(state.dispensed).not.toBeNull()
  })
})

describe('no dose arithmetic in the client', () => {
  it("the Clark's-rule denominator appears nowhere in the source", () => {
    for (const file of readdirSync(SRC_DIR)) {
      if (!file.endsWith('.ts')) continue
      const content = readFileSync(join(SRC_DIR, file), 'utf-8')
      expect(content, `${file} must not contain dose arithmetic`).not.toMatch(/150/)
    }
  })

  it('dose displays come from the server payload only', () => {
    const content = readFileSync(join(SRC_DIR, 'state.ts'), 'utf-8')
    expect(content).not.toMatch(/amount\s*[*/]/)
    expect(content).not.toMatch(/weight_kg\s*[*/]/)
  })
})
