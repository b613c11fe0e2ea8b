// Typed client for the pedscript HTTP API. The UI consumes doses strictly
// as server-supplied display strings; it never computes them.

export interface LoginResult {
  token: string
  role: string
  expires_at: string
}

export interface AdultDoseInfo {
  amount: number
  unit: string
  frequency: string
}

export interface DoseInfo {
  amount: number
  unit: string
  display: string
  flags: string[]
}

export interface MonographInfo {
  drug_id: string
  name: string
  ingredients: string[]
  indications: string[]
  adult_dose: AdultDoseInfo
  route: string
  max_child_dose: number | null
  contraindication_notes: string
}

export interface ConflictInfo {
  drug_id: string
  matched_ingredient: string
  patient_allergen: string
}

export interface SuggestionInfo {
  monograph: MonographInfo
  proposed_child_dose: DoseInfo
  conflicts: ConflictInfo[]
  flags: string[]
}

export interface PatientInfo {
  patient_id: string
  full_name: string
  date_of_birth: string
  weight_kg: number
  sex: string
  allergens: string[]
  adr_history: { drug_id: string; note: string; recorded_at: string }[]
  family_history_notes: string
  guardian_contact: string
}

export interface PatientCreate {
  full_name: string
  date_of_birth: string
  weight_kg: number
  sex: string
  allergens?: string[]
  family_history_notes?: string
  guardian_contact?: string
}

export interface PrescriptionItemInfo {
  drug_id: string
  adult_reference_dose: AdultDoseInfo
  computed_child_dose: DoseInfo
  frequency: string
  duration_days: number
  route: string
  notes: string
}

export interface PrescriptionInfo {
  internal_id: string
  code: string | null
  patient_id: string
  prescriber_id: string
  diagnosis: string
  status: string
  issued_at: string | null
  dispensed_at: string | null
  dispensing_pharmacist_id: string | null
  items: PrescriptionItemInfo[]
}

export interface PrescriptionView {
  prescription: PrescriptionInfo
  patient_name: string
  valid_now: boolean
  checked_at: string
}

export interface PrescriptionCreate {
  patient_id: string
  diagnosis: string
  items: { drug_id: string; duration_days: number; frequency?: string; route?: string; notes?: string }[]
  override_reasons?: Record<string, string>
}

export interface IssueResult {
  code: string
  prescription: PrescriptionInfo
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorCode: string,
    message: string,
    readonly field?: string | null,
    readonly conflicts?: ConflictInfo[],
  ) {
    super(message)
  }
}

export class ApiClient {
  token: string | null = null

  constructor(readonly baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { 'Content-Type': 'application/json' }
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`
    const response = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    })
    const text = await response.text()
    if (!response.ok) {
      let errorCode = 'HTTP_ERROR'
      let message = text || response.statusText
      let field: string | null | undefined
      let conflicts: ConflictInfo[] | undefined
      try {
        const parsed = JSON.parse(text)
        errorCode = parsed.error_code ?? errorCode
        message = parsed.message ?? message
        field = parsed.field
        conflicts = parsed.conflicts
      } catch {
        // non-JSON error body; keep the raw text
      }
      throw new ApiError(response.status, errorCode, message, field, conflicts)
    }
    return (path.endsWith('/print') ? text : JSON.parse(text)) as T
  }

  async login(username: string, password: string): Promise<LoginResult> {
    const result = await this.request<LoginResult>('POST', '/login', { username, password })
    this.token = result.token
    return result
  }

  listPatients(query?: string): Promise<PatientInfo[]> {
    const suffix = query ? `?query=${encodeURIComponent(query)}` : ''
    return this.request('GET', `/patients${suffix}`)
  }

  createPatient(body: PatientCreate): Promise<PatientInfo> {
    return this.request('POST', '/patients', body)
  }

  suggestions(patientId: string, diagnosis: string): Promise<SuggestionInfo[]> {
    return this.request('POST', '/suggestions', { patient_id: patientId, diagnosis })
  }

  createPrescription(body: PrescriptionCreate): Promise<IssueResult> {
    return this.request('POST', '/prescriptions', body)
  }

  getPrescription(code: string): Promise<PrescriptionView> {
    return this.request('GET', `/prescriptions/${code}`)
  }

  dispense(code: string): Promise<{ prescription: PrescriptionInfo }> {
    return this.request('POST', `/prescriptions/${code}/dispense`)
  }

  printDocument(internalId: string): Promise<string> {
    return this.request('GET', `/prescriptions/${internalId}/print`)
  }
}
