// DOM rendering: one render function per screen, driven by the state
// machine in state.ts. No framework; the state object is the single
// source of truth and every event handler produces a new state.

import { ApiClient } from './api.js'
import { groupCode } from './checksum.js'
import {
  WorkstationState,
  addPrescriptionRow,
  backToLookup,
  canDispense,
  confirmDispenseFlow,
  fetchPrintoutFlow,
  initialState,
  loginFlow,
  lookupCodeFlow,
  openPatientForm,
  openReview,
  refreshPatients,
  registerPatientFlow,
  rowsMissingOverride,
  selectPatient,
  sendPrescriptionFlow,
  setOverrideReason,
  startNewPrescription,
  submitDiagnosisFlow,
} from './state.js'

export class Workstation {
  state: WorkstationState = initialState()

  constructor(
    readonly client: ApiClient,
    readonly root: HTMLElement,
  ) {}

  update(state: WorkstationState): void {
    this.state = state
    this.render()
  }

  render(): void {
    this.root.textContent = ''
    const panel = el('div', { class: 'panel' })
    if (this.state.error) {
      panel.append(el('p', { class: 'error', text: this.state.error }))
    }
    switch (this.state.screen) {
      case 'login':
        this.renderLogin(panel)
        break
      case 'patient_list':
        this.renderPatientList(panel)
        break
      case 'patient_form':
        this.renderPatientForm(panel)
        break
      case 'symptom_entry':
        this.renderSymptomEntry(panel)
        break
      case 'drug_selection':
        this.renderDrugSelection(panel)
        break
      case 'review':
        this.renderReview(panel)
        break
      case 'sent':
        this.renderSent(panel)
        break
      case 'pharmacist_lookup':
        this.renderLookup(panel)
        break
      case 'dispense_result':
        this.renderDispenseResult(panel)
        break
    }
    this.root.append(panel)
  }

  private renderLogin(panel: HTMLElement): void {
    panel.append(el('h2', { text: 'Sign in' }))
    const username = input('text', 'username')
    const password = input('password', 'password')
    const button = el('button', { text: 'Login' })
    button.addEventListener('click', async () => {
      this.update(await loginFlow(this.client, this.state, username.value, password.value))
    })
    panel.append(labelled('Username', username), labelled('Password', password), button)
  }

  private renderPatientList(panel: HTMLElement): void {
    panel.append(el('h2', { text: 'Select patient' }))
    const search = input('text', 'search by name')
    const searchButton = el('button', { text: 'Search' })
    searchButton.addEventListener('click', async () => {
      this.update(await refreshPatients(this.client, this.state, search.value || undefined))
    })
    const register = el('button', { text: 'Register new patient' })
    register.addEventListener('click', () => this.update(openPatientForm(this.state)))
    panel.append(search, searchButton, register)
    const list = el('ul')
    for (const patient of this.state.patients) {
      const item = el('li', {
        text: `${patient.full_name} (born ${patient.date_of_birth}, ${patient.weight_kg} kg)`,
      })
      const pick = el('button', { text: 'Prescribe' })
      pick.addEventListener('click', () => this.update(selectPatient(this.state, patient)))
      item.append(' ', pick)
      list.append(item)
    }
    panel.append(list)
  }

  private renderPatientForm(panel: HTMLElement): void {
    panel.append(el('h2', { text: 'Register patient' }))
    const name = input('text', 'full name')
    const dob = input('date', 'date of birth')
    const weight = input('number', 'weight (kg)')
    const sex = input('text', 'sex')
    const allergies = input('text', 'allergies, comma-separated')
    const guardian = input('text', 'guardian contact')
    const save = el('button', { text: 'Register and continue' })
    save.addEventListener('click', async () => {
      this.update(
        await registerPatientFlow(this.client, this.state, {
          full_name: name.value,
          date_of_birth: dob.value,
          weight_kg: Number(weight.value),
          sex: sex.value,
          allergens: allergies.value
            .split(',')
            .map((a) => a.trim())
            .filter(Boolean),
          guardian_contact: guardian.value,
        }),
      )
    })
    panel.append(
      labelled('Full name', name),
      labelled('Date of birth', dob),
      labelled('Weight (kg)', weight),
      labelled('Sex', sex),
      labelled('Allergies', allergies),
      labelled('Guardian contact', guardian),
      save,
    )
  }

  private renderSymptomEntry(panel: HTMLElement): void {
    const patient = this.state.selectedPatient
    panel.append(el('h2', { text: `Symptoms: ${patient?.full_name ?? ''}` }))
    if (patient && patient.allergens.length > 0) {
      panel.append(el('p', { class: 'warning', text: `Allergies: ${patient.allergens.join(', ')}` }))
    }
    const notes = el('textarea') as HTMLTextAreaElement
    notes.placeholder = 'symptom notes (kept on this workstation)'
    const diagnosis = input('text', 'diagnosis code, e.g. otitis-media')
    const suggest = el('button', { text: 'Suggest drugs' })
    suggest.addEventListener('click', async () => {
      this.update(
        await submitDiagnosisFlow(this.client, this.state, diagnosis.value, notes.value),
      )
    })
    panel.append(labelled('Notes', notes), labelled('Diagnosis', diagnosis), suggest)
  }

  private renderDrugSelection(panel: HTMLElement): void {
    panel.append(el('h2', { text: `Drug selection for ${this.state.diagnosis}` }))
    const table = el('table')
    for (const suggestion of this.state.suggestions) {
      const row = el('tr')
      row.append(
        el('td', { text: suggestion.monograph.name }),
        // the dose cell is the server's display string, byte for byte
        el('td', { class: 'dose', text: suggestion.proposed_child_dose.display }),
        el('td', { text: suggestion.monograph.adult_dose.frequency }),
        el('td', {
          class: 'warning',
          text: suggestion.conflicts
            .map((c) => `allergy conflict: ${c.matched_ingredient}`)
            .concat(suggestion.flags)
            .join('; '),
        }),
      )
      const days = input('number', 'days')
      days.value = '5'
      const add = el('button', { text: 'Add prescription' })
      add.addEventListener('click', () => {
        this.update(addPrescriptionRow(this.state, suggestion, Number(days.value)))
      })
      const actions = el('td')
      actions.append(days, add)
      row.append(actions)
      table.append(row)
    }
    panel.append(table)
    panel.append(el('h3', { text: `Selected (${this.state.rows.length})` }))
    const selected = el('ul')
    for (const row of this.state.rows) {
      const item = el('li', {
        text: `${row.drugName}: ${row.doseDisplay}, ${row.frequency}, ${row.durationDays} days`,
      })
      if (row.conflicts.length > 0) {
        const reason = input('text', 'override reason (required)')
        reason.value = row.overrideReason
        reason.addEventListener('change', () => {
          this.update(setOverrideReason(this.state, row.drugId, reason.value))
        })
        item.append(' ', reason)
      }
      selected.append(item)
    }
    panel.append(selected)
    const review = el('button', { text: 'Review' })
    review.addEventListener('click', () => this.update(openReview(this.state)))
    panel.append(review)
  }

  private renderReview(panel: HTMLElement): void {
    panel.append(el('h2', { text: 'Review prescription' }))
    panel.append(
      el('p', { text: `Patient: ${this.state.selectedPatient?.full_name ?? ''}` }),
      el('p', { text: `Diagnosis: ${this.state.diagnosis}` }),
    )
    const list = el('ul')
    for (const row of this.state.rows) {
      list.append(
        el('li', {
          text:
            `${row.drugName}: ${row.doseDisplay}, ${row.frequency}, ` +
            `${row.durationDays} days, ${row.route}` +
            (row.overrideReason ? ` (override: ${row.overrideReason})` : ''),
        }),
      )
    }
    panel.append(list)
    const missing = rowsMissingOverride(this.state)
    if (missing.length > 0) {
      panel.append(
        el('p', {
          class: 'error',
          text: `override reason required for: ${missing.map((r) => r.drugName).join(', ')}`,
        }),
      )
    }
    const send = el('button', { text: 'Send to pharmacy' })
    send.addEventListener('click', async () => {
      this.update(await sendPrescriptionFlow(this.client, this.state))
    })
    panel.append(send)
  }

  private renderSent(panel: HTMLElement): void {
    panel.append(el('h2', { text: 'Prescription sent' }))
    if (this.state.sentCode) {
      panel.append(el('p', { class: 'rx-code', text: groupCode(this.state.sentCode) }))
      panel.append(el('p', { text: 'Read this code to the patient; the pharmacy needs it for pickup.' }))
    }
    const print = el('button', { text: 'Print fallback copy' })
    print.addEventListener('click', async () => {
      this.update(await fetchPrintoutFlow(this.client, this.state))
    })
    panel.append(print)
    if (this.state.printout) {
      panel.append(el('pre', { text: this.state.printout }))
    }
    const again = el('button', { text: 'New prescription' })
    again.addEventListener('click', () => this.update(startNewPrescription(this.state)))
    panel.append(again)
  }

  private renderLookup(panel: HTMLElement): void {
    panel.append(el('h2', { text: 'Validate prescription code' }))
    const code = input('text', 'e.g. 0V3-PQ8K-M2ZA')
    code.value = this.state.lookup.codeInput
    const check = el('button', { text: 'Check' })
    check.addEventListener('click', async () => {
      this.update(await lookupCodeFlow(this.client, this.state, code.value))
    })
    panel.append(code, check)
    const lookup = this.state.lookup
    if (lookup.status === 'typo') {
      panel.append(el('p', { class: 'warning', text: lookup.message ?? 'possible typo' }))
    } else if (lookup.status === 'malformed' || lookup.status === 'unknown' || lookup.status === 'error') {
      panel.append(el('p', { class: 'error', text: lookup.message ?? lookup.status }))
    } else if (lookup.view) {
      const view = lookup.view
      panel.append(
        el('p', { text: `Patient: ${view.patient_name}` }),
        el('p', { text: `Status: ${view.prescription.status}` }),
      )
      const items = el('ul')
      for (const item of view.prescription.items) {
        items.append(
          el('li', {
            text: `${item.drug_id}: ${item.computed_child_dose.display}, ${item.frequency}, ${item.duration_days} days`,
          }),
        )
      }
      panel.append(items)
      if (lookup.status === 'valid' && canDispense(this.state)) {
        const confirm = el('button', { text: 'Confirm dispense' }) as HTMLButtonElement
        confirm.addEventListener('click', async () => {
          confirm.disabled = true
          this.update(await confirmDispenseFlow(this.client, this.state))
        })
        panel.append(confirm)
      } else if (lookup.status === 'expired') {
        panel.append(el('p', { class: 'error', text: 'This prescription has expired.' }))
      } else if (lookup.status === 'already_dispensed') {
        panel.append(el('p', { class: 'error', text: 'This prescription was already dispensed.' }))
      }
    }
  }

  private renderDispenseResult(panel: HTMLElement): void {
    panel.append(el('h2', { text: 'Dispense result' }))
    if (this.state.dispensed) {
      panel.append(el('p', { class: 'success', text: 'Dispensed and recorded.' }))
    } else {
      panel.append(el('p', { class: 'error', text: this.state.lookup.message ?? 'not dispensed' }))
    }
    const next = el('button', { text: 'Validate another code' })
    next.addEventListener('click', () => this.update(backToLookup(this.state)))
    panel.append(next)
  }
}

function el(
  tag: string,
  options: { class?: string; text?: string } = {},
): HTMLElement {
  const node = document.createElement(tag)
  if (options.class) node.className = options.class
  if (options.text !== undefined) node.textContent = options.text
  return node
}

function input(type: string, placeholder: string): HTMLInputElement {
  const node = document.createElement('input')
  node.type = type
  node.placeholder = placeholder
  return node
}

function labelled(text: string, field: HTMLElement): HTMLElement {
  const wrapper = el('div', { class: 'field' })
  const label = el('label', { text })
  wrapper.append(label, field)
  return wrapper
}
