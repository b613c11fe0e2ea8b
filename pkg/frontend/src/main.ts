import { ApiClient } from './api.js'
import { Workstation } from './ui.js'

const params = new URLSearchParams(window.location.search)
const apiBase = params.get('api') ?? 'http://127.0.0.1:8000'

const root = document.getElementById('app')
if (!root) throw new Error('missing #app element')

const workstation = new Workstation(new ApiClient(apiBase), root)
workstation.render()
