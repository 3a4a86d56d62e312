// Payload shapes of the spectrum-management HTTP/event API.

export interface Band {
  lo_mhz: number
  hi_mhz: number
  grid_mhz: number
}

export interface Allocation {
  sn_id: string
  start_mhz: number
  width_mhz: number
  priority: number
  pinned: boolean
  epoch: number
}

export interface Plan {
  epoch: number
  allocations: Allocation[]
  rejected: string[]
}

export interface Session {
  sn_id: string
  state: 'UNREGISTERED' | 'PENDING_OFFER' | 'COMMITTED' | 'DEGRADED' | 'RELEASED'
  demand: {
    sn_id: string
    priority: number
    min_bw_mhz: number
    pref_bw_mhz: number
    registered_at: number
  }
  current_alloc: Allocation | null
  offer_deadline: number | null
}

export interface Snapshot {
  epoch: number
  plan: Plan
  sessions: Record<string, Session>
}

export interface KiraNode {
  id: string
  neighbors: string[]
  entries: number
  contacts: string[]
}

export interface KiraDump {
  converged: boolean
  nodes: Record<string, KiraNode>
  attachments: Record<string, string>
  links: string[][]
}

export interface StateView {
  time_ms: number
  band: Band
  guard_mhz: number
  snapshot: Snapshot
  utilization: number
  agv_phase: string | null
  telemetry: Record<string, Record<string, unknown>>
  kira: KiraDump
  sm_node: string
}

export interface LedgerEvent {
  seq: number
  time: number
  kind: string
  payload: Record<string, any>
}
