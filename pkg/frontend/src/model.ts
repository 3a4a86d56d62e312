// Pure view-model functions. Everything here is plain data in, plain data
// out, so the rendering layer stays a thin DOM shim and the logic is
// testable against recorded API fixtures.

import type {
  Band,
  KiraDump,
  LedgerEvent,
  Plan,
  Snapshot,
  StateView,
} from './types.js'

export const SN_COLORS: Record<number, string> = {
  0: '#d64541', // mission critical
  1: '#e8a33d', // nomadic
  2: '#3d7be8', // sensing
}

export interface WaterfallBlock {
  snId: string
  startMhz: number
  widthMhz: number
  leftPct: number
  widthPct: number
  color: string
  pinned: boolean
}

export interface WaterfallRow {
  timeMs: number
  epoch: number
  utilization: number
  blocks: WaterfallBlock[]
}

function planToBlocks(plan: Plan, band: Band): WaterfallBlock[] {
  const span = band.hi_mhz - band.lo_mhz
  return plan.allocations
    .slice()
    .sort((a, b) => a.start_mhz - b.start_mhz)
    .map((a) => ({
      snId: a.sn_id,
      startMhz: a.start_mhz,
      widthMhz: a.width_mhz,
      leftPct: (100 * (a.start_mhz - band.lo_mhz)) / span,
      widthPct: (100 * a.width_mhz) / span,
      color: SN_COLORS[a.priority] ?? '#888',
      pinned: a.pinned,
    }))
}

/** Current band occupancy, for the top strip of the waterfall. */
export function currentLayout(state: StateView): WaterfallBlock[] {
  return planToBlocks(state.snapshot.plan, state.band)
}

/** One waterfall row per COMMIT event, newest first. */
export function waterfallHistory(
  events: LedgerEvent[],
  band: Band,
  limit = 40,
): WaterfallRow[] {
  const rows: WaterfallRow[] = []
  for (const event of events) {
    if (event.kind !== 'COMMIT') continue
    const plan = event.payload.plan as Plan
    const span = band.hi_mhz - band.lo_mhz
    const used = plan.allocations.reduce((acc, a) => acc + a.width_mhz, 0)
    rows.push({
      timeMs: event.time,
      epoch: plan.epoch,
      utilization: used / span,
      blocks: planToBlocks(plan, band),
    })
  }
  rows.reverse()
  return rows.slice(0, limit)
}

export interface SessionRow {
  snId: string
  state: string
  block: string
  demand: string
  degraded: boolean
}

export function sessionRows(snapshot: Snapshot): SessionRow[] {
  return Object.values(snapshot.sessions)
    .sort((a, b) => a.sn_id.localeCompare(b.sn_id))
    .map((s) => ({
      snId: s.sn_id,
      state: s.state,
      block: s.current_alloc
        ? `${s.current_alloc.start_mhz}-${
            s.current_alloc.start_mhz + s.current_alloc.width_mhz
          } MHz`
        : '-',
      demand: `${s.demand.min_bw_mhz}/${s.demand.pref_bw_mhz} MHz`,
      degraded: s.state === 'DEGRADED',
    }))
}

export interface ControlsView {
  agvPhase: string
  callEnabled: boolean
  sn2Active: boolean
  sn2ToggleLabel: string
}

/** Button enablement is driven by preconditions, never by optimism. */
export function controlsView(state: StateView): ControlsView {
  const phase = state.agv_phase ?? 'UNKNOWN'
  const sn2 = state.snapshot.sessions['SN-2']
  const sn2Active =
    sn2 !== undefined && (sn2.state === 'COMMITTED' || sn2.state === 'DEGRADED')
  return {
    agvPhase: phase,
    callEnabled: phase === 'DOCKED',
    sn2Active,
    sn2ToggleLabel: sn2Active ? 'Pause sensing' : 'Resume sensing',
  }
}

export interface TopologyRow {
  name: string
  shortId: string
  neighbors: string[]
  hopsFromSm: number | null
  entries: number
  mobile: boolean
  anchor: string | null
}

/** BFS hop counts from the manager's node over the effective links. */
export function hopsFrom(kira: KiraDump, root: string): Record<string, number> {
  const adjacency = new Map<string, string[]>()
  for (const name of Object.keys(kira.nodes)) adjacency.set(name, [])
  for (const [a, b] of kira.links) {
    adjacency.get(a)?.push(b)
    adjacency.get(b)?.push(a)
  }
  const hops: Record<string, number> = { [root]: 0 }
  const queue = [root]
  while (queue.length > 0) {
    const current = queue.shift() as string
    for (const next of adjacency.get(current) ?? []) {
      if (!(next in hops)) {
        hops[next] = hops[current] + 1
        queue.push(next)
      }
    }
  }
  return hops
}

export function topologyRows(kira: KiraDump, smNode: string): TopologyRow[] {
  const hops = hopsFrom(kira, smNode)
  return Object.entries(kira.nodes)
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([name, node]) => ({
      name,
      shortId: node.id.slice(0, 8),
      neighbors: node.neighbors,
      hopsFromSm: name in hops ? hops[name] : null,
      entries: node.entries,
      mobile: name in kira.attachments,
      anchor: kira.attachments[name] ?? null,
    }))
}

export interface FeedState {
  lastSeq: number
  events: LedgerEvent[]
  needsResync: boolean
}

export function emptyFeed(): FeedState {
  return { lastSeq: 0, events: [], needsResync: false }
}

const FEED_LIMIT = 200

/**
 * Fold one pushed event into the feed. A gap in sequence numbers means we
 * missed something and must re-fetch /state; duplicates are dropped.
 */
export function applyEvent(feed: FeedState, event: LedgerEvent): FeedState {
  if (event.seq <= feed.lastSeq) return feed
  if (event.seq !== feed.lastSeq + 1) {
    return { ...feed, needsResync: true }
  }
  const events = [...feed.events, event].slice(-FEED_LIMIT)
  return { lastSeq: event.seq, events, needsResync: false }
}

export function describeEvent(event: LedgerEvent): string {
  const sn = event.payload.sn_id ?? event.payload.demand?.sn_id ?? ''
  switch (event.kind) {
    case 'REGISTER':
      return `${sn} registered`
    case 'OFFER':
      return `offer to ${sn}: ${event.payload.allocation.width_mhz} MHz @ ${event.payload.allocation.start_mhz}`
    case 'ACCEPT':
      return `${sn} accepted epoch ${event.payload.epoch}`
    case 'COMMIT':
      return `plan epoch ${event.payload.plan.epoch} committed`
    case 'REJECT':
      return `${sn} rejected: ${event.payload.reason}`
    case 'RELEASE':
      return `${sn} released its block`
    case 'INTENT':
      return event.payload.reserved
        ? `${sn} inbound, block reserved (eta ${event.payload.eta_ms} ms)`
        : `${sn} intent ignored (${event.payload.ignored})`
    case 'REALLOC_NOTICE':
      return `${sn} asked to retune for epoch ${event.payload.epoch}`
    case 'REALLOC_ACK':
      return `${sn} acknowledged epoch ${event.payload.epoch}`
    case 'DEGRADE':
      return `${sn} degraded (no ack before activation)`
    default:
      return event.kind
  }
}

export function formatTime(timeMs: number): string {
  return `${(timeMs / 1000).toFixed(1)}s`
}
