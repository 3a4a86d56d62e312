// Dashboard entry point: renders the view models into the static page and
// keeps them fresh from the event stream, resyncing via /state on gaps.

import { callAgv, fetchLedger, fetchState, subscribeEvents, toggleSn2 } from './api.js'
import {
  applyEvent,
  controlsView,
  currentLayout,
  describeEvent,
  emptyFeed,
  formatTime,
  sessionRows,
  topologyRows,
  waterfallHistory,
  type FeedState,
  type WaterfallBlock,
} from './model.js'
import type { StateView } from './types.js'

let state: StateView | null = null
let feed: FeedState = emptyFeed()

function el(id: string): HTMLElement {
  const node = document.getElementById(id)
  if (!node) throw new Error(`missing #${id}`)
  return node
}

function renderBlocks(target: HTMLElement, blocks: WaterfallBlock[]): void {
  target.innerHTML = ''
  for (const block of blocks) {
    const div = document.createElement('div')
    div.className = 'block' + (block.pinned ? ' pinned' : '')
    div.style.left = `${block.leftPct}%`
    div.style.width = `${block.widthPct}%`
    div.style.background = block.color
    div.title = `${block.snId}: ${block.startMhz}-${block.startMhz + block.widthMhz} MHz`
    div.textContent = block.snId
    target.appendChild(div)
  }
}

function render(): void {
  if (!state) return
  el('clock').textContent = formatTime(state.time_ms)
  el('utilization').textContent = `${(state.utilization * 100).toFixed(0)}%`
  el('epoch').textContent = String(state.snapshot.epoch)

  renderBlocks(el('band-now'), currentLayout(state))

  const history = el('waterfall')
  history.innerHTML = ''
  for (const row of waterfallHistory(feed.events, state.band)) {
    const line = document.createElement('div')
    line.className = 'wf-row'
    const label = document.createElement('span')
    label.className = 'wf-label'
    label.textContent = `${formatTime(row.timeMs)} e${row.epoch}`
    const strip = document.createElement('div')
    strip.className = 'strip'
    renderBlocks(strip, row.blocks)
    line.append(label, strip)
    history.appendChild(line)
  }

  const sessions = el('sessions')
  sessions.innerHTML =
    '<tr><th>SN</th><th>state</th><th>block</th><th>demand</th></tr>'
  for (const row of sessionRows(state.snapshot)) {
    const tr = document.createElement('tr')
    if (row.degraded) tr.className = 'degraded'
    tr.innerHTML = `<td>${row.snId}</td><td>${row.state}</td><td>${row.block}</td><td>${row.demand}</td>`
    sessions.appendChild(tr)
  }

  const topo = el('topology')
  topo.innerHTML =
    '<tr><th>node</th><th>id</th><th>hops</th><th>routes</th><th>links</th></tr>'
  for (const row of topologyRows(state.kira, state.sm_node)) {
    const tr = document.createElement('tr')
    const name = row.mobile ? `${row.name} → ${row.anchor}` : row.name
    tr.innerHTML =
      `<td>${name}</td><td class="mono">${row.shortId}</td>` +
      `<td>${row.hopsFromSm ?? '∞'}</td><td>${row.entries}</td>` +
      `<td>${row.neighbors.join(', ')}</td>`
    topo.appendChild(tr)
  }
  el('kira-status').textContent = state.kira.converged ? 'converged' : 'converging'

  const controls = controlsView(state)
  el('agv-phase').textContent = controls.agvPhase
  const call = el('call-agv') as HTMLButtonElement
  call.disabled = !controls.callEnabled
  const toggle = el('toggle-sn2') as HTMLButtonElement
  toggle.textContent = controls.sn2ToggleLabel
  toggle.dataset.on = controls.sn2Active ? 'false' : 'true'

  const log = el('feed')
  log.innerHTML = ''
  for (const event of feed.events.slice(-30).reverse()) {
    const line = document.createElement('div')
    line.textContent = `${formatTime(event.time)} ${event.kind} ${describeEvent(event)}`
    log.appendChild(line)
  }
}

async function resync(): Promise<void> {
  state = await fetchState()
  const events = await fetchLedger(1)
  feed = emptyFeed()
  for (const event of events) feed = applyEvent(feed, event)
  render()
}

async function main(): Promise<void> {
  await resync()
  subscribeEvents(
    async (event) => {
      feed = applyEvent(feed, event)
      state = await fetchState()
      if (feed.needsResync) await resync()
      else render()
    },
    () => {
      // the stream dropped; the next successful resync repairs everything
      setTimeout(resync, 1000)
    },
  )
  el('call-agv').addEventListener('click', () => void callAgv())
  el('toggle-sn2').addEventListener('click', (ev) => {
    const on = (ev.currentTarget as HTMLButtonElement).dataset.on === 'true'
    void toggleSn2(on)
  })
  setInterval(() => void fetchState().then((s) => ((state = s), render())), 2000)
}

main().catch((err) => {
  el('feed').textContent = `failed to reach the spectrum manager: ${err}`
})
