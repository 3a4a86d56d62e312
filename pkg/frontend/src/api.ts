// Thin client for the spectrum-management HTTP and event-stream API.

import type { LedgerEvent, StateView } from './types.js'

export async function fetchState(base = ''): Promise<StateView> {
  const resp = await fetch(`${base}/state`)
  if (!resp.ok) throw new Error(`GET /state failed: ${resp.status}`)
  return resp.json()
}

export async function fetchLedger(fromSeq = 1, base = ''): Promise<LedgerEvent[]> {
  const resp = await fetch(`${base}/ledger?from=${fromSeq}`)
  if (!resp.ok) throw new Error(`GET /ledger failed: ${resp.status}`)
  return resp.json()
}

export async function callAgv(base = ''): Promise<boolean> {
  const resp = await fetch(`${base}/call-agv`, { method: 'POST' })
  return resp.status === 202
}

export async function toggleSn2(on: boolean, base = ''): Promise<boolean> {
  const resp = await fetch(`${base}/toggle-sn2`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify({ sn_id: 'SN-2', on }),
  })
  return resp.status === 202
}

/** Subscribe to the server-push feed; returns an unsubscribe function. */
export function subscribeEvents(
  onEvent: (event: LedgerEvent) => void,
  onError: () => void,
  base = '',
): () => void {
  const source = new EventSource(`${base}/events`)
  source.onmessage = (msg) => onEvent(JSON.parse(msg.data))
  source.onerror = onError
  return () => source.close()
}
