"""Live-service mode: the engine paced to wall clock behind an HTTP API.

The front-end accepts connections concurrently, but every action funnels
through one lock around the single engine; engine state is never touched
concurrently. Interactive controls (call button, sensing toggle) replace
their scripted scenario counterparts.

Endpoints:
  GET  /state           full state snapshot for the dashboard
  GET  /ledger?from=N   ledger events with seq >= N
  GET  /events          server-push stream (SSE) of ledger events
  POST /intent          {"sn_id": ..., "eta_ms": ...}
  POST /release         {"sn_id": ...}
  POST /call-agv        summon the AGV (409 while a mission is running)
  POST /toggle-sn2      {"on": true|false}
"""

from __future__ import annotations

import json
import mimetypes
import queue
import threading
import time
from dataclasses import replace as dc_replace
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .agents import Archetype, AgvPhase
from .engine import Engine
from .scenario import Scenario
from .sm import canonical_json

LIVE_ACTIONS = ("CALL_AGV", "TOGGLE_SN2")
TICK_MS = 20


class LiveEngine:
    """Wall-clock-paced engine wrapper; 1 sim-ms per real millisecond."""

    def __init__(self, scenario: Scenario):
        # Interactive actions come from POSTs; END would stop the service.
        scripted = [
            e for e in scenario.events if e.action not in (*LIVE_ACTIONS, "END")
        ]
        self.engine = Engine(dc_replace_scenario(scenario, scripted))
        self.lock = threading.RLock()
        self.subscribers: list[queue.Queue] = []
        self.engine.event_listeners.append(self._broadcast)
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._pace, daemon=True)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()

    def _pace(self) -> None:
        started = time.monotonic()
        while not self._stop.is_set():
            target_ms = int((time.monotonic() - started) * 1000)
            with self.lock:
                self.engine.step_until(target_ms)
            time.sleep(TICK_MS / 1000.0)

    def _broadcast(self, event) -> None:
        payload = canonical_json(event.to_json())
        for sub in list(self.subscribers):
            sub.put(payload)

    def subscribe(self) -> queue.Queue:
        sub: queue.Queue = queue.Queue()
        with self.lock:
            self.subscribers.append(sub)
        return sub

    def unsubscribe(self, sub: queue.Queue) -> None:
        with self.lock:
            if sub in self.subscribers:
                self.subscribers.remove(sub)


def dc_replace_scenario(scenario: Scenario, events) -> Scenario:
    return Scenario(
        seed=scenario.seed,
        band=scenario.band,
        guard_mhz=scenario.guard_mhz,
        sm_node=scenario.sm_node,
        topology=scenario.topology,
        agents=scenario.agents,
        events=list(events),
        per_hop_ms=scenario.per_hop_ms,
    )


def make_handler(live: LiveEngine, static_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _json(self, code: int, obj) -> None:
            body = canonical_json(obj).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            self.wfile.write(body)

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if length == 0:
                return {}
            try:
                return json.loads(self.rfile.read(length))
            except json.JSONDecodeError:
                return {}

        def do_GET(self) -> None:
            url = urlparse(self.path)
            if url.path == "/state":
                with live.lock:
                    self._json(200, live.engine.state_view())
            elif url.path == "/ledger":
                params = parse_qs(url.query)
                from_seq = int(params.get("from", ["1"])[0])
                with live.lock:
                    self._json(200, live.engine.sm.ledger_json(from_seq))
            elif url.path == "/events":
                self._stream_events()
            else:
                self._static(url.path)

        def _stream_events(self) -> None:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.end_headers()
            sub = live.subscribe()
            with live.lock:
                backlog = list(live.engine.sm.ledger_json())
            try:
                for event in backlog:
                    self.wfile.write(f"data: {canonical_json(event)}\n\n".encode())
                self.wfile.flush()
                while True:
                    try:
                        payload = sub.get(timeout=15.0)
                        self.wfile.write(f"data: {payload}\n\n".encode())
                    except queue.Empty:
                        self.wfile.write(b": keepalive\n\n")
                    self.wfile.flush()
            except (BrokenPipeError, ConnectionResetError):
                pass
            finally:
                live.unsubscribe(sub)

        def _static(self, path: str) -> None:
            if static_dir is None:
                self._json(404, {"error": "not found"})
                return
            rel = "index.html" if path == "/" else path.lstrip("/")
            target = (static_dir / rel).resolve()
            if not str(target).startswith(str(static_dir.resolve())) or not target.is_file():
                self._json(404, {"error": "not found"})
                return
            body = target.read_bytes()
            ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_POST(self) -> None:
            url = urlparse(self.path)
            body = self._read_body()
            if url.path == "/call-agv":
                with live.lock:
                    agent = live.engine._default_agent(Archetype.NOMADIC)
                    if agent is None:
                        self._json(404, {"error": "no nomadic agent"})
                        return
                    if agent.phase != AgvPhase.DOCKED:
                        self._json(409, {"error": "mission_in_progress", "phase": agent.phase.value})
                        return
                    live.engine.call_agv(agent.config.sn_id)
                self._json(202, {"status": "summoned"})
            elif url.path == "/toggle-sn2":
                on = bool(body.get("on"))
                with live.lock:
                    changed = live.engine.toggle_sensing(body.get("sn_id"), on)
                self._json(202, {"status": "toggled" if changed else "unchanged", "on": on})
            elif url.path == "/intent":
                sn_id = body.get("sn_id")
                if not sn_id:
                    self._json(400, {"error": "sn_id required"})
                    return
                with live.lock:
                    live.engine.sm.handle_intent(
                        sn_id, int(body.get("eta_ms", live.engine.now)), live.engine.now
                    )
                self._json(202, {"status": "accepted"})
            elif url.path == "/release":
                sn_id = body.get("sn_id")
                if not sn_id:
                    self._json(400, {"error": "sn_id required"})
                    return
                with live.lock:
                    live.engine.sm.handle_release(sn_id, live.engine.now)
                self._json(202, {"status": "accepted"})
            else:
                self._json(404, {"error": "not found"})

    return Handler


def default_static_dir() -> Path | None:
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None


def start_server(scenario: Scenario, host: str, port: int, static_dir: Path | None = None):
    """Bind and return (server, live engine); caller drives serve_forever."""
    live = LiveEngine(scenario)
    handler = make_handler(live, static_dir if static_dir is not None else default_static_dir())
    server = ThreadingHTTPServer((host, port), handler)
    live.start()
    return server, live


def run_server(scenario: Scenario, host: str, port: int) -> None:
    server, live = start_server(scenario, host, port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        live.stop()
        server.shutdown()
