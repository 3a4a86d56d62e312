"""Newline-delimited canonical-JSON message framing for SNC<->SM traffic."""

from __future__ import annotations

import json
from dataclasses import dataclass

WIRE_VERSION = 1


class WireError(ValueError):
    """Malformed or unsupported wire message."""


@dataclass(frozen=True)
class WireMessage:
    kind: str
    seq: int
    time: int
    payload: dict


def encode(kind: str, seq: int, time: int, payload: dict) -> str:
    """One message as a single canonical-JSON line (no trailing newline)."""
    return json.dumps(
        {"v": WIRE_VERSION, "kind": kind, "seq": seq, "time": time, "payload": payload},
        sort_keys=True,
        separators=(",", ":"),
    )


def decode(line: str) -> WireMessage:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise WireError(f"not a JSON message: {exc}") from exc
    if obj.get("v") != WIRE_VERSION:
        raise WireError(f"unsupported wire version {obj.get('v')!r}")
    for key in ("kind", "seq", "time", "payload"):
        if key not in obj:
            raise WireError(f"missing field {key!r}")
    return WireMessage(
        kind=obj["kind"], seq=int(obj["seq"]), time=int(obj["time"]), payload=obj["payload"]
    )
