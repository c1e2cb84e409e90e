"""Network-wide key establishment and operator state keeping.

Wired pairs were authenticated against each other before deployment, so
their key exchange runs directly over the simulated wire protocol; every
other pair gets an abstract wireless exchange record (the wireless
handshake is conditionally-secure commodity and contributes nothing to
the trust math beyond its classification).  The resulting state tracks
one record per unordered sensor pair, the operator kill switch, and a
logical clock so repeated runs with the same master seed serialize to
identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

from .kljn import BudgetExhaustedError, KljnSessionConfig, run_key_exchange
from .topology import SensorId, Topology, UnknownSensorError, parse_topology, serialize_topology
from .trust import (
    KillEvent,
    KillSwitchState,
    TrustCoefficients,
    rank_peers,
    trust_matrix,
)

CHANNEL_KLJN = "kljn"
CHANNEL_WIRELESS = "wireless"

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_REVOKED = "revoked"


@dataclass
class KeyRecord:
    pair: tuple[SensorId, SensorId]  # canonical: pair[0] < pair[1]
    channel: str
    key_id: str
    established_at: int
    status: str
    key_bits: str | None = None  # in-memory only, never serialized


@dataclass
class NetworkKeyState:
    topology: Topology
    records: dict[tuple[SensorId, SensorId], KeyRecord]
    kill: KillSwitchState
    clock: int

    def record_for(self, a: SensorId, b: SensorId) -> KeyRecord:
        key = (a, b) if a < b else (b, a)
        return self.records[key]

    def records_sorted(self) -> list[KeyRecord]:
        return [self.records[k] for k in sorted(self.records)]


def _derive_seed(master_seed: int, *parts: str) -> int:
    material = json.dumps([master_seed, *parts]).encode()
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


def _fingerprint(material: str) -> str:
    return hashlib.sha256(material.encode()).hexdigest()[:16]


def establish_network_keys(
    t: Topology,
    cfg: KljnSessionConfig,
    master_seed: int,
    target_bits: int = 128,
    attackers: dict[tuple[SensorId, SensorId], object] | None = None,
) -> NetworkKeyState:
    """Establish a key record for every unordered sensor pair.

    Wired edges each run a full simulated key-exchange session seeded from
    ``hash(master_seed, edge)``; a session that ends in attack detection or
    budget exhaustion marks just that record failed.  Wireless pairs get an
    opaque deterministic key token.  ``attackers`` maps canonical edges to
    attacker models, for exercising fault isolation.
    """
    attackers = attackers or {}
    state = NetworkKeyState(topology=t, records={}, kill=KillSwitchState(), clock=0)

    ordered = sorted(t.sensors)
    pairs = [(a, b) for idx, a in enumerate(ordered) for b in ordered[idx + 1 :]]
    for a, b in pairs:
        state.clock += 1
        if (a, b) in t.kljn_edges:
            session_cfg = replace(cfg, seed=_derive_seed(master_seed, a, b))
            try:
                result = run_key_exchange(
                    session_cfg, target_bits, attacker=attackers.get((a, b))
                )
            except BudgetExhaustedError:
                result = None
            if result is None or result.attack_detected:
                record = KeyRecord((a, b), CHANNEL_KLJN, "", state.clock, STATUS_FAILED)
            else:
                record = KeyRecord(
                    (a, b),
                    CHANNEL_KLJN,
                    _fingerprint(f"kljn|{result.key_bits}"),
                    state.clock,
                    STATUS_OK,
                    key_bits=result.key_bits,
                )
        else:
            token = _fingerprint(json.dumps([master_seed, a, b, CHANNEL_WIRELESS]))
            record = KeyRecord((a, b), CHANNEL_WIRELESS, token, state.clock, STATUS_OK)
        state.records[(a, b)] = record
    return state


def apply_kill_event(state: NetworkKeyState, sensor: SensorId, note: str = "") -> NetworkKeyState:
    """Mark a sensor compromised: flag it, revoke its records, log the event.

    Idempotent on the records and the killed set; every call appends one
    log entry.  Mutates and returns ``state`` (single-writer contract).
    """
    if not state.topology.has_sensor(sensor):
        raise UnknownSensorError(f"unknown sensor {sensor!r}")
    state.clock += 1
    state.kill.kill(sensor, note=note, timestamp=state.clock)
    for record in state.records.values():
        if sensor in record.pair and record.status != STATUS_REVOKED:
            record.status = STATUS_REVOKED
            record.key_bits = None
    return state


def trust_report(state: NetworkKeyState, coef: TrustCoefficients) -> dict:
    """Bundle the trust matrix, rankings, record statuses, and kill log."""
    t = state.topology
    matrix = trust_matrix(t, coef, state.kill)
    return {
        "sensors": list(t.sensors),
        "coefficients": {
            "a": coef.a,
            "b": coef.b,
            "c": coef.c,
            "provenance": coef.provenance,
        },
        "killed": sorted(state.kill.killed),
        "matrix": {
            "order": matrix.order,
            "values": [[float(v) for v in row] for row in matrix.values],
        },
        "rankings": {
            i: [[j, value] for j, value in rank_peers(t, coef, state.kill, i)]
            for i in t.sensors
        },
        "records": [
            {
                "pair": list(r.pair),
                "channel": r.channel,
                "key_id": r.key_id,
                "established_at": r.established_at,
                "status": r.status,
            }
            for r in state.records_sorted()
        ],
        "kill_log": [_event_to_dict(e) for e in state.kill.event_log],
    }


def _event_to_dict(event: KillEvent) -> dict:
    return {
        "timestamp": event.timestamp,
        "sensor": event.sensor,
        "action": event.action,
        "note": event.note,
    }


def state_to_json(state: NetworkKeyState) -> str:
    """Serialize the state deterministically (key material is not persisted)."""
    doc = {
        "topology": json.loads(serialize_topology(state.topology)),
        "clock": state.clock,
        "records": [
            {
                "pair": list(r.pair),
                "channel": r.channel,
                "key_id": r.key_id,
                "established_at": r.established_at,
                "status": r.status,
            }
            for r in state.records_sorted()
        ],
        "kill": {
            "killed": sorted(state.kill.killed),
            "events": [_event_to_dict(e) for e in state.kill.event_log],
        },
    }
    return json.dumps(doc, indent=2) + "\n"


def state_from_json(text: str) -> NetworkKeyState:
    doc = json.loads(text)
    topology = parse_topology(json.dumps(doc["topology"]))
    records = {}
    for r in doc["records"]:
        a, b = r["pair"]
        records[(a, b)] = KeyRecord(
            (a, b), r["channel"], r["key_id"], r["established_at"], r["status"]
        )
    kill = KillSwitchState(
        killed=set(doc["kill"]["killed"]),
        event_log=[
            KillEvent(e["timestamp"], e["sensor"], e["action"], e.get("note", ""))
            for e in doc["kill"]["events"]
        ],
    )
    return NetworkKeyState(topology, records, kill, doc["clock"])


def save_state(state: NetworkKeyState, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(state_to_json(state))


def load_state(path) -> NetworkKeyState:
    with open(path, encoding="utf-8") as f:
        return state_from_json(f.read())
