"""Hybrid wired/wireless sensor network model.

A network is a set of sensors, an undirected set of wired KLJN links, and
per-sensor wireless peer sets.  Every peer of a sensor is classified as
exactly one of the two exchange kinds: wired-KLJN or wireless.  Wireless
sets may be given explicitly (partial-coverage experiments) or derived as
the full-mesh complement of the KLJN neighbourhood, which is the default
assumption for all-pairs reachable networks.

Topologies are immutable after construction; all operations here return
new objects or plain data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

SensorId = str

# Order of keys in the serialized topology document.
_DOC_KEYS = ("sensors", "kljn_edges", "wireless_sets")


class TopologyFormatError(ValueError):
    """Raised when a topology document is malformed."""


class UnknownSensorError(ValueError):
    """Raised when an operation references a sensor not in the topology."""


def _canonical_edge(a: SensorId, b: SensorId) -> tuple[SensorId, SensorId]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Topology:
    """Sensors plus wired KLJN links and (optional) explicit wireless sets.

    ``kljn_edges`` holds canonical sorted pairs, so link symmetry cannot be
    violated by construction.  ``wireless_sets`` is ``None`` until sets are
    given explicitly or derived with :func:`derive_wireless_sets`; accessors
    fall back to the complement rule when it is ``None``.
    """

    sensors: tuple[SensorId, ...]
    kljn_edges: frozenset[tuple[SensorId, SensorId]]
    wireless_sets: dict[SensorId, frozenset[SensorId]] | None = None

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        object.__setattr__(
            self,
            "kljn_edges",
            frozenset(_canonical_edge(a, b) for a, b in self.kljn_edges),
        )
        if self.wireless_sets is not None:
            object.__setattr__(
                self,
                "wireless_sets",
                {s: frozenset(peers) for s, peers in self.wireless_sets.items()},
            )

    @property
    def sensor_set(self) -> frozenset[SensorId]:
        return frozenset(self.sensors)

    def has_sensor(self, i: SensorId) -> bool:
        return i in self.sensor_set

    def kljn_set(self, i: SensorId) -> frozenset[SensorId]:
        """Wired-KLJN peers of ``i``, read off the undirected edge set."""
        if not self.has_sensor(i):
            raise UnknownSensorError(f"unknown sensor {i!r}")
        return frozenset(
            b if a == i else a for a, b in self.kljn_edges if i in (a, b) and a != b
        )

    def wireless_set(self, i: SensorId) -> frozenset[SensorId]:
        """Wireless peers of ``i``: explicit if present, else the complement rule."""
        if not self.has_sensor(i):
            raise UnknownSensorError(f"unknown sensor {i!r}")
        if self.wireless_sets is not None:
            return self.wireless_sets.get(i, frozenset())
        return self.sensor_set - self.kljn_set(i) - {i}


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str
    entities: tuple[SensorId, ...] = ()


@dataclass
class ValidationReport:
    errors: list[ValidationIssue] = field(default_factory=list)
    warnings: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def error_codes(self) -> set[str]:
        return {issue.code for issue in self.errors}


def parse_topology(text: str) -> Topology:
    """Parse a JSON topology document.

    The document is an object ``{"sensors": [...], "kljn_edges": [[a,b],...],
    "wireless_sets": {id: [...]}}`` with ``wireless_sets`` optional.  Only
    structural problems raise here (syntax, duplicate ids, self-loop edges,
    edges naming unknown sensors); set-level inconsistencies such as a
    KLJN/wireless overlap are left for :func:`validate` to report.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyFormatError(
            f"topology document is not valid JSON: {exc.msg} "
            f"(line {exc.lineno}, column {exc.colno})"
        ) from exc
    if not isinstance(doc, dict):
        raise TopologyFormatError("topology document must be a JSON object")
    unknown_keys = set(doc) - set(_DOC_KEYS)
    if unknown_keys:
        raise TopologyFormatError(f"unknown keys in topology document: {sorted(unknown_keys)}")

    raw_sensors = doc.get("sensors")
    if not isinstance(raw_sensors, list):
        raise TopologyFormatError("'sensors' must be a list of sensor ids")
    sensors: list[SensorId] = []
    seen: set[SensorId] = set()
    for s in raw_sensors:
        if not isinstance(s, str) or not s:
            raise TopologyFormatError(f"sensor id must be a non-empty string, got {s!r}")
        if s in seen:
            raise TopologyFormatError(f"duplicate sensor id {s!r}")
        seen.add(s)
        sensors.append(s)

    raw_edges = doc.get("kljn_edges", [])
    if not isinstance(raw_edges, list):
        raise TopologyFormatError("'kljn_edges' must be a list of [id, id] pairs")
    edges: set[tuple[SensorId, SensorId]] = set()
    for e in raw_edges:
        if not isinstance(e, list) or len(e) != 2:
            raise TopologyFormatError(f"KLJN edge must be a pair, got {e!r}")
        a, b = e
        for endpoint in (a, b):
            if endpoint not in seen:
                raise TopologyFormatError(f"KLJN edge {e!r} references unknown sensor {endpoint!r}")
        if a == b:
            raise TopologyFormatError(f"KLJN edge {e!r} is a self-loop")
        edges.add(_canonical_edge(a, b))

    wireless = None
    if "wireless_sets" in doc:
        raw_wireless = doc["wireless_sets"]
        if not isinstance(raw_wireless, dict):
            raise TopologyFormatError("'wireless_sets' must be an object mapping id -> [id...]")
        wireless = {}
        for s, peers in raw_wireless.items():
            if not isinstance(peers, list):
                raise TopologyFormatError(f"wireless set of {s!r} must be a list")
            wireless[s] = frozenset(peers)

    return Topology(tuple(sensors), frozenset(edges), wireless)


def serialize_topology(t: Topology) -> str:
    """Serialize to the canonical document form (round-trips with parse)."""
    doc: dict = {
        "sensors": sorted(t.sensors),
        "kljn_edges": sorted(list(e) for e in t.kljn_edges),
    }
    if t.wireless_sets is not None:
        doc["wireless_sets"] = {
            s: sorted(peers) for s, peers in sorted(t.wireless_sets.items())
        }
    return json.dumps(doc, indent=2) + "\n"


def load_topology(path) -> Topology:
    with open(path, encoding="utf-8") as f:
        return parse_topology(f.read())


def derive_wireless_sets(t: Topology, overwrite: bool = False) -> Topology:
    """Fill in wireless sets as ``sensors - kljn_set(i) - {i}`` for every i.

    Refuses to clobber explicit sets unless ``overwrite`` is passed.
    """
    if t.wireless_sets is not None and not overwrite:
        raise ValueError("topology already has explicit wireless sets (pass overwrite=True)")
    full = t.sensor_set
    derived = {i: full - t.kljn_set(i) - {i} for i in t.sensors}
    return Topology(t.sensors, t.kljn_edges, derived)


def validate(t: Topology) -> ValidationReport:
    """Check every topology invariant; violations are data, not exceptions."""
    report = ValidationReport()
    known = t.sensor_set

    seen: set[SensorId] = set()
    for s in t.sensors:
        if not isinstance(s, str) or not s:
            report.errors.append(
                ValidationIssue("empty-id", f"sensor id {s!r} is not a non-empty string", (str(s),))
            )
        elif s in seen:
            report.errors.append(
                ValidationIssue("duplicate-sensor", f"sensor id {s!r} appears more than once", (s,))
            )
        seen.add(s)

    for a, b in sorted(t.kljn_edges):
        if a == b:
            report.errors.append(
                ValidationIssue("self-loop", f"KLJN edge {a!r}-{b!r} is a self-loop", (a,))
            )
        for endpoint in (a, b):
            if endpoint not in known:
                report.errors.append(
                    ValidationIssue(
                        "unknown-sensor",
                        f"KLJN edge ({a!r}, {b!r}) references unknown sensor {endpoint!r}",
                        (a, b),
                    )
                )

    if t.wireless_sets is not None:
        for s in sorted(t.wireless_sets):
            peers = t.wireless_sets[s]
            if s not in known:
                report.errors.append(
                    ValidationIssue(
                        "unknown-sensor", f"wireless set given for unknown sensor {s!r}", (s,)
                    )
                )
                continue
            for p in sorted(peers):
                if p not in known:
                    report.errors.append(
                        ValidationIssue(
                            "unknown-sensor",
                            f"wireless set of {s!r} contains unknown sensor {p!r}",
                            (s, p),
                        )
                    )
            if s in peers:
                report.errors.append(
                    ValidationIssue(
                        "self-in-wireless", f"sensor {s!r} lists itself as a wireless peer", (s,)
                    )
                )
            overlap = peers & t.kljn_set(s) if s in known else frozenset()
            for p in sorted(overlap):
                report.errors.append(
                    ValidationIssue(
                        "kljn-wireless-overlap",
                        f"{p!r} is both a KLJN and a wireless peer of {s!r}",
                        (s, p),
                    )
                )
        missing = sorted(known - set(t.wireless_sets))
        if missing:
            report.warnings.append(
                ValidationIssue(
                    "missing-wireless-entry",
                    f"no explicit wireless set for {missing} (treated as empty)",
                    tuple(missing),
                )
            )

    return report


def peer_sets(t: Topology, i: SensorId) -> tuple[frozenset[SensorId], frozenset[SensorId]]:
    """Return ``(kljn peers, wireless peers)`` of sensor ``i``."""
    return t.kljn_set(i), t.wireless_set(i)


def bundled_topology_path(name: str = "fig2"):
    """Path to a topology document shipped with the package.

    ``fig2`` is the ten-sensor hybrid example network used throughout the
    tests and docs (sensors A..J, six wired KLJN links).
    """
    ref = resources.files("kextrust").joinpath("data", f"{name}.json")
    if not ref.is_file():
        raise FileNotFoundError(f"no bundled topology named {name!r}")
    return ref


def bundled_topology(name: str = "fig2") -> Topology:
    """Parse a bundled topology document and derive its wireless sets."""
    text = bundled_topology_path(name).read_text(encoding="utf-8")
    return derive_wireless_sets(parse_topology(text))
