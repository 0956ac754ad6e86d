"""Scenario files: structural schema check plus cross-reference validation.

A scenario is JSON with three sections (nodes, links, events) and optional
defaults.  Loading validates structure against the shipped schema, builds
the topology through the allowed-connection table and then checks every
event against the nodes and links it names.  The first violation raises
ConfigError naming the offending element.  Times are converted to the
integer-microsecond simulation clock on load.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from ..errors import ConfigError
from .topology import LinkSpec, Network, NodeKind, NodeState, Technology, build_topology

US_PER_S = 1_000_000


class EventKind(str, enum.Enum):
    VEHICLE_AT_GATE = "VEHICLE_AT_GATE"
    KEY_REQUEST = "KEY_REQUEST"
    MESSAGE_SEND = "MESSAGE_SEND"
    REPLENISH = "REPLENISH"
    KEY_EXPIRY = "KEY_EXPIRY"


@dataclass(frozen=True)
class Defaults:
    message_cost_bits: int = 128
    key_lifetime_s: float = 300.0
    gamma: int = 200
    v_prop_m_per_s: float = 2.0e8
    margin: float = 100.0
    block_bits: int = 128
    ber_table: Optional[dict] = None


@dataclass(frozen=True)
class ScenarioEvent:
    """One scripted event on the integer-microsecond clock.

    `seq` is the tie-breaker for simultaneous events: scenario events carry
    their file order, engine-scheduled sweeps continue the numbering.
    """

    time_us: int
    seq: int
    kind: EventKind
    vehicle: Optional[str] = None
    rskp: Optional[str] = None
    ca: Optional[str] = None
    peer: Optional[str] = None
    sender: Optional[str] = None
    node: Optional[str] = None
    dwell_us: Optional[int] = None
    duration_us: Optional[int] = None
    amount_bits: Optional[int] = None
    cost_bits: Optional[int] = None
    source: str = "scenario"

    @property
    def subject(self) -> str:
        return self.vehicle or self.sender or self.peer or self.node or self.ca or ""


@dataclass(frozen=True)
class Scenario:
    name: str
    defaults: Defaults
    nodes: list = field(default_factory=list)
    links: list = field(default_factory=list)
    events: list = field(default_factory=list)
    raw: dict = field(default_factory=dict)
    sha256: str = ""

    def build_network(self) -> Network:
        """Fresh node state for one run; scenarios themselves stay immutable."""
        nodes = [
            NodeState(
                node_id=spec["id"],
                kind=NodeKind(spec["kind"]),
                region=spec.get("region", ""),
                ca_id=spec.get("ca"),
                capacity_bits=spec.get("capacity_bits"),
            )
            for spec in self.nodes
        ]
        return build_topology(nodes, self.links)


def _schema() -> dict:
    text = resources.files("kljnsim").joinpath("schemas/scenario.schema.json").read_text("utf-8")
    return json.loads(text)


def _to_us(seconds: float, what: str) -> int:
    us = round(float(seconds) * US_PER_S)
    if us < 0:
        raise ConfigError(f"{what}: negative time {seconds!r}")
    return int(us)


def _positive_us(seconds: float, what: str) -> int:
    us = _to_us(seconds, what)
    if us == 0:
        raise ConfigError(f"{what}: {seconds!r} s is below the 1 microsecond clock resolution")
    return us


def load_scenario(source) -> Scenario:
    """Load and fully validate a scenario from a path, JSON text dict, or mapping."""
    if isinstance(source, (str, Path)):
        try:
            raw = json.loads(Path(source).read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario {source}: not valid JSON ({exc})") from exc
    else:
        raw = json.loads(json.dumps(source))  # private copy, also forces JSON types
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"scenario schema violation at {exc.json_path}: {exc.message}") from exc

    defaults_in = raw.get("defaults", {})
    ber = defaults_in.get("ber_table")
    if ber is not None:
        ber = {int(k): float(v) for k, v in ber.items()}
    defaults = Defaults(
        message_cost_bits=defaults_in.get("message_cost_bits", Defaults.message_cost_bits),
        key_lifetime_s=defaults_in.get("key_lifetime_s", Defaults.key_lifetime_s),
        gamma=defaults_in.get("gamma", Defaults.gamma),
        v_prop_m_per_s=defaults_in.get("v_prop_m_per_s", Defaults.v_prop_m_per_s),
        margin=defaults_in.get("margin", Defaults.margin),
        block_bits=defaults_in.get("block_bits", Defaults.block_bits),
        ber_table=ber,
    )

    links = [
        LinkSpec(
            link_id=spec["id"],
            a=spec["a"],
            b=spec["b"],
            technology=Technology(spec["technology"]),
            kljn=spec.get("kljn", False),
            wire_length_m=spec.get("wire_length_m"),
            nfc_rate_bps=spec.get("nfc_rate_bps"),
            nfc_range_m=spec.get("nfc_range_m"),
            nfc_modulation=spec.get("nfc_modulation"),
        )
        for spec in raw["links"]
    ]
    scenario = Scenario(
        name=raw.get("name", ""),
        defaults=defaults,
        nodes=list(raw["nodes"]),
        links=links,
        events=[],
        raw=raw,
        sha256=hashlib.sha256(
            json.dumps(raw, sort_keys=True, separators=(",", ":")).encode("utf-8")
        ).hexdigest(),
    )
    net = scenario.build_network()  # rejects illegal topology, naming the element
    events = [_load_event(i, spec, net) for i, spec in enumerate(raw["events"])]
    return Scenario(
        name=scenario.name,
        defaults=defaults,
        nodes=scenario.nodes,
        links=links,
        events=events,
        raw=raw,
        sha256=scenario.sha256,
    )


def _require_node(net: Network, what: str, node_id, kind: NodeKind) -> NodeState:
    if node_id is None:
        raise ConfigError(f"{what}: missing required node reference")
    node = net.nodes.get(node_id)
    if node is None:
        raise ConfigError(f"{what}: unknown node {node_id!r}")
    if node.kind is not kind:
        raise ConfigError(f"{what}: node {node_id!r} is {node.kind.value}, expected {kind.value}")
    return node


def _load_event(index: int, spec: dict, net: Network) -> ScenarioEvent:
    kind = EventKind(spec["kind"])
    what = f"events[{index}] ({kind.value})"
    time_us = _to_us(spec["time_s"], what)
    ev = dict(
        time_us=time_us,
        seq=index,
        kind=kind,
        vehicle=spec.get("vehicle"),
        rskp=spec.get("rskp"),
        ca=spec.get("ca"),
        peer=spec.get("peer"),
        sender=spec.get("sender"),
        node=spec.get("node"),
        amount_bits=spec.get("amount_bits"),
        cost_bits=spec.get("cost_bits"),
    )
    if kind is EventKind.VEHICLE_AT_GATE:
        _require_node(net, what, spec.get("vehicle"), NodeKind.VEHICLE)
        _require_node(net, what, spec.get("rskp"), NodeKind.RSKP)
        if net.nfc_link(spec["rskp"], spec["vehicle"]) is None:
            raise ConfigError(
                f"{what}: no NFC link between {spec['rskp']!r} and {spec['vehicle']!r}"
            )
        if "dwell_s" not in spec:
            raise ConfigError(f"{what}: dwell_s is required")
        ev["dwell_us"] = _positive_us(spec["dwell_s"], what)
    elif kind is EventKind.KEY_REQUEST:
        _require_node(net, what, spec.get("vehicle"), NodeKind.VEHICLE)
        if spec.get("amount_bits") is None:
            raise ConfigError(f"{what}: amount_bits is required")
        if net.serving_rsd(spec["vehicle"]) is None:
            raise ConfigError(
                f"{what}: vehicle {spec['vehicle']!r} has no wireless path to an RSD "
                "with a wireline run to its authority"
            )
    elif kind is EventKind.MESSAGE_SEND:
        _require_node(net, what, spec.get("sender"), NodeKind.VEHICLE)
    elif kind is EventKind.REPLENISH:
        # The minting end must be an authority; anything else is rejected here.
        _require_node(net, what, spec.get("ca"), NodeKind.CA)
        if "duration_s" not in spec:
            raise ConfigError(f"{what}: duration_s is required")
        ev["duration_us"] = _positive_us(spec["duration_s"], what)
        peers = net.kljn_peers(spec["ca"])
        if not peers:
            raise ConfigError(f"{what}: {spec['ca']!r} has no wireline key-exchange links")
        if spec.get("peer") is not None:
            if spec["peer"] not in [p.node_id for _, p in peers]:
                raise ConfigError(
                    f"{what}: no wireline key-exchange link between "
                    f"{spec['ca']!r} and {spec['peer']!r}"
                )
    elif kind is EventKind.KEY_EXPIRY:
        if spec.get("node") is not None and spec["node"] not in net.nodes:
            raise ConfigError(f"{what}: unknown node {spec['node']!r}")
    return ScenarioEvent(**ev)


def shipped_scenarios() -> list:
    """Names of the scenario files shipped inside the package."""
    base = resources.files("kljnsim").joinpath("scenarios")
    return sorted(p.name[: -len(".json")] for p in base.iterdir() if p.name.endswith(".json"))


def load_shipped(name: str) -> Scenario:
    path = resources.files("kljnsim").joinpath(f"scenarios/{name}.json")
    if not path.is_file():
        raise ConfigError(f"no shipped scenario named {name!r}; have {shipped_scenarios()}")
    return load_scenario(json.loads(path.read_text("utf-8")))
