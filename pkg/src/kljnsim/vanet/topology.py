"""Node and link model of the roadside key-distribution network.

Four node kinds: vehicles, roadside distributors (RSD), certifying
authorities (CA) and roadside key providers (RSKP, the gate units).  Links
are validated at build time against the allowed-connection table:

    vehicle - vehicle   wireless, no key exchange
    vehicle - RSD       wireless, no key exchange
    RSD     - CA        wireline, key exchange
    RSKP    - CA        wireline, key exchange
    RSKP    - vehicle   near-field contact, no key exchange

Nothing else is constructible, and a violation is reported naming the
offending link or node.  Key exchange runs only on wireline runs because it
needs a galvanic loop; the near-field leg is a rate-limited contact channel
with a hard range cap.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

from ..errors import ConfigError

NFC_RATES_BPS = (106_000, 212_000, 424_000)
NFC_MAX_RANGE_M = 0.1
# Modulation labels are carried as metadata only; they do not change rates.
NFC_MODULATIONS = ("OOK", "BPSK")


class NodeKind(str, enum.Enum):
    VEHICLE = "VEHICLE"
    RSD = "RSD"
    CA = "CA"
    RSKP = "RSKP"


class Technology(str, enum.Enum):
    WIRELESS = "WIRELESS"
    WIRELINE = "WIRELINE"
    NFC = "NFC"


@dataclass
class NodeState:
    """A network node with its (mutable) key store.

    `capacity_bits` caps the store; None means unbounded.  Vehicles hold
    delivered material, RSDs and RSKPs hold provisioned buffers, CAs hold
    nothing (they mint straight onto their wireline links).
    """

    node_id: str
    kind: NodeKind
    region: str = ""
    ca_id: Optional[str] = None
    capacity_bits: Optional[int] = None
    blocks: list = field(default_factory=list)

    def __post_init__(self):
        self.kind = NodeKind(self.kind)
        if self.capacity_bits is not None and self.capacity_bits < 0:
            raise ConfigError(f"node {self.node_id}: capacity_bits must be >= 0")

    @property
    def balance(self) -> int:
        return sum(b.n_bits for b in self.blocks)

    @property
    def free_capacity(self) -> Optional[int]:
        if self.capacity_bits is None:
            return None
        return self.capacity_bits - self.balance


@dataclass(frozen=True)
class LinkSpec:
    """A declared connection between two nodes."""

    link_id: str
    a: str
    b: str
    technology: Technology
    kljn: bool = False
    wire_length_m: Optional[float] = None
    nfc_rate_bps: Optional[int] = None
    nfc_range_m: Optional[float] = None
    nfc_modulation: Optional[str] = None

    def other(self, node_id: str) -> str:
        return self.b if node_id == self.a else self.a


@dataclass
class Network:
    nodes: dict
    links: dict
    link_order: list

    def node(self, node_id: str) -> NodeState:
        return self.nodes[node_id]

    def kljn_peers(self, ca_id: str) -> list:
        """(link, peer NodeState) pairs of a CA's wireline runs, declaration order."""
        out = []
        for lid in self.link_order:
            link = self.links[lid]
            if link.kljn and ca_id in (link.a, link.b):
                out.append((link, self.nodes[link.other(ca_id)]))
        return out

    def nfc_link(self, rskp_id: str, vehicle_id: str) -> Optional[LinkSpec]:
        for lid in self.link_order:
            link = self.links[lid]
            if link.technology is Technology.NFC and {link.a, link.b} == {rskp_id, vehicle_id}:
                return link
        return None

    def serving_rsd(self, vehicle_id: str) -> Optional[tuple]:
        """First (rsd, wireline link to its CA) reachable from the vehicle.

        The composite top-up path: one wireless hop to an RSD that holds a
        key-exchange run to the vehicle's authority (any authority when the
        vehicle declares none).
        """
        want_ca = self.nodes[vehicle_id].ca_id
        for lid in self.link_order:
            link = self.links[lid]
            if link.technology is not Technology.WIRELESS or vehicle_id not in (link.a, link.b):
                continue
            peer = self.nodes[link.other(vehicle_id)]
            if peer.kind is not NodeKind.RSD:
                continue
            for wire, ca in self.kljn_peers_of(peer.node_id):
                if want_ca is None or ca.node_id == want_ca:
                    return peer, wire
        return None

    def kljn_peers_of(self, node_id: str) -> list:
        """(wireline link, CA NodeState) pairs serving a non-CA node."""
        out = []
        for lid in self.link_order:
            link = self.links[lid]
            if link.kljn and node_id in (link.a, link.b):
                other = self.nodes[link.other(node_id)]
                if other.kind is NodeKind.CA:
                    out.append((link, other))
        return out


def _pair(kind_a: NodeKind, kind_b: NodeKind) -> frozenset:
    return frozenset((kind_a, kind_b))


_LEGAL_TECH = {
    _pair(NodeKind.VEHICLE, NodeKind.VEHICLE): Technology.WIRELESS,
    _pair(NodeKind.VEHICLE, NodeKind.RSD): Technology.WIRELESS,
    _pair(NodeKind.RSD, NodeKind.CA): Technology.WIRELINE,
    _pair(NodeKind.RSKP, NodeKind.CA): Technology.WIRELINE,
    _pair(NodeKind.RSKP, NodeKind.VEHICLE): Technology.NFC,
}


def validate_link(link: LinkSpec, nodes: dict) -> None:
    """Reject anything outside the allowed-connection table, naming the link."""
    for end in (link.a, link.b):
        if end not in nodes:
            raise ConfigError(f"link {link.link_id}: unknown endpoint {end!r}")
    if link.a == link.b:
        raise ConfigError(f"link {link.link_id}: endpoints must differ")
    ka, kb = nodes[link.a].kind, nodes[link.b].kind
    allowed = _LEGAL_TECH.get(_pair(ka, kb))
    if allowed is None:
        raise ConfigError(
            f"link {link.link_id}: {ka.value}-to-{kb.value} connections are not allowed"
        )
    tech = Technology(link.technology)
    if tech is not allowed:
        raise ConfigError(
            f"link {link.link_id}: {ka.value}-to-{kb.value} must use {allowed.value}, "
            f"got {tech.value}"
        )
    if tech is Technology.WIRELINE:
        if not link.kljn:
            raise ConfigError(
                f"link {link.link_id}: wireline runs carry the key exchange; set kljn true"
            )
        if link.wire_length_m is None or not link.wire_length_m > 0.0:
            raise ConfigError(
                f"link {link.link_id}: wireline needs wire_length_m > 0, "
                f"got {link.wire_length_m!r}"
            )
    else:
        if link.kljn:
            raise ConfigError(
                f"link {link.link_id}: key exchange needs a galvanic loop; "
                f"a {tech.value} link cannot carry it"
            )
    if tech is Technology.NFC:
        if link.nfc_rate_bps not in NFC_RATES_BPS:
            raise ConfigError(
                f"link {link.link_id}: nfc_rate_bps must be one of {NFC_RATES_BPS}, "
                f"got {link.nfc_rate_bps!r}"
            )
        if link.nfc_range_m is None or not 0.0 < link.nfc_range_m <= NFC_MAX_RANGE_M:
            raise ConfigError(
                f"link {link.link_id}: nfc_range_m must be in (0, {NFC_MAX_RANGE_M}] m, "
                f"got {link.nfc_range_m!r}"
            )
        if link.nfc_modulation is not None and link.nfc_modulation not in NFC_MODULATIONS:
            raise ConfigError(
                f"link {link.link_id}: nfc_modulation must be one of {NFC_MODULATIONS}, "
                f"got {link.nfc_modulation!r}"
            )


def build_topology(nodes: Sequence[NodeState], links: Sequence[LinkSpec]) -> Network:
    """Validate and index a node/link set; raises ConfigError on the first violation."""
    by_id: dict = {}
    for node in nodes:
        if node.node_id in by_id:
            raise ConfigError(f"duplicate node id {node.node_id!r}")
        by_id[node.node_id] = node
    for node in nodes:
        if node.ca_id is not None:
            ca = by_id.get(node.ca_id)
            if ca is None or ca.kind is not NodeKind.CA:
                raise ConfigError(
                    f"node {node.node_id}: ca reference {node.ca_id!r} is not a CA node"
                )
    link_map: dict = {}
    order = []
    for link in links:
        if link.link_id in link_map:
            raise ConfigError(f"duplicate link id {link.link_id!r}")
        validate_link(link, by_id)
        link_map[link.link_id] = link
        order.append(link.link_id)
    return Network(nodes=by_id, links=link_map, link_order=order)
