"""Discrete-event engine for the roadside key-distribution scenarios.

Events run on an integer-microsecond clock in (time, sequence) order; the
sequence number is the file order for scripted events and keeps growing for
engine-scheduled expiry sweeps, so simultaneous events resolve the same way
on every run.  Bits are conserved exactly: after every event

    provisioned == buffered + held + consumed + expired
    delivered   == held + consumed + expired

over plain integers, where buffered counts distributor and gate stores and
held counts vehicle pools.  Grants are instantaneous, so the in-transit term
of the report is always zero.

Key material moves as counted blocks with provenance tags.  Only authority
nodes mint, and only at their wireline key-exchange links; gate handovers
and top-ups move existing blocks and stamp them with a fresh lifetime.
Anomalies (a gate met empty, a top-up found nothing buffered, a message with
an underfunded pool) are data in the report, not exceptions.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

from ..channel import ChannelConfig
from ..errors import ConfigError, UsageError
from ..protocol import LinkModel, key_rate
from .scenario import Defaults, EventKind, Scenario, ScenarioEvent, US_PER_S
from .topology import LinkSpec, Network, NodeKind, NodeState, Technology


@dataclass
class KeyBlock:
    """A run of key bits with provenance; vehicles get an expiry stamp."""

    n_bits: int
    provenance: str
    created_at_us: int
    expires_at_us: Optional[int] = None


@dataclass(frozen=True)
class StarvationEvent:
    time_us: int
    kind: str  # gate | request | message
    node: str
    other: str
    wanted_bits: int
    available_bits: int

    def to_dict(self) -> dict:
        return {
            "time_s": self.time_us / US_PER_S,
            "kind": self.kind,
            "node": self.node,
            "other": self.other,
            "wanted_bits": self.wanted_bits,
            "available_bits": self.available_bits,
        }


def link_rate_bps(link: LinkSpec, defaults: Defaults) -> float:
    """Provisioning rate of one wireline key-exchange run, bits per second."""
    if not link.kljn:
        raise UsageError(f"link {link.link_id} carries no key exchange")
    cfg = ChannelConfig(gamma=defaults.gamma)
    model = LinkModel(
        v_prop=defaults.v_prop_m_per_s, margin=defaults.margin, ber_table=defaults.ber_table
    )
    return key_rate(cfg, link.wire_length_m, model)


def _take(blocks: list, amount: int) -> list:
    """Remove `amount` bits oldest-first, splitting the boundary block."""
    taken = []
    while amount > 0 and blocks:
        head = blocks[0]
        if head.n_bits <= amount:
            blocks.pop(0)
            taken.append(head)
            amount -= head.n_bits
        else:
            head.n_bits -= amount
            taken.append(KeyBlock(amount, head.provenance, head.created_at_us, head.expires_at_us))
            amount = 0
    return taken


def _clip_free(amount: int, free: Optional[int]) -> int:
    return amount if free is None else min(amount, max(free, 0))


def replenish_link(
    ca: NodeState,
    peer: NodeState,
    link: LinkSpec,
    duration_us: int,
    rate_bps: float,
    now_us: int = 0,
) -> int:
    """Mint floor(rate * duration) bits at the authority end of one wireline run.

    The grant lands in the peer's buffer as a single provenance-tagged block
    without an expiry stamp (buffered material does not age).  Clipped to the
    peer's free capacity.
    """
    if ca.kind is not NodeKind.CA:
        raise ConfigError(
            f"node {ca.node_id} ({ca.kind.value}) cannot mint key material; "
            "only CA nodes sit at the minting end of a wireline run"
        )
    grant = _clip_free(int(math.floor(rate_bps * duration_us / US_PER_S)), peer.free_capacity)
    if grant > 0:
        peer.blocks.append(KeyBlock(grant, link.link_id, now_us, None))
    return grant


def replenish_round_robin(
    ca: NodeState,
    peers: list,
    duration_us: int,
    rates: dict,
    block_bits: int,
    now_us: int = 0,
) -> dict:
    """Share one authority's exchanger time across peers, whole blocks only.

    `peers` is (link, NodeState) in declaration order; `rates` maps link id
    to bits per second.  Each pass hands every peer with room one block of
    `block_bits`, costing block_bits / rate of that peer's run, until no
    block fits into the remaining duration.  Equal rates and two peers split
    a cycle to within one block.
    """
    if ca.kind is not NodeKind.CA:
        raise ConfigError(f"node {ca.node_id} ({ca.kind.value}) cannot mint key material")
    grants = {peer.node_id: 0 for _, peer in peers}
    left = float(duration_us)
    progressed = True
    while progressed:
        progressed = False
        for link, peer in peers:
            cost_us = block_bits * US_PER_S / rates[link.link_id]
            if cost_us > left:
                continue
            free = peer.free_capacity
            if free is not None and free - grants[peer.node_id] < block_bits:
                continue
            grants[peer.node_id] += block_bits
            left -= cost_us
            progressed = True
    for link, peer in peers:
        g = grants[peer.node_id]
        if g > 0:
            peer.blocks.append(KeyBlock(g, link.link_id, now_us, None))
    return grants


def gate_handover(
    vehicle: NodeState,
    rskp: NodeState,
    link: LinkSpec,
    dwell_us: int,
    now_us: int = 0,
    lifetime_us: Optional[int] = None,
) -> int:
    """Move bits from a gate buffer into a dwelling vehicle's pool.

    Delivered = min(contact budget, buffered, vehicle free capacity), where
    the contact budget is nfc_rate * dwell in exact integer arithmetic.
    Delivered blocks keep their provenance and get a fresh expiry stamp.
    """
    if link.technology is not Technology.NFC:
        raise UsageError(f"link {link.link_id} is not a contact link")
    budget = link.nfc_rate_bps * dwell_us // US_PER_S
    delivered = _clip_free(min(budget, rskp.balance), vehicle.free_capacity)
    expires = None if lifetime_us is None else now_us + lifetime_us
    for seg in _take(rskp.blocks, delivered):
        vehicle.blocks.append(KeyBlock(seg.n_bits, seg.provenance, now_us, expires))
    return delivered


@dataclass
class SimReport:
    seed: int
    scenario_name: str
    scenario_sha256: str
    scenario: dict
    n_events: int
    horizon_s: float
    totals: dict
    starvation_counts: dict
    starvation: dict
    links: dict
    balances: dict
    time_series_header: list
    time_series: list = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        """JSON-ready view; the time series travels separately as CSV."""
        return {
            "seed": self.seed,
            "scenario_name": self.scenario_name,
            "scenario_sha256": self.scenario_sha256,
            "scenario": self.scenario,
            "n_events": self.n_events,
            "horizon_s": self.horizon_s,
            "totals": dict(self.totals),
            "starvation_counts": dict(self.starvation_counts),
            "starvation": {k: [s.to_dict() for s in v] for k, v in self.starvation.items()},
            "links": {k: dict(v) for k, v in self.links.items()},
            "balances": dict(self.balances),
        }


class _Run:
    def __init__(self, scenario: Scenario, seed: int):
        self.scenario = scenario
        self.seed = int(seed)
        self.net: Network = scenario.build_network()
        self.defaults = scenario.defaults
        self.lifetime_us = round(self.defaults.key_lifetime_s * US_PER_S)
        self.rates = {
            lid: link_rate_bps(self.net.links[lid], self.defaults)
            for lid in self.net.link_order
            if self.net.links[lid].kljn
        }
        self.now_us = 0
        self.provisioned = 0
        self.delivered = 0
        self.consumed = 0
        self.expired = 0
        self.starvation = {"gate": [], "request": [], "message": []}
        self.link_bits = {lid: 0 for lid in self.net.link_order}
        self.link_busy_us = {lid: 0.0 for lid in self.net.link_order}
        self.node_order = sorted(self.net.nodes)
        self.header = (
            ["time_s", "seq", "event", "subject", "source", "delta_bits"]
            + self.node_order
            + ["provisioned", "delivered", "buffered", "held", "consumed", "expired"]
        )
        self.rows: list = []
        self.heap: list = []
        self.seq = 0

    def push(self, event: ScenarioEvent):
        heapq.heappush(self.heap, (event.time_us, event.seq, event))

    def next_seq(self) -> int:
        s = self.seq
        self.seq += 1
        return s

    def run(self) -> SimReport:
        for ev in self.scenario.events:
            self.push(ev)
        self.seq = len(self.scenario.events)
        n_events = 0
        while self.heap:
            _, _, ev = heapq.heappop(self.heap)
            self.now_us = ev.time_us
            delta = self.dispatch(ev)
            n_events += 1
            self.record(ev, delta)
        return self.report(n_events)

    # -- event handlers ------------------------------------------------

    def dispatch(self, ev: ScenarioEvent) -> int:
        if ev.kind is EventKind.REPLENISH:
            return self.do_replenish(ev)
        if ev.kind is EventKind.VEHICLE_AT_GATE:
            return self.do_gate(ev)
        if ev.kind is EventKind.KEY_REQUEST:
            return self.do_request(ev)
        if ev.kind is EventKind.MESSAGE_SEND:
            return self.do_message(ev)
        return self.do_expiry(ev)

    def do_replenish(self, ev: ScenarioEvent) -> int:
        ca = self.net.node(ev.ca)
        peers = self.net.kljn_peers(ev.ca)
        if ev.peer is not None:
            link, peer = next((l, p) for l, p in peers if p.node_id == ev.peer)
            grant = replenish_link(
                ca, peer, link, ev.duration_us, self.rates[link.link_id], self.now_us
            )
            self.provisioned += grant
            self.link_bits[link.link_id] += grant
            self.link_busy_us[link.link_id] += ev.duration_us
            return grant
        grants = replenish_round_robin(
            ca, peers, ev.duration_us, self.rates, self.defaults.block_bits, self.now_us
        )
        total = 0
        for link, peer in peers:
            g = grants[peer.node_id]
            total += g
            self.link_bits[link.link_id] += g
            self.link_busy_us[link.link_id] += g * US_PER_S / self.rates[link.link_id]
        self.provisioned += total
        return total

    def do_gate(self, ev: ScenarioEvent) -> int:
        vehicle = self.net.node(ev.vehicle)
        rskp = self.net.node(ev.rskp)
        link = self.net.nfc_link(ev.rskp, ev.vehicle)
        available = rskp.balance
        delivered = gate_handover(vehicle, rskp, link, ev.dwell_us, self.now_us, self.lifetime_us)
        self.delivered += delivered
        self.link_bits[link.link_id] += delivered
        self.link_busy_us[link.link_id] += ev.dwell_us
        if available == 0:
            self.starve("gate", vehicle.node_id, rskp.node_id,
                        link.nfc_rate_bps * ev.dwell_us // US_PER_S, 0)
        if delivered > 0:
            self.schedule_expiry(vehicle.node_id)
        return delivered

    def do_request(self, ev: ScenarioEvent) -> int:
        vehicle = self.net.node(ev.vehicle)
        rsd, wire = self.net.serving_rsd(ev.vehicle)
        available = rsd.balance
        amount = _clip_free(min(ev.amount_bits, available), vehicle.free_capacity)
        expires = self.now_us + self.lifetime_us
        for seg in _take(rsd.blocks, amount):
            vehicle.blocks.append(KeyBlock(seg.n_bits, seg.provenance, self.now_us, expires))
        self.delivered += amount
        self.link_bits[wire.link_id] += amount
        if available == 0:
            self.starve("request", vehicle.node_id, rsd.node_id, ev.amount_bits, 0)
        if amount > 0:
            self.schedule_expiry(vehicle.node_id)
        return amount

    def do_message(self, ev: ScenarioEvent) -> int:
        sender = self.net.node(ev.sender)
        cost = ev.cost_bits if ev.cost_bits is not None else self.defaults.message_cost_bits
        held = sender.balance
        if held < cost:
            self.starve("message", sender.node_id, "", cost, held)
            return 0
        _take(sender.blocks, cost)
        self.consumed += cost
        return cost

    def do_expiry(self, ev: ScenarioEvent) -> int:
        nodes = [ev.node] if ev.node else self.node_order
        swept = 0
        for node_id in nodes:
            node = self.net.node(node_id)
            keep = []
            for block in node.blocks:
                if block.expires_at_us is not None and block.expires_at_us <= self.now_us:
                    swept += block.n_bits
                else:
                    keep.append(block)
            node.blocks = keep
        self.expired += swept
        return swept

    # -- bookkeeping ---------------------------------------------------

    def schedule_expiry(self, node_id: str):
        self.push(
            ScenarioEvent(
                time_us=self.now_us + self.lifetime_us,
                seq=self.next_seq(),
                kind=EventKind.KEY_EXPIRY,
                node=node_id,
                source="auto",
            )
        )

    def starve(self, kind: str, node: str, other: str, wanted: int, available: int):
        self.starvation[kind].append(
            StarvationEvent(self.now_us, kind, node, other, wanted, available)
        )

    def balances_split(self) -> tuple:
        buffered = held = 0
        for node in self.net.nodes.values():
            if node.kind is NodeKind.VEHICLE:
                held += node.balance
            else:
                buffered += node.balance
        return buffered, held

    def record(self, ev: ScenarioEvent, delta: int):
        buffered, held = self.balances_split()
        if self.provisioned != buffered + held + self.consumed + self.expired:
            raise RuntimeError(
                f"bit conservation broken after event seq={ev.seq} at t={self.now_us} us: "
                f"provisioned={self.provisioned} buffered={buffered} held={held} "
                f"consumed={self.consumed} expired={self.expired}"
            )
        if self.delivered != held + self.consumed + self.expired:
            raise RuntimeError(
                f"delivery accounting broken after event seq={ev.seq}: "
                f"delivered={self.delivered} held={held} "
                f"consumed={self.consumed} expired={self.expired}"
            )
        row = [self.now_us / US_PER_S, ev.seq, ev.kind.value, ev.subject, ev.source, delta]
        row += [self.net.node(n).balance for n in self.node_order]
        row += [self.provisioned, self.delivered, buffered, held, self.consumed, self.expired]
        self.rows.append(row)

    def report(self, n_events: int) -> SimReport:
        buffered, held = self.balances_split()
        horizon_us = self.now_us
        links = {}
        for lid in self.net.link_order:
            busy_s = self.link_busy_us[lid] / US_PER_S
            # Pre-charge runs may be far longer than the scripted horizon
            # (slow wireline, long accumulation), so the share is capped.
            links[lid] = {
                "bits_carried": self.link_bits[lid],
                "busy_s": busy_s,
                "utilization": min(1.0, self.link_busy_us[lid] / horizon_us) if horizon_us else 0.0,
            }
        return SimReport(
            seed=self.seed,
            scenario_name=self.scenario.name,
            scenario_sha256=self.scenario.sha256,
            scenario=self.scenario.raw,
            n_events=n_events,
            horizon_s=horizon_us / US_PER_S,
            totals={
                "provisioned": self.provisioned,
                "delivered": self.delivered,
                "consumed": self.consumed,
                "expired": self.expired,
                "buffered": buffered,
                "held": held,
                "in_transit": 0,
            },
            starvation_counts={k: len(v) for k, v in self.starvation.items()},
            starvation=self.starvation,
            links=links,
            balances={n: self.net.node(n).balance for n in self.node_order},
            time_series_header=self.header,
            time_series=self.rows,
        )


def run_scenario(scenario: Scenario, seed: int = 0) -> SimReport:
    """Run a validated scenario to completion.

    The dynamics are fully scripted, so the seed does not change outcomes;
    it is recorded in the report to keep all artifact outputs uniform.
    """
    return _Run(scenario, seed).run()
