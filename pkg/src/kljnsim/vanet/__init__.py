"""Roadside key-distribution network: topology rules, scenarios, event engine."""

from .engine import (
    KeyBlock,
    SimReport,
    StarvationEvent,
    gate_handover,
    link_rate_bps,
    replenish_link,
    replenish_round_robin,
    run_scenario,
)
from .scenario import (
    Defaults,
    EventKind,
    Scenario,
    ScenarioEvent,
    load_scenario,
    load_shipped,
    shipped_scenarios,
)
from .topology import (
    NFC_MAX_RANGE_M,
    NFC_RATES_BPS,
    LinkSpec,
    Network,
    NodeKind,
    NodeState,
    Technology,
    build_topology,
    validate_link,
)

__all__ = [
    "KeyBlock",
    "SimReport",
    "StarvationEvent",
    "gate_handover",
    "link_rate_bps",
    "replenish_link",
    "replenish_round_robin",
    "run_scenario",
    "Defaults",
    "EventKind",
    "Scenario",
    "ScenarioEvent",
    "load_scenario",
    "load_shipped",
    "shipped_scenarios",
    "NFC_MAX_RANGE_M",
    "NFC_RATES_BPS",
    "LinkSpec",
    "Network",
    "NodeKind",
    "NodeState",
    "Technology",
    "build_topology",
    "validate_link",
]
