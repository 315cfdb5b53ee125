"""Scoring for camouflaged netlists.

Overheads are measured on the appearance view, because that is the
structure that gets fabricated; functional accuracy is measured on the
function view, because that is what the chip computes.  The deception
score consumes externally supplied attack F1 values, and the resilience
check brute-forces the key space induced by covert-cell ambiguity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gatemimic.covert import CamouflagedNetlist
from gatemimic.netlist import (
    GateType,
    Netlist,
    NetlistError,
    Node,
    Port,
    input_vectors,
    levelize,
    truth_table,
    _simulate_columns,
)

EXHAUSTIVE_PI_CAP = 20
RESILIENCE_PI_CAP = 16


@dataclass(frozen=True)
class OverheadReport:
    area_ratio: float
    power_ratio: float
    delay_ratio: float
    nodes_camo: int
    nodes_functional: int
    edges_camo: int
    edges_functional: int
    depth_camo: int
    depth_functional: int


def _gate_count(netlist: Netlist) -> int:
    return len(netlist.gates())


def overheads(camo: CamouflagedNetlist, functional: Netlist) -> OverheadReport:
    """PPA proxy ratios of the fabricated structure over the bare function.

    Area counts logic nodes (gates, not input pins), power counts directed
    wires including those from pins, and delay compares levelized depth.
    """
    apparent = camo.appearance_view()
    nodes_c, nodes_f = _gate_count(apparent), _gate_count(functional)
    if nodes_f == 0:
        raise ValueError("functional netlist has no gates")
    edges_c, edges_f = apparent.edge_count(), functional.edge_count()
    if edges_f == 0:
        raise ValueError("functional netlist has no edges")
    depth_c, depth_f = levelize(apparent).depth, levelize(functional).depth
    if depth_f == 0:
        raise ValueError("functional netlist has no logic depth")
    return OverheadReport(
        area_ratio=nodes_c / nodes_f,
        power_ratio=edges_c / edges_f,
        delay_ratio=depth_c / depth_f,
        nodes_camo=nodes_c,
        nodes_functional=nodes_f,
        edges_camo=edges_c,
        edges_functional=edges_f,
        depth_camo=depth_c,
        depth_functional=depth_f,
    )


@dataclass(frozen=True)
class DeceptionInput:
    f1_expose: float
    f1_mimicry: float

    def __post_init__(self):
        for v in (self.f1_expose, self.f1_mimicry):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"F1 value {v} outside [0,1]")


def deception_score(d: DeceptionInput) -> float:
    """Relative mimicry margin (mimicry - expose) / expose.

    A zero expose score means the attacker never identified the hidden
    function at all; the score is then unbounded and reported as the
    infinite sentinel rather than raising.
    """
    if d.f1_expose == 0.0:
        return math.inf
    return (d.f1_mimicry - d.f1_expose) / d.f1_expose


def _sampled_rows(n_pi: int, sample_n: int, seed: int) -> "np.ndarray":
    rng = np.random.default_rng(seed)
    return rng.integers(0, 2, size=(sample_n, n_pi)).astype(np.uint8)


def functional_accuracy(
    camo: CamouflagedNetlist,
    reference: Netlist,
    sample_n: int = 10000,
    seed: int = 0,
) -> float:
    """Percentage of output bits where the function view matches the reference.

    Exhaustive when the interface is 20 pins or fewer, seeded uniform
    sampling otherwise.
    """
    fn = camo.function_view()
    if fn.input_names != reference.input_names:
        raise ValueError(
            f"input mismatch: {fn.input_names} vs {reference.input_names}"
        )
    if len(fn.output_names) != len(reference.output_names):
        raise ValueError("output count mismatch")
    n_pi = len(reference.input_names)
    if n_pi <= EXHAUSTIVE_PI_CAP:
        got = truth_table(fn)
        want = truth_table(reference)
    else:
        rows = _sampled_rows(n_pi, sample_n, seed)
        got = _simulate_columns(fn, rows)
        want = _simulate_columns(reference, rows)
    return float((got == want).mean()) * 100.0


def appearance_fidelity(camo: CamouflagedNetlist, target: Netlist) -> float:
    """Structural closeness of the apparent view to the appearance target.

    1 minus the normalized sum of the gate-type multiset difference and
    the edge-set symmetric difference, floored at zero.
    """
    apparent = camo.appearance_view()

    def type_counts(n: Netlist) -> dict:
        counts: dict = {}
        for node in n.nodes:
            counts[node.kind] = counts.get(node.kind, 0) + 1
        return counts

    ca, ct = type_counts(apparent), type_counts(target)
    type_diff = sum(abs(ca.get(k, 0) - ct.get(k, 0)) for k in set(ca) | set(ct))

    def edges(n: Netlist) -> set:
        return {(src, node.id) for node in n.nodes for src in node.fanin}

    edge_diff = len(edges(apparent) ^ edges(target))
    denom = len(target.nodes) + target.edge_count()
    if denom == 0:
        return 0.0
    return max(0.0, 1.0 - (type_diff + edge_diff) / denom)


@dataclass(frozen=True)
class ResilienceReport:
    key_space: int
    consistent_keys: int
    resolved: bool


def decamo_resilience(
    camo: CamouflagedNetlist,
    oracle: Netlist,
    max_keys: int = 16,
    sample_n: int = 10000,
    seed: int = 0,
) -> ResilienceReport:
    """Brute-force key enumeration over covert-cell interpretations.

    Every non-identity covert cell is one key bit choosing the apparent
    or the true reading.  An assignment is consistent when the resulting
    circuit matches the oracle on every test vector (exhaustive up to 16
    pins, sampled beyond).  The all-true key is consistent by
    construction, so a resolved instance has exactly that one key.
    """
    ambiguous = [c for c in camo.cells if not c.is_identity]
    k = len(ambiguous)
    if k > max_keys:
        raise ValueError(f"{k} covert cells exceed the {max_keys}-key brute-force cap")

    n_pi = len(oracle.input_names)
    if n_pi <= RESILIENCE_PI_CAP:
        rows = input_vectors(n_pi)
    else:
        rows = _sampled_rows(n_pi, sample_n, seed)
    want = _simulate_columns(oracle, rows)

    consistent = 0
    for key in range(1 << k):
        reading = {
            c.id: bool((key >> i) & 1) for i, c in enumerate(ambiguous)
        }
        candidate = _assemble(camo, reading)
        if candidate is None:
            continue
        got = _simulate_columns(candidate, rows)
        if np.array_equal(got, want):
            consistent += 1
    return ResilienceReport(
        key_space=1 << k,
        consistent_keys=consistent,
        resolved=consistent == 1,
    )


def _assemble(camo: CamouflagedNetlist, use_true: dict):
    """Materialize one key assignment as a plain netlist on the live interface.

    Identity cells keep their single reading; keyed cells take the true
    reading when their bit is set, the apparent one otherwise.  Decoy
    pins are grounded (the oracle interface tells the attacker which
    pins the chip actually answers on).  Returns None when the chosen
    readings form a cycle; such an assignment can never be the real chip.
    """
    grounded = {p.node for p in camo.inputs if p.decoy}
    nodes = []
    for c in camo.cells:
        if c.is_identity or not use_true.get(c.id, False):
            kind, fanin = c.apparent_kind, c.apparent_fanin
        else:
            kind, fanin = c.true_kind, c.true_fanin
        if kind == GateType.INPUT and c.id in grounded:
            kind, fanin = GateType.CONST0, ()
        nodes.append(Node(c.id, kind, tuple(fanin)))

    inputs = tuple(Port(p.node, p.name) for p in camo.inputs if not p.decoy)
    outputs = tuple(Port(p.node, p.name) for p in camo.outputs if not p.decoy)
    try:
        return Netlist(tuple(nodes), inputs, outputs)
    except NetlistError:
        return None
