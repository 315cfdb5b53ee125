"""Gate-level netlist core: .bench I/O, levelization, and simulation.

A netlist is an immutable DAG of typed gates.  Primary outputs are
markers on driver nodes rather than separate gates, so the node count
of a circuit is the number of primary inputs plus the number of gates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

TRUTH_TABLE_PI_CAP = 20


class GateType(Enum):
    INPUT = "INPUT"
    OUTPUT = "OUTPUT"
    AND = "AND"
    NAND = "NAND"
    OR = "OR"
    NOR = "NOR"
    XOR = "XOR"
    XNOR = "XNOR"
    NOT = "NOT"
    BUF = "BUF"
    CONST0 = "CONST0"
    CONST1 = "CONST1"


SOURCE_TYPES = frozenset({GateType.INPUT, GateType.CONST0, GateType.CONST1})
UNARY_TYPES = frozenset({GateType.NOT, GateType.BUF})
BINARY_TYPES = frozenset(
    {GateType.AND, GateType.NAND, GateType.OR, GateType.NOR, GateType.XOR, GateType.XNOR}
)


class NetlistError(ValueError):
    """Raised when a netlist violates a structural invariant."""


class CycleError(NetlistError):
    """Raised when the gate graph contains a combinational cycle."""

    def __init__(self, node: str):
        self.node = node
        super().__init__(f"combinational cycle through node {node!r}")


class BenchParseError(NetlistError):
    """Raised on malformed .bench input; carries the offending line number."""

    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class TruthTableCapError(NetlistError):
    """Raised when an exhaustive truth table would exceed the input cap."""


def _check_arity(kind: GateType, n_in: int) -> str | None:
    if kind in SOURCE_TYPES:
        return None if n_in == 0 else f"{kind.value} takes no inputs"
    if kind in UNARY_TYPES:
        return None if n_in == 1 else f"{kind.value} takes exactly one input"
    if kind is GateType.OUTPUT:
        return None if n_in == 1 else "OUTPUT takes exactly one input"
    return None if n_in >= 2 else f"{kind.value} takes at least two inputs"


@dataclass(frozen=True)
class Node:
    """One gate (or primary input) in the netlist."""

    id: str
    kind: GateType
    fanin: tuple[str, ...] = ()


@dataclass(frozen=True)
class Port:
    """Named primary input or output attached to a node."""

    node: str
    name: str


@dataclass(frozen=True)
class Netlist:
    nodes: tuple[Node, ...]
    inputs: tuple[Port, ...]
    outputs: tuple[Port, ...]
    _by_id: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        by_id: dict[str, Node] = {}
        for nd in self.nodes:
            if nd.id in by_id:
                raise NetlistError(f"duplicate node id {nd.id!r}")
            if nd.kind is GateType.OUTPUT:
                raise NetlistError("OUTPUT is a port marker, not a node kind")
            by_id[nd.id] = nd
        for nd in self.nodes:
            msg = _check_arity(nd.kind, len(nd.fanin))
            if msg:
                raise NetlistError(f"node {nd.id!r}: {msg}")
            for src in nd.fanin:
                if src not in by_id:
                    raise NetlistError(f"node {nd.id!r} reads undefined signal {src!r}")
        input_nodes = set()
        seen_names = set()
        for p in self.inputs:
            nd = by_id.get(p.node)
            if nd is None or nd.kind is not GateType.INPUT:
                raise NetlistError(f"input port {p.name!r} must attach to an INPUT node")
            if p.node in input_nodes:
                raise NetlistError(f"INPUT node {p.node!r} listed twice")
            if p.name in seen_names:
                raise NetlistError(f"duplicate input name {p.name!r}")
            input_nodes.add(p.node)
            seen_names.add(p.name)
        declared = {nd.id for nd in self.nodes if nd.kind is GateType.INPUT}
        if declared != input_nodes:
            missing = sorted(declared - input_nodes)
            raise NetlistError(f"INPUT nodes without a port: {missing}")
        seen_po = set()
        for p in self.outputs:
            if p.node not in by_id:
                raise NetlistError(f"output port {p.name!r} attaches to unknown node {p.node!r}")
            if p.name in seen_po:
                raise NetlistError(f"duplicate output name {p.name!r}")
            seen_po.add(p.name)
        self._check_acyclic(by_id)
        object.__setattr__(self, "_by_id", by_id)

    def _check_acyclic(self, by_id: dict[str, Node]) -> None:
        indeg = {nid: len(nd.fanin) for nid, nd in by_id.items()}
        consumers: dict[str, list[str]] = {nid: [] for nid in by_id}
        for nd in by_id.values():
            for src in nd.fanin:
                consumers[src].append(nd.id)
        ready = [nid for nid, d in indeg.items() if d == 0]
        done = 0
        while ready:
            nid = ready.pop()
            done += 1
            for c in consumers[nid]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
        if done != len(by_id):
            stuck = next(nid for nid, d in indeg.items() if d > 0)
            raise CycleError(stuck)

    def node(self, nid: str) -> Node:
        return self._by_id[nid]

    def has_node(self, nid: str) -> bool:
        return nid in self._by_id

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.inputs)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.outputs)

    def gates(self) -> tuple[Node, ...]:
        return tuple(nd for nd in self.nodes if nd.kind not in SOURCE_TYPES)

    def edge_count(self) -> int:
        return sum(len(nd.fanin) for nd in self.nodes)

    def fanout_map(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {nd.id: [] for nd in self.nodes}
        for nd in self.nodes:
            for src in nd.fanin:
                out[src].append(nd.id)
        return {k: tuple(v) for k, v in out.items()}

    def topological_order(self) -> tuple[Node, ...]:
        """Nodes ordered so every fan-in precedes its reader.

        Ties are broken by declaration order, so the result is stable.
        """
        level = _levels(self)
        order = sorted(range(len(self.nodes)), key=lambda i: (level[self.nodes[i].id], i))
        return tuple(self.nodes[i] for i in order)


@dataclass(frozen=True)
class Levelization:
    """Longest-path layering of a netlist.

    layers[0] holds the fan-in free nodes (primary inputs and constants);
    layers[k] holds nodes whose longest path from a source has length k.
    """

    layers: tuple[tuple[str, ...], ...]
    level_of: dict

    @property
    def depth(self) -> int:
        return len(self.layers) - 1


def _levels(netlist: Netlist) -> dict[str, int]:
    level: dict[str, int] = {}
    indeg = {nd.id: len(nd.fanin) for nd in netlist.nodes}
    consumers: dict[str, list[str]] = {nd.id: [] for nd in netlist.nodes}
    for nd in netlist.nodes:
        for src in nd.fanin:
            consumers[src].append(nd.id)
    ready = [nd.id for nd in netlist.nodes if not nd.fanin]
    for nid in ready:
        level[nid] = 0
    while ready:
        nid = ready.pop()
        for c in consumers[nid]:
            cand = level[nid] + 1
            if cand > level.get(c, -1):
                level[c] = cand
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if len(level) != len(netlist.nodes):
        stuck = next(nd.id for nd in netlist.nodes if nd.id not in level)
        raise CycleError(stuck)
    return level


def levelize(netlist: Netlist) -> Levelization:
    level = _levels(netlist)
    depth = max(level.values(), default=0)
    layers: list[list[str]] = [[] for _ in range(depth + 1)]
    for nd in netlist.nodes:
        layers[level[nd.id]].append(nd.id)
    return Levelization(tuple(tuple(l) for l in layers), level)


_EVAL = {
    GateType.AND: lambda ins: np.logical_and.reduce(ins),
    GateType.NAND: lambda ins: ~np.logical_and.reduce(ins),
    GateType.OR: lambda ins: np.logical_or.reduce(ins),
    GateType.NOR: lambda ins: ~np.logical_or.reduce(ins),
    GateType.XOR: lambda ins: np.logical_xor.reduce(ins),
    GateType.XNOR: lambda ins: ~np.logical_xor.reduce(ins),
    GateType.NOT: lambda ins: ~ins[0],
    GateType.BUF: lambda ins: ins[0],
}


def _simulate_columns(netlist: Netlist, pi_columns: "np.ndarray") -> "np.ndarray":
    """Vectorized evaluation: one boolean column per primary input.

    pi_columns has shape (n_vectors, n_pi); returns (n_vectors, n_po).
    """
    n_vec = pi_columns.shape[0]
    values: dict[str, np.ndarray] = {}
    for j, p in enumerate(netlist.inputs):
        values[p.node] = pi_columns[:, j].astype(bool)
    for nd in netlist.topological_order():
        if nd.kind is GateType.INPUT:
            continue
        if nd.kind is GateType.CONST0:
            values[nd.id] = np.zeros(n_vec, dtype=bool)
        elif nd.kind is GateType.CONST1:
            values[nd.id] = np.ones(n_vec, dtype=bool)
        else:
            ins = [values[s] for s in nd.fanin]
            values[nd.id] = _EVAL[nd.kind](ins)
    out = np.empty((n_vec, len(netlist.outputs)), dtype=np.uint8)
    for j, p in enumerate(netlist.outputs):
        out[:, j] = values[p.node]
    return out


def simulate(netlist: Netlist, assignment: Mapping[str, int]) -> dict[str, int]:
    """Evaluate one input assignment, keyed by input name.

    Returns a dict mapping each output name to 0 or 1.
    """
    for name in netlist.input_names:
        if name not in assignment:
            raise NetlistError(f"missing assignment for input {name!r}")
    col = np.array([[assignment[name] for name in netlist.input_names]], dtype=np.uint8)
    row = _simulate_columns(netlist, col)[0]
    return {p.name: int(row[j]) for j, p in enumerate(netlist.outputs)}


def input_vectors(n_pi: int) -> "np.ndarray":
    """All 2**n_pi input rows; input 0 is the most significant bit."""
    count = 1 << n_pi
    idx = np.arange(count, dtype=np.uint32)
    cols = [(idx >> (n_pi - 1 - j)) & 1 for j in range(n_pi)]
    return np.stack(cols, axis=1).astype(np.uint8) if n_pi else np.zeros((1, 0), np.uint8)


def truth_table(netlist: Netlist, cap: int = TRUTH_TABLE_PI_CAP) -> "np.ndarray":
    """Exhaustive output table, shape (2**n_pi, n_po).

    Row i holds the outputs for the bits of i spread over the inputs in
    declaration order, most significant bit first.  Refuses to expand
    more than ``cap`` inputs.
    """
    n_pi = len(netlist.inputs)
    if n_pi > cap:
        raise TruthTableCapError(f"{n_pi} inputs exceed the exhaustive cap of {cap}")
    return _simulate_columns(netlist, input_vectors(n_pi))


_LINE_DEF = re.compile(r"^(?P<target>[^\s=()]+)\s*=\s*(?P<op>[A-Za-z][A-Za-z0-9]*)\s*\((?P<args>[^()]*)\)$")
_LINE_PORT = re.compile(r"^(?P<kw>[A-Za-z]+)\s*\((?P<arg>[^\s()]+)\)$")

_GATE_KEYWORDS = {
    "AND": GateType.AND,
    "NAND": GateType.NAND,
    "OR": GateType.OR,
    "NOR": GateType.NOR,
    "XOR": GateType.XOR,
    "XNOR": GateType.XNOR,
    "NOT": GateType.NOT,
    "INV": GateType.NOT,
    "BUF": GateType.BUF,
    "BUFF": GateType.BUF,
    "CONST0": GateType.CONST0,
    "CONST1": GateType.CONST1,
}


def parse_bench(text: str) -> Netlist:
    """Parse ISCAS .bench text into a validated netlist.

    Gate keywords are case-insensitive; signal names are case-sensitive.
    Signals may be referenced before their defining line.  Output
    declarations are markers and may precede the driver definition.
    """
    nodes: list[Node] = []
    defined: dict[str, int] = {}
    inputs: list[Port] = []
    outputs: list[tuple[str, int]] = []
    pending: list[tuple[Node, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE_PORT.match(line)
        if m and m.group("kw").upper() in ("INPUT", "OUTPUT"):
            kw = m.group("kw").upper()
            sig = m.group("arg")
            if kw == "INPUT":
                if sig in defined:
                    raise BenchParseError(f"duplicate definition of {sig!r}", lineno)
                defined[sig] = lineno
                nodes.append(Node(sig, GateType.INPUT))
                inputs.append(Port(sig, sig))
            else:
                if any(sig == o for o, _ in outputs):
                    raise BenchParseError(f"duplicate OUTPUT declaration for {sig!r}", lineno)
                outputs.append((sig, lineno))
            continue
        m = _LINE_DEF.match(line)
        if m:
            target = m.group("target")
            op = m.group("op").upper()
            if op not in _GATE_KEYWORDS:
                raise BenchParseError(f"unknown gate type {m.group('op')!r}", lineno)
            kind = _GATE_KEYWORDS[op]
            args = [a.strip() for a in m.group("args").split(",")] if m.group("args").strip() else []
            if any(not a for a in args):
                raise BenchParseError("empty argument in gate definition", lineno)
            if target in defined:
                raise BenchParseError(f"duplicate definition of {target!r}", lineno)
            msg = _check_arity(kind, len(args))
            if msg:
                raise BenchParseError(msg, lineno)
            defined[target] = lineno
            node = Node(target, kind, tuple(args))
            nodes.append(node)
            pending.append((node, lineno))
            continue
        raise BenchParseError(f"cannot parse {line!r}", lineno)

    for node, lineno in pending:
        for src in node.fanin:
            if src not in defined:
                raise BenchParseError(f"undefined signal {src!r}", lineno)
    out_ports = []
    for sig, lineno in outputs:
        if sig not in defined:
            raise BenchParseError(f"OUTPUT declares undefined signal {sig!r}", lineno)
        out_ports.append(Port(sig, sig))
    return Netlist(tuple(nodes), tuple(inputs), tuple(out_ports))


def write_bench(netlist: Netlist, header: str | None = None) -> str:
    """Serialize a netlist to .bench text.

    Port names are used as the emitted signal names for port nodes, so a
    parse of the result reproduces the graph with matching port names.
    A node carrying several output names gets alias BUF lines for the
    extra names.
    """
    emit: dict[str, str] = {}
    taken: set[str] = set()
    for p in netlist.inputs:
        emit[p.node] = p.name
        taken.add(p.name)
    for p in netlist.outputs:
        if p.node not in emit and p.name not in taken:
            emit[p.node] = p.name
            taken.add(p.name)
    for nd in netlist.nodes:
        if nd.id in emit:
            continue
        name = nd.id
        while name in taken:
            name = name + "_"
        emit[nd.id] = name
        taken.add(name)

    lines: list[str] = []
    if header:
        for h in header.splitlines():
            lines.append(f"# {h}")
    for p in netlist.inputs:
        lines.append(f"INPUT({emit[p.node]})")
    alias: list[str] = []
    declared_out: set[str] = set()
    for p in netlist.outputs:
        if emit[p.node] == p.name and p.name not in declared_out:
            lines.append(f"OUTPUT({p.name})")
            declared_out.add(p.name)
        else:
            alias_name = p.name
            while alias_name in taken:
                alias_name = alias_name + "_"
            alias.append(f"{alias_name} = BUF({emit[p.node]})")
            lines.append(f"OUTPUT({alias_name})")
            taken.add(alias_name)
    for nd in netlist.nodes:
        if nd.kind is GateType.INPUT:
            continue
        if nd.kind in (GateType.CONST0, GateType.CONST1):
            lines.append(f"{emit[nd.id]} = {nd.kind.value}()")
            continue
        args = ", ".join(emit[s] for s in nd.fanin)
        lines.append(f"{emit[nd.id]} = {nd.kind.value}({args})")
    lines.extend(alias)
    return "\n".join(lines) + "\n"


def load_bench(path) -> Netlist:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_bench(fh.read())
