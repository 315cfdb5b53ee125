"""Covert cells and dual-view camouflaged netlists.

A covert cell carries two readings of one physical gate: the apparent
one (what structural inspection sees) and the true one (what the cell
computes electrically).  Apparent pins that the true function does not
read are dummy inputs.  A camouflaged netlist is a set of covert cells
plus port lists, and projects to two ordinary netlists:

* the appearance view reads every cell's apparent fields, and
* the function view reads the true fields, drops dummy inputs, turns
  constant cells into CONST0/CONST1 drivers, and hides decoy ports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from gatemimic.netlist import GateType, Netlist, NetlistError, Node, Port


class CovertCellError(NetlistError):
    """Raised when an apparent/true pairing is not realizable."""


_CONSTS = (GateType.CONST0, GateType.CONST1)

# apparent kind -> true kinds a covert variant of that cell can realize,
# beyond the always-allowed identity reading.
_HIDE_RULES = {
    GateType.BUF: _CONSTS,
    GateType.NOT: _CONSTS,
    GateType.INPUT: _CONSTS,  # tied-off pin: looks like a primary input, reads constant
    GateType.NAND: (GateType.NOT,),
    GateType.NOR: (GateType.NOT,),
    GateType.AND: (GateType.BUF,),
    GateType.OR: (GateType.BUF,),
}


def can_hide(apparent: GateType, true: GateType, true_arity: int = 1) -> bool:
    """True when a cell that looks like `apparent` can compute `true`."""
    if apparent == true:
        return True
    if apparent in (GateType.XOR, GateType.XNOR):
        return true_arity <= 2
    return true in _HIDE_RULES.get(apparent, ())


@dataclass(frozen=True)
class CovertCell:
    id: str
    apparent_kind: GateType
    apparent_fanin: tuple[str, ...]
    true_kind: GateType
    true_fanin: tuple[str, ...]
    dummy_positions: frozenset = frozenset()

    def __post_init__(self):
        if self.true_kind in _CONSTS and self.true_fanin:
            raise CovertCellError(f"cell {self.id!r}: constant reading takes no inputs")
        if not can_hide(self.apparent_kind, self.true_kind, len(self.true_fanin)):
            raise CovertCellError(
                f"cell {self.id!r}: {self.apparent_kind.value} cannot conceal "
                f"{self.true_kind.value}/{len(self.true_fanin)}"
            )
        apparent = set(self.apparent_fanin)
        for src in self.true_fanin:
            if src not in apparent:
                raise CovertCellError(
                    f"cell {self.id!r}: true input {src!r} absent from apparent pins"
                )
        live = {i for i, s in enumerate(self.apparent_fanin) if s in set(self.true_fanin)}
        expect = frozenset(range(len(self.apparent_fanin))) - live
        if self.dummy_positions != expect:
            raise CovertCellError(
                f"cell {self.id!r}: dummy positions {sorted(self.dummy_positions)} "
                f"do not match unused pins {sorted(expect)}"
            )

    @property
    def is_identity(self) -> bool:
        return (
            self.apparent_kind == self.true_kind
            and self.apparent_fanin == self.true_fanin
        )


def make_cell(
    cid: str,
    apparent_kind: GateType,
    apparent_fanin,
    true_kind: GateType,
    true_fanin,
) -> CovertCell:
    """Build a covert cell, deriving dummy pin positions."""
    apparent_fanin = tuple(apparent_fanin)
    true_fanin = tuple(true_fanin)
    used = set(true_fanin)
    dummy = frozenset(i for i, s in enumerate(apparent_fanin) if s not in used)
    return CovertCell(cid, apparent_kind, apparent_fanin, true_kind, true_fanin, dummy)


def identity_cell(cid: str, kind: GateType, fanin) -> CovertCell:
    fanin = tuple(fanin)
    return CovertCell(cid, kind, fanin, kind, fanin, frozenset())


def decoy_cell(cid: str, kind: GateType, fanin) -> CovertCell:
    """A cell that keeps its apparent shape but computes nothing useful.

    Unary cells read a constant; multi-input cells degrade to a one-input
    function of their first pin, which downstream logic never consumes.
    """
    fanin = tuple(fanin)
    if kind in (GateType.BUF, GateType.NOT, GateType.INPUT):
        return make_cell(cid, kind, fanin, GateType.CONST0, ())
    if kind in (GateType.AND, GateType.OR):
        return make_cell(cid, kind, fanin, GateType.BUF, fanin[:1])
    if kind in (GateType.NAND, GateType.NOR, GateType.XOR, GateType.XNOR):
        return make_cell(cid, kind, fanin, GateType.NOT, fanin[:1])
    return identity_cell(cid, kind, fanin)


@dataclass(frozen=True)
class CamoPort:
    node: str
    name: str
    decoy: bool = False


@dataclass(frozen=True)
class CamouflagedNetlist:
    cells: tuple[CovertCell, ...]
    inputs: tuple[CamoPort, ...]
    outputs: tuple[CamoPort, ...]
    _by_id: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        by_id: dict[str, CovertCell] = {}
        for c in self.cells:
            if c.id in by_id:
                raise NetlistError(f"duplicate cell id {c.id!r}")
            by_id[c.id] = c
        object.__setattr__(self, "_by_id", by_id)
        # building the views runs full netlist validation on both readings
        self.appearance_view()
        self.function_view()

    def cell(self, cid: str) -> CovertCell:
        return self._by_id[cid]

    def covert_cells(self) -> tuple[CovertCell, ...]:
        return tuple(c for c in self.cells if not c.is_identity)

    def appearance_view(self) -> Netlist:
        nodes = tuple(Node(c.id, c.apparent_kind, c.apparent_fanin) for c in self.cells)
        ins = tuple(Port(p.node, p.name) for p in self.inputs)
        outs = tuple(Port(p.node, p.name) for p in self.outputs)
        return Netlist(nodes, ins, outs)

    def function_view(self) -> Netlist:
        nodes = []
        for c in self.cells:
            if c.apparent_kind is GateType.INPUT and c.true_kind in _CONSTS:
                nodes.append(Node(c.id, c.true_kind))
            else:
                nodes.append(Node(c.id, c.true_kind, c.true_fanin))
        ins = tuple(Port(p.node, p.name) for p in self.inputs if not p.decoy)
        outs = tuple(Port(p.node, p.name) for p in self.outputs if not p.decoy)
        return Netlist(tuple(nodes), ins, outs)


def views(camo: CamouflagedNetlist) -> tuple[Netlist, Netlist]:
    """(appearance, function) projections of a camouflaged netlist."""
    return camo.appearance_view(), camo.function_view()


def identity_camouflage(netlist: Netlist) -> CamouflagedNetlist:
    """Wrap a netlist as a camouflaged one whose two views both equal it."""
    cells = tuple(identity_cell(nd.id, nd.kind, nd.fanin) for nd in netlist.nodes)
    ins = tuple(CamoPort(p.node, p.name) for p in netlist.inputs)
    outs = tuple(CamoPort(p.node, p.name) for p in netlist.outputs)
    return CamouflagedNetlist(cells, ins, outs)


def decoy_camouflage(netlist: Netlist) -> CamouflagedNetlist:
    """Appearance-only wrap: every gate becomes a decoy, ports become decoys.

    Used for appearance pieces that have no functional counterpart.
    """
    cells = []
    for nd in netlist.nodes:
        if nd.kind is GateType.INPUT:
            cells.append(decoy_cell(nd.id, GateType.INPUT, ()))
        else:
            cells.append(decoy_cell(nd.id, nd.kind, nd.fanin))
    ins = tuple(CamoPort(p.node, p.name, decoy=True) for p in netlist.inputs)
    outs = tuple(CamoPort(p.node, p.name, decoy=True) for p in netlist.outputs)
    return CamouflagedNetlist(tuple(cells), ins, outs)


def camo_to_dict(camo: CamouflagedNetlist) -> dict:
    """JSON-ready document with cells, pis and pos."""
    return {
        "cells": [
            {
                "id": c.id,
                "apparent": {"type": c.apparent_kind.value, "inputs": list(c.apparent_fanin)},
                "true": {"type": c.true_kind.value, "inputs": list(c.true_fanin)},
                "dummy": sorted(c.dummy_positions),
            }
            for c in camo.cells
        ],
        "pis": [{"id": p.node, "name": p.name, "decoy": p.decoy} for p in camo.inputs],
        "pos": [{"id": p.node, "name": p.name, "decoy": p.decoy} for p in camo.outputs],
    }


def camo_from_dict(doc: dict) -> CamouflagedNetlist:
    cells = []
    for c in doc["cells"]:
        cell = CovertCell(
            c["id"],
            GateType(c["apparent"]["type"]),
            tuple(c["apparent"]["inputs"]),
            GateType(c["true"]["type"]),
            tuple(c["true"]["inputs"]),
            frozenset(c.get("dummy", ())),
        )
        cells.append(cell)
    ins = tuple(CamoPort(p["id"], p["name"], bool(p.get("decoy", False))) for p in doc["pis"])
    outs = tuple(CamoPort(p["id"], p["name"], bool(p.get("decoy", False))) for p in doc["pos"])
    return CamouflagedNetlist(tuple(cells), ins, outs)
