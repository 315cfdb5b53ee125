"""Layer-by-layer structural matching of two netlists and covert deployment.

The matcher aligns a functional circuit with an unrelated appearance
circuit one level at a time: primary inputs are paired by name and then
position, and every deeper layer is assigned by solving a rectangular
cost problem (padded square) with the Hungarian method.  Costs combine
a type-compatibility term with a connectivity term that counts how many
of a functional node's predecessors the candidate appearance node fails
to cover under the mapping accumulated over earlier layers.

Deployment then realizes the functional circuit inside the appearance
structure with covert cells: matched compatible pairs hide the true
gate behind the apparent one, leftover appearance nodes become decoys,
and leftover functional nodes are inserted as exposed plain cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gatemimic.covert import (
    CamoPort,
    CamouflagedNetlist,
    can_hide,
    decoy_cell,
    identity_cell,
    make_cell,
)
from gatemimic.netlist import GateType, Netlist, Node, levelize

_CONSTS = (GateType.CONST0, GateType.CONST1)


@dataclass(frozen=True)
class CostConfig:
    """Weights for the layer assignment problem."""

    hide_cost: float = 0.0
    mismatch_cost: float = 10.0
    connection_weight: float = 3.0
    dummy_cost: float = 100.0


def hungarian(cost) -> tuple[tuple[int, ...], float]:
    """Minimum-cost assignment on a square matrix.

    Returns (columns, total) where columns[i] is the column assigned to
    row i.  Among all minimum-cost assignments the lexicographically
    smallest column vector is returned, so ties resolve to the lowest
    row index first, then the lowest column index.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("cost matrix must be square")
    n = C.shape[0]
    if n == 0:
        return (), 0.0
    if not np.isfinite(C).all():
        raise ValueError("cost matrix entries must be finite")
    cols, u, v = _solve_potentials(C)
    tol = 1e-9 * max(1.0, float(np.abs(C).max()))
    tight = [
        [j for j in range(n) if C[i, j] - u[i + 1] - v[j + 1] <= tol]
        for i in range(n)
    ]
    cols = _lex_min_perfect_matching(tight, cols)
    total = float(C[np.arange(n), cols].sum())
    return tuple(int(c) for c in cols), total


def _solve_potentials(C: "np.ndarray"):
    """Shortest-augmenting-path Hungarian with dual potentials (1-indexed)."""
    n = C.shape[0]
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = C[i0 - 1, j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    cols = [0] * n
    for j in range(1, n + 1):
        cols[p[j] - 1] = j - 1
    return cols, u, v


def _lex_min_perfect_matching(tight: list[list[int]], initial: list[int]) -> list[int]:
    """Lexicographically smallest perfect matching within the tight subgraph.

    Complementary slackness makes the perfect matchings of the tight
    subgraph exactly the optimal assignments, so fixing rows in order to
    their smallest feasible column yields the lex-min optimum.
    """
    n = len(tight)
    match_row = list(initial)
    match_col = [-1] * n
    for r, c in enumerate(match_row):
        match_col[c] = r
    fixed = [False] * n

    def reroute(r: int, visited: set) -> bool:
        for c in tight[r]:
            if fixed[c] or c in visited:
                continue
            visited.add(c)
            owner = match_col[c]
            if owner == -1 or reroute(owner, visited):
                match_row[r] = c
                match_col[c] = r
                return True
        return False

    for i in range(n):
        current = match_row[i]
        for c in tight[i]:
            if c >= current or fixed[c]:
                continue
            saved_row = match_row[:]
            saved_col = match_col[:]
            owner = match_col[c]
            match_col[current] = -1
            match_row[i] = c
            match_col[c] = i
            if reroute(owner, {c}):
                current = c
                break
            match_row[:] = saved_row
            match_col[:] = saved_col
        fixed[current] = True
    return match_row


def _type_conceals(apparent: GateType, true: GateType) -> bool:
    if true in _CONSTS:
        arity = 0
    elif true in (GateType.NOT, GateType.BUF):
        arity = 1
    else:
        arity = 2
    return can_hide(apparent, true, arity)


def node_cost(apparent_kind: GateType, functional_kind: GateType, cfg: CostConfig) -> float:
    if apparent_kind == functional_kind:
        return 0.0
    if _type_conceals(apparent_kind, functional_kind):
        return cfg.hide_cost
    return cfg.mismatch_cost


def connection_cost(
    appearance_node: Node,
    functional_node: Node,
    mapping: dict,
    cfg: CostConfig,
) -> float:
    """Connectivity penalty: functional predecessors the candidate cannot reach.

    mapping holds appearance-to-functional pairs from all earlier layers;
    a predecessor of the functional node counts as missing when no mapped
    predecessor of the appearance node lands on it.
    """
    covered = {mapping[q] for q in appearance_node.fanin if q in mapping}
    missing = len(set(functional_node.fanin) - covered)
    return cfg.connection_weight * missing


def build_cost_matrix(
    appearance_nodes: list,
    functional_nodes: list,
    mapping: dict,
    cfg: CostConfig,
) -> "np.ndarray":
    """Square cost matrix for one layer, padded with the dummy cost.

    Rows are appearance nodes, columns functional nodes; padding rows or
    columns stand for leaving the other side unmatched.
    """
    na, nf = len(appearance_nodes), len(functional_nodes)
    size = max(na, nf)
    C = np.full((size, size), cfg.dummy_cost, dtype=float)
    for i, a in enumerate(appearance_nodes):
        for j, f in enumerate(functional_nodes):
            C[i, j] = node_cost(a.kind, f.kind, cfg) + connection_cost(a, f, mapping, cfg)
    return C


@dataclass(frozen=True)
class MatchedPair:
    appearance: str
    functional: str
    layer: int
    node_cost: float
    connection_cost: float


@dataclass(frozen=True)
class NodeMapping:
    pairs: tuple[MatchedPair, ...]
    unmatched_appearance: tuple[str, ...]
    unmatched_functional: tuple[str, ...]
    total_cost: float

    def appearance_of(self) -> dict:
        return {p.functional: p.appearance for p in self.pairs}

    def functional_of(self) -> dict:
        return {p.appearance: p.functional for p in self.pairs}

    def pairs_before_layer(self, layer: int) -> dict:
        return {p.appearance: p.functional for p in self.pairs if p.layer < layer}


def match_pi_layer(appearance: Netlist, functional: Netlist) -> dict:
    """Pair primary inputs by name, then remaining ones by position.

    Returns a dict from appearance input node id to functional input node id.
    """
    f_by_name = {p.name: p for p in functional.inputs}
    pairs: dict[str, str] = {}
    used_f = set()
    for pa in appearance.inputs:
        pf = f_by_name.get(pa.name)
        if pf is not None and pf.node not in used_f:
            pairs[pa.node] = pf.node
            used_f.add(pf.node)
    rest_a = [p for p in appearance.inputs if p.node not in pairs]
    rest_f = [p for p in functional.inputs if p.node not in used_f]
    for pa, pf in zip(rest_a, rest_f):
        pairs[pa.node] = pf.node
    return pairs


def match_graphs(appearance: Netlist, functional: Netlist, cfg: CostConfig | None = None) -> NodeMapping:
    """Greedy layer-by-layer matching of the two levelized circuits."""
    cfg = cfg or CostConfig()
    lv_a = levelize(appearance)
    lv_f = levelize(functional)
    order_a = {nd.id: i for i, nd in enumerate(appearance.nodes)}
    order_f = {nd.id: i for i, nd in enumerate(functional.nodes)}

    pi_pairs = match_pi_layer(appearance, functional)
    mapping = dict(pi_pairs)
    pairs: list[MatchedPair] = [
        MatchedPair(a, f, 0, 0.0, 0.0)
        for a, f in sorted(pi_pairs.items(), key=lambda kv: order_a[kv[0]])
    ]
    total = 0.0
    depth = max(lv_a.depth, lv_f.depth)
    for k in range(1, depth + 1):
        ids_a = lv_a.layers[k] if k < len(lv_a.layers) else ()
        ids_f = lv_f.layers[k] if k < len(lv_f.layers) else ()
        la = [appearance.node(i) for i in sorted(ids_a, key=order_a.get)]
        lf = [functional.node(i) for i in sorted(ids_f, key=order_f.get)]
        if not la or not lf:
            continue
        C = build_cost_matrix(la, lf, mapping, cfg)
        cols, layer_total = hungarian(C)
        total += layer_total
        for i, j in enumerate(cols):
            if i < len(la) and j < len(lf):
                a, f = la[i], lf[j]
                nc = node_cost(a.kind, f.kind, cfg)
                cc = connection_cost(a, f, mapping, cfg)
                pairs.append(MatchedPair(a.id, f.id, k, nc, cc))
        for i, j in enumerate(cols):
            if i < len(la) and j < len(lf):
                mapping[la[i].id] = lf[j].id

    matched_a = {p.appearance for p in pairs}
    matched_f = {p.functional for p in pairs}
    un_a = tuple(nd.id for nd in appearance.nodes if nd.id not in matched_a)
    un_f = tuple(nd.id for nd in functional.nodes if nd.id not in matched_f)
    return NodeMapping(tuple(pairs), un_a, un_f, total)


def mapping_to_dict(m: NodeMapping) -> dict:
    return {
        "pairs": [
            {
                "a": p.appearance,
                "f": p.functional,
                "layer": p.layer,
                "node_cost": p.node_cost,
                "conn_cost": p.connection_cost,
            }
            for p in m.pairs
        ],
        "unmatched_a": list(m.unmatched_appearance),
        "unmatched_f": list(m.unmatched_functional),
        "total_cost": m.total_cost,
    }


def mapping_from_dict(doc: dict) -> NodeMapping:
    pairs = tuple(
        MatchedPair(p["a"], p["f"], p["layer"], p["node_cost"], p["conn_cost"])
        for p in doc["pairs"]
    )
    return NodeMapping(
        pairs,
        tuple(doc["unmatched_a"]),
        tuple(doc["unmatched_f"]),
        doc["total_cost"],
    )


def _realizable(a_node: Node, f_node: Node) -> bool:
    """Whether the matched pair can become one covert cell."""
    if a_node.kind == f_node.kind:
        return True
    if f_node.kind in _CONSTS and a_node.kind in (GateType.BUF, GateType.NOT, GateType.INPUT):
        return True
    return can_hide(a_node.kind, f_node.kind, len(f_node.fanin))


def deploy_covert(
    appearance: Netlist,
    functional: Netlist,
    mapping: NodeMapping,
) -> CamouflagedNetlist:
    """Realize the functional circuit inside the appearance structure.

    Matched realizable pairs become covert cells; every other appearance
    node survives as a decoy, and every unrealized functional node is
    inserted as an exposed plain cell.  The function view is wired to be
    exactly the functional circuit, so functional predecessors that the
    appearance lacks are added as real pins on both views.  Decoy pins
    and decoy output markers are tagged so the function view hides them.
    """
    a_of_f = mapping.appearance_of()
    used_ids = {nd.id for nd in appearance.nodes}

    def fresh(base: str) -> str:
        nid = base
        while nid in used_ids:
            nid = nid + "~x"
        used_ids.add(nid)
        return nid

    realizer: dict[str, str] = {}
    exposed: dict[str, str] = {}
    demoted: set[str] = set()

    # decide the fate of every functional node first
    for f_node in functional.nodes:
        a_id = a_of_f.get(f_node.id)
        if a_id is not None:
            a_node = appearance.node(a_id)
            if f_node.kind is GateType.INPUT or _realizable(a_node, f_node):
                realizer[f_node.id] = a_id
                continue
            demoted.add(a_id)
        exposed[f_node.id] = fresh(f_node.id)
        realizer[f_node.id] = exposed[f_node.id]

    cells = []
    inputs: list[CamoPort] = []
    taken_in_names: set[str] = set()

    # functional inputs, in functional declaration order
    for pf in functional.inputs:
        inputs.append(CamoPort(realizer[pf.node], pf.name, decoy=False))
        taken_in_names.add(pf.name)

    # appearance nodes keep their declaration order
    f_by_realizer = {realizer[f_node.id]: f_node for f_node in functional.nodes}

    for a_node in appearance.nodes:
        f_node = f_by_realizer.get(a_node.id)
        if f_node is not None and a_node.id not in demoted:
            if f_node.kind is GateType.INPUT:
                cells.append(identity_cell(a_node.id, GateType.INPUT, ()))
                continue
            true_fanin = tuple(realizer[s] for s in f_node.fanin)
            if f_node.kind in _CONSTS:
                apparent_fanin = a_node.fanin
            elif a_node.kind in (GateType.NOT, GateType.BUF):
                apparent_fanin = true_fanin
            else:
                apparent_fanin = list(a_node.fanin)
                present = set(apparent_fanin)
                for s in true_fanin:
                    if s not in present:
                        apparent_fanin.append(s)
                        present.add(s)
                apparent_fanin = tuple(apparent_fanin)
            cells.append(
                make_cell(a_node.id, a_node.kind, apparent_fanin, f_node.kind, true_fanin)
            )
        elif a_node.kind is GateType.INPUT:
            cells.append(decoy_cell(a_node.id, GateType.INPUT, ()))
            pa = next(p for p in appearance.inputs if p.node == a_node.id)
            name = pa.name
            while name in taken_in_names:
                name = name + "~d"
            taken_in_names.add(name)
            inputs.append(CamoPort(a_node.id, name, decoy=True))
        else:
            cells.append(decoy_cell(a_node.id, a_node.kind, a_node.fanin))

    # exposed functional cells, in functional declaration order
    for f_node in functional.nodes:
        rid = exposed.get(f_node.id)
        if rid is None:
            continue
        if f_node.kind is GateType.INPUT:
            cells.append(identity_cell(rid, GateType.INPUT, ()))
        else:
            true_fanin = tuple(realizer[s] for s in f_node.fanin)
            cells.append(identity_cell(rid, f_node.kind, true_fanin))

    outputs: list[CamoPort] = [
        CamoPort(realizer[pf.node], pf.name, decoy=False) for pf in functional.outputs
    ]
    taken_out = {p.name for p in outputs}
    marked_nodes = {p.node for p in outputs}
    for pa in appearance.outputs:
        if pa.name in taken_out or pa.node in marked_nodes:
            continue
        outputs.append(CamoPort(pa.node, pa.name, decoy=True))
        taken_out.add(pa.name)
        marked_nodes.add(pa.node)

    return CamouflagedNetlist(tuple(cells), tuple(inputs), tuple(outputs))
