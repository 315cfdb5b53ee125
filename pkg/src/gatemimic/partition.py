"""Spectral-seeded circuit partitioning with pairwise refinement and IO balancing.

Three phases.  A coarse split embeds the circuit's undirected connection
graph with the low eigenvectors of its normalized Laplacian and clusters
the rows with k-means.  A refinement phase then sweeps Kernighan-Lin
style swaps over block pairs to lower the edge cut, and a final greedy
phase moves single boundary nodes to trade cut size against the spread
of per-block port counts.  The phases are deterministic for a fixed seed.

The module also splits a netlist into standalone per-block pieces with
pseudo ports at crossing nets, and recombines camouflaged pieces back
into one circuit by resolving pseudo inputs to their producers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gatemimic.covert import CamoPort, CamouflagedNetlist, CovertCell, make_cell
from gatemimic.netlist import GateType, Netlist, NetlistError, Node, Port


class PartitionError(Exception):
    pass


@dataclass(frozen=True)
class CircuitGraph:
    """Undirected weighted view of a netlist used by the partitioner.

    node_ids keeps the netlist declaration order; weights[i][j] counts
    distinct connecting pins between the two nodes (a multi-edge in the
    netlist still contributes each pin).  directed holds the original
    fan-in arcs with multiplicity for cut accounting.
    """

    node_ids: tuple[str, ...]
    weights: "np.ndarray"
    directed: tuple[tuple[int, int], ...]

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @staticmethod
    def from_netlist(netlist: Netlist) -> "CircuitGraph":
        ids = tuple(nd.id for nd in netlist.nodes)
        index = {nid: i for i, nid in enumerate(ids)}
        n = len(ids)
        W = np.zeros((n, n), dtype=float)
        arcs = []
        for nd in netlist.nodes:
            j = index[nd.id]
            for s in nd.fanin:
                i = index[s]
                arcs.append((i, j))
                if i != j:
                    W[i, j] += 1.0
                    W[j, i] += 1.0
        return CircuitGraph(ids, W, tuple(arcs))

    @staticmethod
    def from_edges(node_ids, edges) -> "CircuitGraph":
        ids = tuple(node_ids)
        index = {nid: i for i, nid in enumerate(ids)}
        n = len(ids)
        W = np.zeros((n, n), dtype=float)
        arcs = []
        for u, v in edges:
            i, j = index[u], index[v]
            arcs.append((i, j))
            if i != j:
                W[i, j] += 1.0
                W[j, i] += 1.0
        return CircuitGraph(ids, W, tuple(arcs))


@dataclass(frozen=True)
class PartitionConfig:
    k: int = 2
    cut_weight: float = 1.0
    io_weight: float = 0.5
    min_block: int = 1
    max_block: int | None = None
    seed: int = 0
    max_greedy_moves: int = 200
    kl_passes: int = 10

    def __post_init__(self):
        if self.k < 1:
            raise PartitionError(f"k must be positive, got {self.k}")
        if self.min_block < 1:
            raise PartitionError("min_block must be at least 1")


@dataclass(frozen=True)
class Partition:
    assignment: tuple[int, ...]
    k: int
    cut_size: int
    io_counts: tuple[int, ...]
    phase_trace: tuple[str, ...] = ()

    def blocks(self) -> list:
        out = [[] for _ in range(self.k)]
        for i, b in enumerate(self.assignment):
            out[b].append(i)
        return out


def cut_size(graph: CircuitGraph, assignment) -> int:
    a = np.asarray(assignment)
    return int(sum(1 for i, j in graph.directed if i != j and a[i] != a[j]))


def io_counts(graph: CircuitGraph, assignment, k: int) -> tuple[int, ...]:
    """Per-block port count: distinct nets entering plus distinct nets leaving.

    A net is one producing node.  Fanout outside the producer's block
    costs the producer one port total, and each consuming block one port,
    matching the pseudo port counts of the extracted pieces.
    """
    a = np.asarray(assignment)
    incoming = [set() for _ in range(k)]
    outgoing = [set() for _ in range(k)]
    for i, j in graph.directed:
        if i == j or a[i] == a[j]:
            continue
        incoming[a[j]].add(i)
        outgoing[a[i]].add(i)
    return tuple(len(incoming[b]) + len(outgoing[b]) for b in range(k))


def _io_spread(graph: CircuitGraph, assignment, k: int) -> float:
    return float(np.std(io_counts(graph, assignment, k)))


def _normalized_laplacian(W: "np.ndarray") -> "np.ndarray":
    d = W.sum(axis=1)
    inv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    L = -W * inv_sqrt[:, None] * inv_sqrt[None, :]
    np.fill_diagonal(L, np.where(d > 0, 1.0, 0.0))
    return L


_DENSE_EIG_LIMIT = 4000


def _low_eigenvectors(L: "np.ndarray", count: int, seed: int) -> "np.ndarray":
    """Eigenvectors of the smallest nonzero-index eigenvalues, skipping the first.

    Dense solve below the size limit; above it, subspace iteration on the
    spectrum-flipped operator converges to the same low end.
    """
    n = L.shape[0]
    want = min(count + 1, n)
    if n <= _DENSE_EIG_LIMIT:
        vals, vecs = np.linalg.eigh(L)
        order = np.argsort(vals)
        cols = order[1:want]
        return vecs[:, cols]
    rng = np.random.default_rng(seed)
    B = 2.0 * np.eye(n) - L
    X = rng.standard_normal((n, want))
    for _ in range(60):
        X = B @ X
        X, _ = np.linalg.qr(X)
    T = X.T @ L @ X
    tvals, tvecs = np.linalg.eigh(T)
    order = np.argsort(tvals)
    V = X @ tvecs[:, order]
    return V[:, 1:want]


def _kmeans(points: "np.ndarray", k: int, seed: int, n_init: int = 10) -> "np.ndarray":
    """Plain k-means with greedy seeding and best-of-n_init restarts."""
    n = points.shape[0]
    rng = np.random.default_rng(seed)
    best_labels, best_sse = None, np.inf
    for _restart in range(n_init):
        centers = _kmeans_pp(points, k, rng)
        labels = np.full(n, -1, dtype=int)
        for _sweep in range(100):
            d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = d2.argmin(axis=1)
            for c in range(k):
                if not (new_labels == c).any():
                    far = d2[np.arange(n), new_labels].argmax()
                    new_labels[far] = c
            if (new_labels == labels).all():
                break
            labels = new_labels
            for c in range(k):
                centers[c] = points[labels == c].mean(axis=0)
        sse = float(((points - centers[labels]) ** 2).sum())
        if sse < best_sse - 1e-12:
            best_sse, best_labels = sse, labels.copy()
    return best_labels


def _kmeans_pp(points: "np.ndarray", k: int, rng) -> "np.ndarray":
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[c] = points[int(rng.integers(n))]
        else:
            probs = d2 / total
            centers[c] = points[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((points - centers[c]) ** 2).sum(axis=1))
    return centers


def spectral_coarse(graph: CircuitGraph, k: int, seed: int) -> "np.ndarray":
    """Phase one: spectral embedding plus k-means over embedding rows.

    The embedding keeps the k-1 lowest nontrivial eigenvectors; the
    constant direction carries no split information, and for graphs of
    up to k components the kept columns still include the indicators.
    """
    n = graph.n
    if k >= n:
        return np.arange(n) % k if n else np.zeros(0, dtype=int)
    if k == 1:
        return np.zeros(n, dtype=int)
    L = _normalized_laplacian(graph.weights)
    V = _low_eigenvectors(L, k - 1, seed)
    return _kmeans(V, k, seed)


def kl_refine(graph: CircuitGraph, assignment, k: int, passes: int = 10) -> "np.ndarray":
    """Phase two: pairwise swap refinement over block pairs.

    Block pairs are visited in order of decreasing crossing count.  One
    pass over a pair greedily picks the best swap among boundary nodes,
    locks the two nodes, and repeats; the best prefix of the swap
    sequence is kept only when it strictly lowers the global cut.
    """
    a = np.asarray(assignment, dtype=int).copy()
    W = graph.weights
    for _ in range(passes):
        improved = False
        pair_cross = {}
        for i, j in graph.directed:
            if i == j or a[i] == a[j]:
                continue
            key = (min(a[i], a[j]), max(a[i], a[j]))
            pair_cross[key] = pair_cross.get(key, 0) + 1
        for (p, q), _cross in sorted(pair_cross.items(), key=lambda kv: (-kv[1], kv[0])):
            base_cut = cut_size(graph, a)
            trial = a.copy()
            sel = np.where((trial == p) | (trial == q))[0]
            locked: set = set()
            seq = []
            gains = []
            for _step in range(len(sel) // 2):
                best = None
                for u in sel:
                    if u in locked or trial[u] != p:
                        continue
                    for v in sel:
                        if v in locked or trial[v] != q:
                            continue
                        g = _swap_gain(W, trial, u, v)
                        if best is None or g > best[0]:
                            best = (g, u, v)
                if best is None:
                    break
                g, u, v = best
                trial[u], trial[v] = q, p
                locked.update((u, v))
                seq.append((u, v))
                gains.append(g)
            if not seq:
                continue
            prefix_sums = np.cumsum(gains)
            best_idx = int(prefix_sums.argmax())
            if prefix_sums[best_idx] <= 0:
                continue
            candidate = a.copy()
            for u, v in seq[: best_idx + 1]:
                candidate[u], candidate[v] = q, p
            if cut_size(graph, candidate) < base_cut:
                a = candidate
                improved = True
        if not improved:
            break
    return a


def _swap_gain(W: "np.ndarray", a, u: int, v: int) -> float:
    """Cut-weight reduction from swapping u and v between their two blocks.

    Only edges into the two blocks involved change status; the classic
    correction removes the double-counted direct edge between u and v.
    """
    p, q = a[u], a[v]
    d_u = W[u][a == q].sum() - W[u][a == p].sum()
    d_v = W[v][a == p].sum() - W[v][a == q].sum()
    return float(d_u + d_v - 2.0 * W[u, v])


def greedy_balance(
    graph: CircuitGraph,
    assignment,
    cfg: PartitionConfig,
) -> "np.ndarray":
    """Phase three: single-node moves scoring cut reduction plus IO evenness.

    Only boundary nodes move; a move is taken while its combined gain is
    positive and block size bounds stay satisfied.
    """
    a = np.asarray(assignment, dtype=int).copy()
    k = cfg.k
    n = graph.n
    max_block = cfg.max_block if cfg.max_block is not None else n
    for _move in range(cfg.max_greedy_moves):
        cur_cut = cut_size(graph, a)
        cur_spread = _io_spread(graph, a, k)
        sizes = np.bincount(a, minlength=k)
        best = None
        boundary = set()
        for i, j in graph.directed:
            if i != j and a[i] != a[j]:
                boundary.update((i, j))
        for u in sorted(boundary):
            src = a[u]
            if sizes[src] <= cfg.min_block:
                continue
            for dst in range(k):
                if dst == src or sizes[dst] >= max_block:
                    continue
                a[u] = dst
                gain = cfg.cut_weight * (cur_cut - cut_size(graph, a))
                gain += cfg.io_weight * (cur_spread - _io_spread(graph, a, k))
                a[u] = src
                if gain > 1e-12 and (best is None or gain > best[0]):
                    best = (gain, u, dst)
        if best is None:
            break
        _, u, dst = best
        a[u] = dst
    return a


def partition_pipeline(netlist: Netlist, cfg: PartitionConfig | None = None) -> Partition:
    """All three phases in sequence; records per-phase cut sizes."""
    cfg = cfg or PartitionConfig()
    graph = CircuitGraph.from_netlist(netlist)
    if graph.n == 0:
        return Partition((), cfg.k, 0, tuple([0] * cfg.k), ("empty",))
    if cfg.min_block * cfg.k > graph.n:
        raise PartitionError(
            f"cannot split {graph.n} nodes into {cfg.k} blocks of at least {cfg.min_block}"
        )
    a0 = spectral_coarse(graph, cfg.k, cfg.seed)
    a0 = _repair_bounds(graph, a0, cfg)
    c0 = cut_size(graph, a0)
    a1 = kl_refine(graph, a0, cfg.k, cfg.kl_passes)
    a1 = _repair_bounds(graph, a1, cfg)
    c1 = cut_size(graph, a1)
    a2 = greedy_balance(graph, a1, cfg)
    c2 = cut_size(graph, a2)
    trace = (f"spectral cut={c0}", f"refine cut={c1}", f"balance cut={c2}")
    return Partition(
        tuple(int(b) for b in a2),
        cfg.k,
        c2,
        io_counts(graph, a2, cfg.k),
        trace,
    )


def _repair_bounds(graph: CircuitGraph, assignment, cfg: PartitionConfig) -> "np.ndarray":
    """Force every block within [min_block, max_block] by moving cheapest nodes."""
    a = np.asarray(assignment, dtype=int).copy()
    k = cfg.k
    n = graph.n
    max_block = cfg.max_block if cfg.max_block is not None else n
    for _ in range(n * k):
        sizes = np.bincount(a, minlength=k)
        under = [b for b in range(k) if sizes[b] < cfg.min_block]
        over = [b for b in range(k) if sizes[b] > max_block]
        if not under and not over:
            break
        target = under[0] if under else None
        donors = over if over else [b for b in range(k) if sizes[b] > cfg.min_block]
        best = None
        for src in donors:
            dst_choices = [target] if target is not None else [
                b for b in range(k) if sizes[b] < max_block and b != src
            ]
            for u in np.where(a == src)[0]:
                for dst in dst_choices:
                    if dst is None or dst == src:
                        continue
                    a[u] = dst
                    c = cut_size(graph, a)
                    a[u] = src
                    if best is None or c < best[0]:
                        best = (c, u, dst)
        if best is None:
            break
        _, u, dst = best
        a[u] = dst
    return a


# ---------------------------------------------------------------------------
# piece extraction and recombination


@dataclass(frozen=True)
class BoundaryMap:
    """Bookkeeping to reassemble pieces: who produces every crossing net."""

    producers: dict
    export_names: dict
    pseudo_inputs: tuple
    pseudo_outputs: tuple
    pi_order: tuple
    pi_blocks: tuple
    po_order: tuple
    po_blocks: tuple


def extract_pieces(netlist: Netlist, part: Partition) -> tuple:
    """Split into per-block standalone netlists with pseudo ports.

    A net crossing from block p to block q appears as an output marker
    of piece p and as an INPUT node of piece q named by the original net
    id.  Real output markers are kept as well; when a crossing node
    already carries a marker under its own id no second one is added.
    """
    ids = [nd.id for nd in netlist.nodes]
    if len(part.assignment) != len(ids):
        raise PartitionError("partition does not cover the netlist")
    block_of = {nid: part.assignment[i] for i, nid in enumerate(ids)}
    order = {nid: i for i, nid in enumerate(ids)}
    k = part.k
    po_names: dict[str, list] = {}
    for p in netlist.outputs:
        po_names.setdefault(p.node, []).append(p.name)

    crossing: dict[str, set] = {}
    for nd in netlist.nodes:
        for s in nd.fanin:
            if block_of[s] != block_of[nd.id]:
                crossing.setdefault(s, set()).add(block_of[nd.id])

    pieces = []
    pseudo_ins: list[tuple] = []
    pseudo_outs: list[tuple] = []
    export_names: dict[str, str] = {}
    for b in range(k):
        nodes: list[Node] = []
        inputs: list[Port] = []
        outputs: list[Port] = []
        member = [nd for nd in netlist.nodes if block_of[nd.id] == b]
        needed = sorted(
            {s for nd in member for s in nd.fanin if block_of[s] != b},
            key=order.get,
        )
        for s in needed:
            nodes.append(Node(s, GateType.INPUT, ()))
            inputs.append(Port(s, s))
            pseudo_ins.append((b, s))
        taken = {name for nid in (nd.id for nd in member) for name in po_names.get(nid, [])}
        for nd in member:
            nodes.append(nd)
            if nd.kind is GateType.INPUT:
                src = next(p for p in netlist.inputs if p.node == nd.id)
                inputs.append(Port(nd.id, src.name))
            for name in po_names.get(nd.id, []):
                outputs.append(Port(nd.id, name))
            if nd.id in crossing:
                if nd.id in po_names.get(nd.id, []):
                    export = nd.id
                else:
                    export = nd.id
                    while export in taken:
                        export = export + "~n"
                    taken.add(export)
                    outputs.append(Port(nd.id, export))
                export_names[nd.id] = export
                pseudo_outs.append((b, nd.id))
        pieces.append(Netlist(tuple(nodes), tuple(inputs), tuple(outputs)))

    producers = {s: block_of[s] for s in crossing}
    bmap = BoundaryMap(
        producers=producers,
        export_names=export_names,
        pseudo_inputs=tuple(pseudo_ins),
        pseudo_outputs=tuple(pseudo_outs),
        pi_order=tuple(p.name for p in netlist.inputs),
        pi_blocks=tuple(block_of[p.node] for p in netlist.inputs),
        po_order=tuple(p.name for p in netlist.outputs),
        po_blocks=tuple(block_of[p.node] for p in netlist.outputs),
    )
    return tuple(pieces), bmap


def recombine(camo_pieces, bmap: BoundaryMap) -> CamouflagedNetlist:
    """Stitch camouflaged pieces back into one camouflaged netlist.

    Cell ids are kept verbatim and qualified per piece only on
    collision, so recombining identity pieces reproduces the original
    ids.  Every pseudo input cell is deleted and its readers are rewired
    to the producer cell in the producing piece, located by its
    non-decoy output marker named after the crossing net's export name.
    Original input and output orders are restored; export markers and
    decoy markers vanish.
    """
    camo_pieces = tuple(camo_pieces)
    resolve: dict[tuple, str] = {}

    pseudo = set(bmap.pseudo_inputs)
    for b, camo in enumerate(camo_pieces):
        for port in camo.inputs:
            if (b, port.name) in pseudo:
                resolve[(b, port.node)] = port.name

    counts: dict[str, int] = {}
    for b, camo in enumerate(camo_pieces):
        for c in camo.cells:
            if (b, c.id) not in resolve:
                counts[c.id] = counts.get(c.id, 0) + 1

    def final(b: int, cid: str) -> str:
        return cid if counts.get(cid) == 1 else f"p{b}:{cid}"

    producer_cell: dict[str, str] = {}
    for net, b in bmap.producers.items():
        export = bmap.export_names[net]
        camo = camo_pieces[b]
        hit = next((p for p in camo.outputs if p.name == export and not p.decoy), None)
        if hit is None:
            raise NetlistError(f"piece {b} lost crossing net {net!r}")
        producer_cell[net] = final(b, hit.node)

    def rewire(b: int, signal: str) -> str:
        if (b, signal) in resolve:
            return producer_cell[resolve[(b, signal)]]
        return final(b, signal)

    qualified: list[CovertCell] = []
    for b, camo in enumerate(camo_pieces):
        for c in camo.cells:
            if (b, c.id) in resolve:
                continue
            qualified.append(
                CovertCell(
                    id=final(b, c.id),
                    apparent_kind=c.apparent_kind,
                    apparent_fanin=tuple(rewire(b, s) for s in c.apparent_fanin),
                    true_kind=c.true_kind,
                    true_fanin=tuple(rewire(b, s) for s in c.true_fanin),
                    dummy_positions=c.dummy_positions,
                )
            )

    inputs: list[CamoPort] = []
    seen_names: set = set()
    for name, b in zip(bmap.pi_order, bmap.pi_blocks):
        camo = camo_pieces[b]
        hit = next((p for p in camo.inputs if p.name == name and not p.decoy), None)
        if hit is None:
            raise NetlistError(f"recombine lost input {name!r}")
        inputs.append(CamoPort(final(b, hit.node), name, decoy=False))
        seen_names.add(name)
    for b, camo in enumerate(camo_pieces):
        for p in camo.inputs:
            if not p.decoy or (b, p.node) in resolve:
                continue
            name = p.name
            while name in seen_names:
                name = name + "~d"
            inputs.append(CamoPort(final(b, p.node), name, decoy=True))
            seen_names.add(name)

    outputs: list[CamoPort] = []
    for name, b in zip(bmap.po_order, bmap.po_blocks):
        camo = camo_pieces[b]
        hit = next((p for p in camo.outputs if p.name == name and not p.decoy), None)
        if hit is None:
            raise NetlistError(f"recombine lost output {name!r}")
        outputs.append(CamoPort(final(b, hit.node), name, decoy=False))

    cells = _break_apparent_cycles(qualified, inputs, outputs)
    return CamouflagedNetlist(tuple(cells), tuple(inputs), tuple(outputs))


def _break_apparent_cycles(cells, inputs, outputs) -> list:
    """Rewire camouflage-only pins until the apparent graph is acyclic.

    Cross-piece stitching can close a cycle through decoy structure even
    though the true graph stays acyclic.  Any such cycle runs through a
    dummy pin or a dead cell, so rewiring those pins to an already
    placed signal always unblocks a stalled topological sort without
    touching the live function.
    """
    by_id = {c.id: c for c in cells}

    live: set = set()
    stack = [p.node for p in outputs if not p.decoy]
    while stack:
        nid = stack.pop()
        if nid in live:
            continue
        live.add(nid)
        stack.extend(by_id[nid].true_fanin)

    placed: list = []
    placed_set: set = set()
    remaining = {c.id for c in cells}
    order = [c.id for c in cells]
    while remaining:
        progressed = False
        for cid in order:
            if cid not in remaining:
                continue
            if all(s in placed_set for s in by_id[cid].apparent_fanin):
                placed.append(cid)
                placed_set.add(cid)
                remaining.discard(cid)
                progressed = True
        if progressed:
            continue
        fixed = False
        for cid in order:
            if cid not in remaining:
                continue
            c = by_id[cid]
            loose = [
                i
                for i, s in enumerate(c.apparent_fanin)
                if s not in placed_set and (i in c.dummy_positions or cid not in live)
            ]
            blocked = {s for s in c.apparent_fanin if s not in placed_set}
            if not loose or blocked - {c.apparent_fanin[i] for i in loose}:
                continue
            if not placed:
                break
            anchor = placed[0]
            apparent = list(c.apparent_fanin)
            true = list(c.true_fanin)
            for i in loose:
                old = apparent[i]
                apparent[i] = anchor
                if cid not in live:
                    true = [anchor if s == old else s for s in true]
            by_id[cid] = make_cell(
                c.id, c.apparent_kind, tuple(apparent), c.true_kind, tuple(true)
            )
            fixed = True
            break
        if not fixed:
            raise NetlistError("could not break a cycle in the stitched appearance")
    return [by_id[c.id] for c in cells]
