"""Partition-process-recombine orchestration.

Both circuits are split into the same number of pieces, pieces are paired
by size rank, every pair is camouflaged by the chosen method, and the
camouflaged pieces are stitched back together and scored.  All artifacts
land in one output directory together with a manifest whose metric fields
are a pure function of (inputs, config, seed); wall-clock timings live in
a separate block so manifests stay comparable across runs.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np

from gatemimic.covert import (
    CamoPort,
    CamouflagedNetlist,
    camo_to_dict,
    decoy_camouflage,
    identity_camouflage,
)
from gatemimic.matching import CostConfig, deploy_covert, match_graphs
from gatemimic.metrics import appearance_fidelity, functional_accuracy, overheads
from gatemimic.nand_array import TrainConfig, synthesize
from gatemimic.netlist import Netlist, NetlistError, load_bench, write_bench
from gatemimic.partition import PartitionConfig, extract_pieces, partition_pipeline, recombine

METHODS = ("graph_match", "nand_array")


class PipelineInputError(ValueError):
    """Unusable inputs: missing files, parse failures, bad method names."""


@dataclass(frozen=True)
class PipelineConfig:
    method: str = "graph_match"
    k_partitions: int = 10
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    cost: CostConfig = field(default_factory=CostConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0
    out_dir: str = "out"
    accuracy_threshold: float = 90.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise PipelineInputError(
                f"unknown method {self.method!r}, expected one of {METHODS}"
            )
        if self.k_partitions < 1:
            raise PipelineInputError("k_partitions must be positive")


@dataclass(frozen=True)
class PiecePair:
    """One work unit: a functional piece, an appearance piece, or both."""

    functional: Netlist | None
    appearance: Netlist | None
    functional_block: int | None
    appearance_block: int | None

    @property
    def flag(self) -> str:
        if self.functional is None:
            return "decoy"
        if self.appearance is None:
            return "exposed"
        return "paired"


def _rank(pieces) -> list:
    """Block indices of nonempty pieces, largest gate count first."""
    order = sorted(
        (i for i, p in enumerate(pieces) if p.nodes),
        key=lambda i: (-len(pieces[i].nodes), i),
    )
    return order


def pair_pieces(pieces_f, pieces_a) -> list:
    """Pair pieces by node-count rank; surplus on either side is flagged.

    The pairing rule is a reconstruction: size rank is deterministic and
    puts the largest hiding place around the largest payload.
    """
    rank_f = _rank(pieces_f)
    rank_a = _rank(pieces_a)
    pairs = []
    for i in range(max(len(rank_f), len(rank_a))):
        bf = rank_f[i] if i < len(rank_f) else None
        ba = rank_a[i] if i < len(rank_a) else None
        pairs.append(
            PiecePair(
                functional=pieces_f[bf] if bf is not None else None,
                appearance=pieces_a[ba] if ba is not None else None,
                functional_block=bf,
                appearance_block=ba,
            )
        )
    return pairs


def _derive_seed(root: int, *path: int) -> int:
    return int(np.random.SeedSequence([root, *path]).generate_state(1)[0])


def _merge_decoys(camo: CamouflagedNetlist, decoys) -> CamouflagedNetlist:
    """Attach appearance-only pieces as free-standing decoy structure."""
    cells = list(camo.cells)
    inputs = list(camo.inputs)
    outputs = list(camo.outputs)
    taken = {c.id for c in cells}
    for idx, piece in decoys:
        rename = {}
        for c in piece.cells:
            nid = f"d{idx}:{c.id}"
            while nid in taken:
                nid = nid + "~d"
            taken.add(nid)
            rename[c.id] = nid
        for c in piece.cells:
            cells.append(
                replace(
                    c,
                    id=rename[c.id],
                    apparent_fanin=tuple(rename[s] for s in c.apparent_fanin),
                    true_fanin=tuple(rename[s] for s in c.true_fanin),
                )
            )
        inputs.extend(
            CamoPort(rename[p.node], f"d{idx}:{p.name}", decoy=True) for p in piece.inputs
        )
        outputs.extend(
            CamoPort(rename[p.node], f"d{idx}:{p.name}", decoy=True) for p in piece.outputs
        )
    return CamouflagedNetlist(tuple(cells), tuple(inputs), tuple(outputs))


def _process_pair(pair: PiecePair, cfg: PipelineConfig, piece_seed: int) -> tuple:
    """Camouflage one work unit; returns (camo, per-piece metrics dict)."""
    info: dict = {
        "flag": pair.flag,
        "functional_block": pair.functional_block,
        "appearance_block": pair.appearance_block,
        "functional_nodes": len(pair.functional.nodes) if pair.functional else 0,
        "appearance_nodes": len(pair.appearance.nodes) if pair.appearance else 0,
        "seed": piece_seed,
    }
    if pair.functional is None:
        return decoy_camouflage(pair.appearance), info
    if pair.appearance is None:
        return identity_camouflage(pair.functional), info

    if cfg.method == "graph_match":
        mapping = match_graphs(pair.appearance, pair.functional, cfg.cost)
        camo = deploy_covert(pair.appearance, pair.functional, mapping)
        info["matched_pairs"] = len(mapping.pairs)
        info["matching_cost"] = mapping.total_cost
        return camo, info

    train_cfg = TrainConfig(
        epochs=cfg.train.epochs,
        learning_rate=cfg.train.learning_rate,
        lambda_reg=cfg.train.lambda_reg,
        lambda_cryptic=cfg.train.lambda_cryptic,
        hardness_gamma=cfg.train.hardness_gamma,
        tau_start=cfg.train.tau_start,
        tau_end=cfg.train.tau_end,
        batch_size=cfg.train.batch_size,
        mode=cfg.train.mode,
        seed=piece_seed,
    )
    synth = synthesize(pair.appearance, pair.functional, cfg=train_cfg)
    info["acc_p0"] = synth.result.acc_p0
    info["acc_p1"] = synth.result.acc_p1
    info["violations"] = synth.report.violations
    info["kept_nodes"] = synth.report.kept_nodes
    return synth.camo, info


def _pair_job(args) -> tuple:
    return _process_pair(*args)


def run_pipeline(f_path, a_path, cfg: PipelineConfig, jobs: int = 1) -> dict:
    """Execute the full flow and write artifacts; returns the manifest.

    The manifest's "metrics"-bearing fields (seeds, per-piece numbers,
    aggregate scores) are deterministic for fixed inputs and seed; the
    "timings" block is not and is kept separate on purpose.  Piece jobs
    are pure, so jobs > 1 fans them out across processes without
    changing any result.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings: list = []
    manifest: dict = {
        "config": {
            "method": cfg.method,
            "k_partitions": cfg.k_partitions,
            "seed": cfg.seed,
            "accuracy_threshold": cfg.accuracy_threshold,
            "train": asdict(cfg.train),
            "partition": asdict(cfg.partition),
            "cost": asdict(cfg.cost),
        },
        "inputs": {"functional": str(f_path), "appearance": str(a_path)},
    }

    def stage(name):
        timings.append({"stage": name, "started": time.time()})

    def stage_done():
        timings[-1]["seconds"] = time.time() - timings[-1].pop("started")

    stage("parse")
    try:
        functional = load_bench(f_path)
        appearance = load_bench(a_path)
    except (OSError, NetlistError) as exc:
        raise PipelineInputError(str(exc)) from exc
    stage_done()

    stage("partition")
    part_cfgs = []
    for which, net in (("functional", functional), ("appearance", appearance)):
        k = min(cfg.k_partitions, len(net.nodes))
        part_cfgs.append(
            PartitionConfig(
                k=k,
                cut_weight=cfg.partition.cut_weight,
                io_weight=cfg.partition.io_weight,
                min_block=cfg.partition.min_block,
                max_block=cfg.partition.max_block,
                max_greedy_moves=cfg.partition.max_greedy_moves,
                kl_passes=cfg.partition.kl_passes,
                seed=_derive_seed(cfg.seed, 0, 0 if which == "functional" else 1),
            )
        )
    part_f = partition_pipeline(functional, part_cfgs[0])
    part_a = partition_pipeline(appearance, part_cfgs[1])
    pieces_f, bmap = extract_pieces(functional, part_f)
    pieces_a, _ = extract_pieces(appearance, part_a)
    manifest["partition"] = {
        "functional": {
            "k": part_f.k,
            "cut": part_f.cut_size,
            "trace": list(part_f.phase_trace),
        },
        "appearance": {
            "k": part_a.k,
            "cut": part_a.cut_size,
            "trace": list(part_a.phase_trace),
        },
    }
    for b, piece in enumerate(pieces_f):
        (out / f"piece_f{b}.bench").write_text(write_bench(piece))
    for b, piece in enumerate(pieces_a):
        (out / f"piece_a{b}.bench").write_text(write_bench(piece))
    stage_done()

    stage("pair")
    pairs = pair_pieces(pieces_f, pieces_a)
    stage_done()

    stage("camouflage")
    by_block: dict[int, CamouflagedNetlist] = {}
    decoys = []
    piece_infos = []
    work = [(pair, cfg, _derive_seed(cfg.seed, 1, idx)) for idx, pair in enumerate(pairs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_pair_job, work))
    else:
        outcomes = [_pair_job(w) for w in work]
    for idx, (pair, (camo, info)) in enumerate(zip(pairs, outcomes)):
        info["index"] = idx
        piece_infos.append(info)
        (out / f"camo_piece{idx}.json").write_text(json.dumps(camo_to_dict(camo), indent=1))
        if pair.functional_block is None:
            decoys.append((idx, camo))
        else:
            by_block[pair.functional_block] = camo
    for b, piece in enumerate(pieces_f):
        if b not in by_block:
            by_block[b] = identity_camouflage(piece)
    manifest["pieces"] = piece_infos
    stage_done()

    stage("recombine")
    combined = recombine([by_block[b] for b in range(len(pieces_f))], bmap)
    combined = _merge_decoys(combined, decoys)
    (out / "camo.json").write_text(json.dumps(camo_to_dict(combined), indent=1))
    stage_done()

    stage("evaluate")
    accuracy = functional_accuracy(combined, functional, seed=_derive_seed(cfg.seed, 2))
    ov = overheads(combined, functional)
    fidelity = appearance_fidelity(combined, appearance)
    manifest["aggregate"] = {
        "functional_accuracy": accuracy,
        "appearance_fidelity": fidelity,
        "overheads": asdict(ov),
        "accuracy_ok": accuracy >= cfg.accuracy_threshold,
    }
    stage_done()

    manifest["timings"] = [{"stage": t["stage"], "seconds": t["seconds"]} for t in timings]
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    return manifest
