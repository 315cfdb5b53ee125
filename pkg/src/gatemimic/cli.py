"""Command line front end.

Subcommands mirror the library stages: parse, partition, match,
synth-nand, evaluate, and the one-shot pipeline.  Exit codes are part
of the contract: 0 success, 1 result below the accuracy threshold,
2 unusable input, 3 internal failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from dataclasses import asdict
from pathlib import Path

from gatemimic import __version__
from gatemimic.covert import camo_from_dict, camo_to_dict
from gatemimic.matching import CostConfig, deploy_covert, mapping_to_dict, match_graphs
from gatemimic.metrics import (
    DeceptionInput,
    appearance_fidelity,
    decamo_resilience,
    deception_score,
    functional_accuracy,
    overheads,
)
from gatemimic.nand_array import TrainConfig, synthesize, write_trace_csv
from gatemimic.netlist import NetlistError, levelize, load_bench, write_bench
from gatemimic.partition import PartitionConfig, partition_pipeline
from gatemimic.pipeline import PipelineConfig, PipelineInputError, run_pipeline

EXIT_OK = 0
EXIT_BELOW_THRESHOLD = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

INPUT_ERRORS = (OSError, NetlistError, PipelineInputError, json.JSONDecodeError)


def _read_config(path) -> dict:
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict):
        raise PipelineInputError(f"config {path} must hold a JSON object")
    return doc


def _build(cls, overrides: dict, **fixed):
    """Dataclass from config-file overrides plus explicit flag values."""
    known = {f for f in cls.__dataclass_fields__}
    bad = set(overrides) - known
    if bad:
        raise PipelineInputError(f"unknown {cls.__name__} keys: {sorted(bad)}")
    merged = dict(overrides)
    merged.update({k: v for k, v in fixed.items() if v is not None})
    try:
        return cls(**merged)
    except (TypeError, ValueError) as exc:
        raise PipelineInputError(str(exc)) from exc


def _emit(doc: dict, out_path) -> None:
    text = json.dumps(doc, indent=1)
    if out_path:
        Path(out_path).write_text(text)
    else:
        print(text)


# -- subcommand bodies --------------------------------------------------------------


def _cmd_parse(args) -> int:
    net = load_bench(args.netlist)
    if args.out:
        Path(args.out).write_text(write_bench(net))
    print(
        json.dumps(
            {
                "file": args.netlist,
                "inputs": len(net.inputs),
                "outputs": len(net.outputs),
                "gates": len(net.gates()),
                "nodes": len(net.nodes),
                "edges": net.edge_count(),
                "depth": levelize(net).depth,
            },
            indent=1,
        )
    )
    return EXIT_OK


def _cmd_partition(args) -> int:
    net = load_bench(args.netlist)
    overrides = _read_config(args.config)
    cfg = _build(
        PartitionConfig,
        overrides,
        k=args.k,
        cut_weight=args.w_cut,
        io_weight=args.w_io,
        seed=args.seed,
    )
    part = partition_pipeline(net, cfg)
    _emit(
        {
            "k": part.k,
            "assignment": {nd.id: int(b) for nd, b in zip(net.nodes, part.assignment)},
            "cut_size": part.cut_size,
            "io_counts": list(part.io_counts),
            "phase_trace": list(part.phase_trace),
        },
        args.out,
    )
    return EXIT_OK


def _cmd_match(args) -> int:
    appearance = load_bench(args.appearance)
    functional = load_bench(args.function)
    cfg = _build(CostConfig, _read_config(args.config))
    mapping = match_graphs(appearance, functional, cfg)
    camo = deploy_covert(appearance, functional, mapping)
    _emit(camo_to_dict(camo), args.out)
    if args.mapping:
        Path(args.mapping).write_text(json.dumps(mapping_to_dict(mapping), indent=1))
    return EXIT_OK


def _cmd_synth_nand(args) -> int:
    appearance = load_bench(args.appearance)
    functional = load_bench(args.function)
    cfg = _build(TrainConfig, _read_config(args.config), epochs=args.epochs, seed=args.seed)
    out = synthesize(appearance, functional, cfg=cfg)
    _emit(camo_to_dict(out.camo), args.out)
    if args.trace:
        write_trace_csv(out.result.trace, args.trace)
    if args.checkpoint:
        Path(args.checkpoint).write_text(json.dumps(out.net.to_dict(), indent=1))
    print(
        json.dumps(
            {
                "acc_p0": out.result.acc_p0,
                "acc_p1": out.result.acc_p1,
                "violations": out.report.violations,
                "violation_rate": out.report.violation_rate,
                "kept_nodes": out.report.kept_nodes,
            },
            indent=1,
        )
    )
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    camo = camo_from_dict(json.loads(Path(args.camo).read_text()))
    functional = load_bench(args.function)
    report: dict = {"camo": args.camo}
    report["functional_accuracy"] = functional_accuracy(camo, functional, seed=args.seed or 0)
    report["overheads"] = asdict(overheads(camo, functional))
    if args.appearance:
        appearance = load_bench(args.appearance)
        report["appearance_fidelity"] = appearance_fidelity(camo, appearance)
    if args.f1:
        rows = json.loads(Path(args.f1).read_text())["rows"]
        scored = []
        for row in rows:
            d = DeceptionInput(row["f1_expose"], row["f1_mimicry"])
            s = deception_score(d)
            entry = {"name": row.get("name", ""), **asdict(d)}
            if s == float("inf"):
                entry["deception_score"] = "inf"
                entry["note"] = "expose rate is zero, the attacker never finds the function"
            else:
                entry["deception_score"] = s
            scored.append(entry)
        report["deception"] = scored
    if args.resilience:
        try:
            res = decamo_resilience(camo, functional)
            report["resilience"] = asdict(res)
        except ValueError as exc:
            report["resilience"] = {"skipped": str(exc)}
    _emit(report, args.out)
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    overrides = _read_config(args.config)
    sub = {
        "partition": _build(PartitionConfig, overrides.pop("partition", {})),
        "cost": _build(CostConfig, overrides.pop("cost", {})),
        "train": _build(TrainConfig, overrides.pop("train", {})),
    }
    cfg = _build(
        PipelineConfig,
        overrides,
        method=args.method,
        k_partitions=args.k_partitions,
        seed=args.seed,
        out_dir=args.out,
        accuracy_threshold=args.threshold,
        **sub,
    )
    manifest = run_pipeline(args.function, args.appearance, cfg, jobs=args.jobs or 1)
    acc = manifest["aggregate"]["functional_accuracy"]
    print(
        json.dumps(
            {
                "functional_accuracy": acc,
                "appearance_fidelity": manifest["aggregate"]["appearance_fidelity"],
                "area_ratio": manifest["aggregate"]["overheads"]["area_ratio"],
                "out_dir": cfg.out_dir,
            },
            indent=1,
        )
    )
    return EXIT_OK if acc >= cfg.accuracy_threshold else EXIT_BELOW_THRESHOLD


# -- argument wiring ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=None, help="root random seed")
    shared.add_argument("--jobs", type=int, default=None, help="parallel piece jobs")
    shared.add_argument("--config", default=None, help="JSON config overrides")

    top = argparse.ArgumentParser(prog="gatemimic", description=__doc__)
    top.add_argument("--version", action="version", version=f"gatemimic {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[shared], help="parse a .bench file and report stats")
    p.add_argument("netlist")
    p.add_argument("-o", "--out", default=None, help="write the canonical .bench form here")
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("partition", parents=[shared], help="split a netlist into blocks")
    p.add_argument("netlist")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--w-cut", type=float, default=None)
    p.add_argument("--w-io", type=float, default=None)
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(func=_cmd_partition)

    p = sub.add_parser("match", parents=[shared], help="hide one circuit inside another's shape")
    p.add_argument("--appearance", required=True)
    p.add_argument("--function", required=True)
    p.add_argument("--mapping", default=None, help="also write the node mapping here")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(func=_cmd_match)

    p = sub.add_parser("synth-nand", parents=[shared], help="train a dual-behavior NAND array")
    p.add_argument("--appearance", required=True)
    p.add_argument("--function", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--trace", default=None, help="write the training trace CSV here")
    p.add_argument("--checkpoint", default=None, help="write the model checkpoint here")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(func=_cmd_synth_nand)

    p = sub.add_parser("evaluate", parents=[shared], help="score a camouflaged netlist")
    p.add_argument("--camo", required=True)
    p.add_argument("--function", required=True)
    p.add_argument("--appearance", default=None)
    p.add_argument("--f1", default=None, help="JSON with attacker F1 rows to score")
    p.add_argument("--resilience", action="store_true")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("pipeline", parents=[shared], help="partition, camouflage, recombine")
    p.add_argument("--function", required=True)
    p.add_argument("--appearance", required=True)
    p.add_argument("--method", default=None, choices=("graph_match", "nand_array"))
    p.add_argument("--k-partitions", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None, help="accuracy gate for exit code 0")
    p.add_argument("-o", "--out", "--out-dir", dest="out", default=None)
    p.set_defaults(func=_cmd_pipeline)

    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValueError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
