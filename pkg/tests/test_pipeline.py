"""End-to-end orchestration: pairing, piece processing, recombination."""

import json

import numpy as np
import pytest

from gatemimic.covert import camo_from_dict
from gatemimic.nand_array import TrainConfig
from gatemimic.netlist import load_bench, parse_bench, truth_table
from gatemimic.pipeline import (
    PipelineConfig,
    PipelineInputError,
    pair_pieces,
    run_pipeline,
)

from helpers import bench_path, load


def run(tmp_path, functional="c17", appearance="mux_4", **kw):
    kw.setdefault("method", "graph_match")
    kw.setdefault("k_partitions", 1)
    cfg = PipelineConfig(out_dir=str(tmp_path / "run"), **kw)
    return run_pipeline(bench_path(functional), bench_path(appearance), cfg), cfg


class TestConfig:
    def test_unknown_method_rejected(self):
        with pytest.raises(PipelineInputError):
            PipelineConfig(method="resynthesis")

    def test_nonpositive_k_rejected(self):
        with pytest.raises(PipelineInputError):
            PipelineConfig(k_partitions=0)

    def test_missing_input_file_raises_input_error(self, tmp_path):
        cfg = PipelineConfig(out_dir=str(tmp_path))
        with pytest.raises(PipelineInputError):
            run_pipeline(tmp_path / "nope.bench", bench_path("c17"), cfg)


class TestPairing:
    def test_equal_counts_pair_by_size_rank(self):
        f = [load("c17"), load("mux_2")]
        a = [load("xor4"), load("adder2")]
        pairs = pair_pieces(f, a)
        assert [p.flag for p in pairs] == ["paired", "paired"]
        # largest functional piece gets the largest appearance piece
        by_nodes = lambda n: len(n.nodes)
        assert by_nodes(pairs[0].functional) >= by_nodes(pairs[1].functional)
        assert by_nodes(pairs[0].appearance) >= by_nodes(pairs[1].appearance)

    def test_surplus_functional_pieces_flagged_exposed(self):
        pairs = pair_pieces([load("c17"), load("mux_2"), load("xor4")],
                            [load("adder2"), load("decoder2")])
        assert sorted(p.flag for p in pairs) == ["exposed", "paired", "paired"]

    def test_surplus_appearance_pieces_flagged_decoy(self):
        pairs = pair_pieces([load("c17")], [load("adder2"), load("mux_2")])
        assert sorted(p.flag for p in pairs) == ["decoy", "paired"]

    def test_pairing_ignores_input_order(self):
        f = [load("c17"), load("mux_2"), load("xor4")]
        a = [load("adder2"), load("decoder2"), load("mux_4")]
        one = pair_pieces(f, a)
        other = pair_pieces(f[::-1], a[::-1])
        key = lambda pairs: [
            (p.functional_block is not None, len(p.functional.nodes) if p.functional else 0,
             len(p.appearance.nodes) if p.appearance else 0)
            for p in pairs
        ]
        assert key(one) == key(other)


class TestGraphMatchFlow:
    def test_c17_in_mux4_single_block_is_exact(self, tmp_path):
        manifest, cfg = run(tmp_path, seed=5)
        assert manifest["aggregate"]["functional_accuracy"] == 100.0
        assert manifest["aggregate"]["accuracy_ok"]

    def test_partitioned_flow_stays_exact(self, tmp_path):
        for name_f, name_a, k in [("c17", "mux_4", 2), ("adder2", "xor4", 2),
                                  ("mux_2", "decoder2", 3)]:
            manifest, _ = run(tmp_path / f"{name_f}{k}", functional=name_f,
                              appearance=name_a, k_partitions=k, seed=3)
            assert manifest["aggregate"]["functional_accuracy"] == 100.0, (name_f, name_a)

    def test_artifacts_exist_and_reparse(self, tmp_path):
        manifest, cfg = run(tmp_path, k_partitions=2, seed=1)
        out = tmp_path / "run"
        doc = json.loads((out / "manifest.json").read_text())
        assert doc["aggregate"] == manifest["aggregate"]
        for piece_file in out.glob("piece_*.bench"):
            parse_bench(piece_file.read_text())
        camo = camo_from_dict(json.loads((out / "camo.json").read_text()))
        ref = load("c17")
        assert np.array_equal(truth_table(camo.function_view()), truth_table(ref))

    def test_surplus_appearance_blocks_become_decoys(self, tmp_path):
        # mux_2 has fewer nodes than 8 blocks need, c17 does not, so the
        # appearance side ends up with more pieces than the function side
        manifest, _ = run(tmp_path, functional="mux_2", appearance="c17",
                          k_partitions=8, seed=2)
        flags = [p["flag"] for p in manifest["pieces"]]
        assert "decoy" in flags
        assert manifest["aggregate"]["functional_accuracy"] == 100.0
        camo = camo_from_dict(json.loads((tmp_path / "run" / "camo.json").read_text()))
        assert any(p.decoy for p in camo.inputs)
        view = camo.function_view()
        assert np.array_equal(truth_table(view), truth_table(load("mux_2")))

    def test_metrics_are_deterministic_across_runs(self, tmp_path):
        m1, _ = run(tmp_path / "a", k_partitions=2, seed=9)
        m2, _ = run(tmp_path / "b", k_partitions=2, seed=9)
        m1.pop("timings"), m2.pop("timings")
        m1["config"].pop("out_dir", None), m2["config"].pop("out_dir", None)
        assert m1["pieces"] == m2["pieces"]
        assert m1["aggregate"] == m2["aggregate"]
        assert m1["partition"] == m2["partition"]

    def test_parallel_jobs_do_not_change_results(self, tmp_path):
        cfg1 = PipelineConfig(out_dir=str(tmp_path / "s"), k_partitions=2, seed=4)
        cfg2 = PipelineConfig(out_dir=str(tmp_path / "p"), k_partitions=2, seed=4)
        m1 = run_pipeline(bench_path("c17"), bench_path("mux_4"), cfg1, jobs=1)
        m2 = run_pipeline(bench_path("c17"), bench_path("mux_4"), cfg2, jobs=2)
        assert m1["pieces"] == m2["pieces"]
        assert m1["aggregate"] == m2["aggregate"]


class TestNandArrayFlow:
    def test_single_block_seeded_function_is_exact_at_zero_epochs(self, tmp_path):
        # the warm start plants the function wiring, so even an untrained
        # array extracts a function view that matches the hidden circuit
        manifest, _ = run(tmp_path, method="nand_array", seed=1,
                          train=TrainConfig(epochs=0))
        assert manifest["aggregate"]["functional_accuracy"] == 100.0
        piece = manifest["pieces"][0]
        assert piece["acc_p1"] == 1.0
        assert piece["violations"] == 0

    def test_short_training_run_records_piece_metrics(self, tmp_path):
        manifest, _ = run(tmp_path, method="nand_array", seed=2,
                          train=TrainConfig(epochs=30, restarts=1))
        piece = manifest["pieces"][0]
        assert set(piece) >= {"acc_p0", "acc_p1", "violations", "kept_nodes", "seed"}
        assert manifest["aggregate"]["overheads"]["area_ratio"] > 0
