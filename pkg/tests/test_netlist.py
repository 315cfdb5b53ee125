"""Netlist core: parsing, writing, levelization, and simulation."""

import random

import numpy as np
import pytest

from gatemimic.netlist import (
    BenchParseError,
    CycleError,
    GateType,
    Netlist,
    NetlistError,
    Node,
    Port,
    TruthTableCapError,
    levelize,
    load_bench,
    parse_bench,
    simulate,
    truth_table,
    write_bench,
)
from helpers import CORPUS, bench_path, random_netlist, ref_outputs, ref_truth_table


@pytest.fixture(scope="module")
def c17():
    return load_bench(bench_path("c17"))


class TestParse:
    def test_c17_shape(self, c17):
        assert c17.input_names == ("1", "2", "3", "6", "7")
        assert c17.output_names == ("22", "23")
        gates = c17.gates()
        assert len(gates) == 6
        assert all(g.kind is GateType.NAND for g in gates)
        assert len(c17.nodes) == 11

    def test_gate_order_preserved(self, c17):
        gate_ids = [g.id for g in c17.gates()]
        assert gate_ids == ["10", "11", "16", "19", "22", "23"]

    def test_keywords_case_insensitive(self):
        n = parse_bench("INPUT(a)\noutput(y)\ny = nand(a, a)\n")
        assert n.node("y").kind is GateType.NAND

    def test_comments_and_blank_lines(self):
        n = parse_bench("# header\n\nINPUT(a)  # trailing\nOUTPUT(a)\n")
        assert n.input_names == ("a",)

    def test_forward_reference_allowed(self):
        n = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(t)\nt = BUF(a)\n")
        assert n.node("y").fanin == ("t",)

    def test_syntax_error_reports_line(self):
        with pytest.raises(BenchParseError) as e:
            parse_bench("INPUT(a)\nOUTPUT(y)\ny = NAND(a\n")
        assert e.value.line == 3

    def test_undefined_signal(self):
        with pytest.raises(BenchParseError, match="undefined signal 'b'"):
            parse_bench("INPUT(a)\nOUTPUT(y)\ny = NAND(a, b)\n")

    def test_undefined_output(self):
        with pytest.raises(BenchParseError, match="undefined"):
            parse_bench("INPUT(a)\nOUTPUT(z)\n")

    def test_duplicate_definition(self):
        with pytest.raises(BenchParseError, match="duplicate"):
            parse_bench("INPUT(a)\nINPUT(a)\nOUTPUT(a)\n")
        with pytest.raises(BenchParseError, match="duplicate"):
            parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\ny = BUF(a)\n")

    def test_unknown_gate(self):
        with pytest.raises(BenchParseError, match="unknown gate"):
            parse_bench("INPUT(a)\nOUTPUT(y)\ny = DFF(a)\n")

    def test_unary_arity_enforced(self):
        with pytest.raises(BenchParseError, match="exactly one"):
            parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NOT(a, b)\n")

    def test_binary_arity_enforced(self):
        with pytest.raises(BenchParseError, match="at least two"):
            parse_bench("INPUT(a)\nOUTPUT(y)\ny = NAND(a)\n")

    def test_cycle_detected(self):
        with pytest.raises(CycleError):
            parse_bench("INPUT(a)\nOUTPUT(y)\ny = NAND(a, z)\nz = NAND(a, y)\n")


class TestNetlistValidation:
    def test_duplicate_node_id(self):
        with pytest.raises(NetlistError, match="duplicate node id"):
            Netlist(
                (Node("a", GateType.INPUT), Node("a", GateType.INPUT)),
                (Port("a", "a"),),
                (),
            )

    def test_input_port_must_be_input_node(self):
        with pytest.raises(NetlistError, match="INPUT node"):
            Netlist(
                (Node("a", GateType.INPUT), Node("y", GateType.NOT, ("a",))),
                (Port("a", "a"), Port("y", "y")),
                (),
            )

    def test_every_input_node_needs_port(self):
        with pytest.raises(NetlistError, match="without a port"):
            Netlist((Node("a", GateType.INPUT),), (), ())

    def test_output_marker_not_node(self):
        with pytest.raises(NetlistError, match="port marker"):
            Netlist((Node("y", GateType.OUTPUT, ("y",)),), (), ())

    def test_consts_are_sources(self):
        n = Netlist(
            (Node("k", GateType.CONST1), Node("y", GateType.NOT, ("k",))),
            (),
            (Port("y", "y"),),
        )
        assert truth_table(n).tolist() == [[0]]


class TestLevelize:
    def test_c17_layers(self, c17):
        lv = levelize(c17)
        assert lv.layers[0] == ("1", "2", "3", "6", "7")
        assert set(lv.layers[1]) == {"10", "11"}
        assert set(lv.layers[2]) == {"16", "19"}
        assert set(lv.layers[3]) == {"22", "23"}
        assert lv.depth == 3

    def test_level_is_longest_path(self):
        # y reads both a (level 0) and c (level 2): longest path wins
        n = parse_bench(
            "INPUT(a)\nOUTPUT(y)\nb = NOT(a)\nc = NOT(b)\ny = NAND(a, c)\n"
        )
        lv = levelize(n)
        assert lv.level_of["y"] == 3

    def test_pi_only(self):
        n = parse_bench("INPUT(a)\nOUTPUT(a)\n")
        assert levelize(n).depth == 0


class TestSimulate:
    def test_c17_corner_rows(self, c17):
        zeros = simulate(c17, {k: 0 for k in "12367"})
        assert (zeros["22"], zeros["23"]) == (0, 0)
        ones = simulate(c17, {k: 1 for k in "12367"})
        assert (ones["22"], ones["23"]) == (1, 0)

    def test_missing_input_rejected(self, c17):
        with pytest.raises(NetlistError, match="missing assignment"):
            simulate(c17, {"1": 0})

    def test_not_truth_table(self):
        n = parse_bench("INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n")
        assert truth_table(n)[:, 0].tolist() == [1, 0]

    def test_nand_truth_table(self):
        n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)\n")
        assert truth_table(n)[:, 0].tolist() == [1, 1, 1, 0]

    def test_cap_refused(self):
        rng = random.Random(5)
        n = random_netlist(rng, 4, 21)
        with pytest.raises(TruthTableCapError):
            truth_table(n)

    @pytest.mark.parametrize("name", CORPUS)
    def test_against_reference_evaluator(self, name):
        n = load_bench(bench_path(name))
        tt = truth_table(n)
        assert tt.tolist() == [list(r) for r in ref_truth_table(n)]

    def test_random_netlists_against_reference(self):
        rng = random.Random(1234)
        for _ in range(25):
            n = random_netlist(rng, rng.randint(3, 40), rng.randint(1, 8))
            tt = truth_table(n)
            assert tt.tolist() == [list(r) for r in ref_truth_table(n)]

    def test_table_row_matches_single_simulation(self, c17):
        tt = truth_table(c17)
        rng = random.Random(7)
        for _ in range(8):
            i = rng.randrange(32)
            bits = [(i >> (4 - j)) & 1 for j in range(5)]
            row = simulate(c17, dict(zip(c17.input_names, bits)))
            assert [row[o] for o in c17.output_names] == tt[i].tolist()


class TestRoundTrip:
    @pytest.mark.parametrize("name", CORPUS)
    def test_corpus_round_trip(self, name):
        n1 = load_bench(bench_path(name))
        n2 = parse_bench(write_bench(n1))
        assert n2.nodes == n1.nodes
        assert n2.inputs == n1.inputs
        assert n2.outputs == n1.outputs

    def test_random_round_trip(self):
        rng = random.Random(99)
        for _ in range(20):
            n1 = random_netlist(rng, rng.randint(2, 30), rng.randint(1, 6))
            n2 = parse_bench(write_bench(n1))
            assert n2.nodes == n1.nodes
            assert (n2.inputs, n2.outputs) == (n1.inputs, n1.outputs)

    def test_write_empty(self):
        n = Netlist((), (), ())
        assert parse_bench(write_bench(n)).nodes == ()

    def test_renamed_ports_round_trip_by_name(self):
        # derived views can carry port names that differ from node ids
        n = Netlist(
            (Node("x0", GateType.INPUT), Node("g", GateType.NOT, ("x0",))),
            (Port("x0", "a"),),
            (Port("g", "y"),),
        )
        n2 = parse_bench(write_bench(n))
        assert n2.input_names == ("a",)
        assert n2.output_names == ("y",)
        assert truth_table(n2).tolist() == truth_table(n).tolist()
