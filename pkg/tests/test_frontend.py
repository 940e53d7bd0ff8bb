"""Surface syntax, printer round-trips, CLI behaviour, exports."""

import random

import pytest

from _gen import random_proc_with_tests, random_state, random_flat
from modalg import dynamic as D
from modalg import flat as F
from modalg import lmumu as S
from modalg.cli import main
from modalg.core import Domain, Vocabulary, build_universe
from modalg.dynamic import build_transition_system
from modalg.export import render_dot, ts_to_json
from modalg.errors import SpecSyntaxError
from modalg.parser import parse_dyn, parse_flat, parse_spec, parse_state
from modalg.printer import to_text

DEMO = """
domain {a, b};
vocab {P/1, Q/1};

module FullP(P0/1) = structures { {P0: {(a),(b)}} };
module EmptyQ(Q0/1) = structures { {Q0: {}} };
module Nonempty(N0/1) = truth { (1) };

flat top = -bot;
flat same = sel[P == Q] top;
flat fullp = FullP(P);

dyn setp = FullP(out P);
dyn nil = diag;
dyn walk = setp*;

state isfull = prop FullP(P);
state canfill = <setp> isfull;
state sometime = mu X . isfull | <setp> X;

task yes = mc same with { P: {(a)}, Q: {(a)} };
task no = mc same with { P: {(a)}, Q: {(b)} };
task expand = mx fullp sigma {Q} with { Q: {(b)} };
task probe = temp-mc canfill with { P: {}, Q: {} };
task satq = temp-sat nonref;
state nonref = prop Nonempty(P) | !prop Nonempty(P);
"""


class TestParseExamples:
    def test_bot(self):
        assert parse_flat("bot") == F.Bottom()

    def test_pipeline(self):
        got = parse_flat("pi{V,X,Z,T} (HC(V,X,Y) & TwoCol(V,Y,Z,T))")
        expected = F.Project(
            frozenset({"V", "X", "Z", "T"}),
            F.intersect(F.Atom("HC", ("V", "X", "Y")), F.Atom("TwoCol", ("V", "Y", "Z", "T"))),
        )
        assert got == expected

    def test_star_encoding(self):
        got = parse_dyn("mu Z . (diag | Z ; A(in P; out Q))")
        expected = D.Lfp(
            "Z",
            D.Union(
                D.Diagonal(),
                D.Compose(D.ModuleVar("Z"), D.Action("A", ("P", "Q"), frozenset({"P"}),
                                                     frozenset({"Q"}))),
            ),
        )
        assert got == expected

    def test_error_has_position(self):
        with pytest.raises(SpecSyntaxError) as err:
            parse_flat("pi{} (")
        assert err.value.line == 1

    def test_spec_file(self):
        spec = parse_spec(DEMO)
        assert spec.domain.elements == ("a", "b")
        assert spec.vocabulary.names == ("P", "Q")
        assert set(spec.modules) == {"FullP", "EmptyQ", "Nonempty"}
        assert set(spec.tasks) == {"yes", "no", "expand", "probe", "satq"}
        assert spec.tasks["probe"].kind == "temp-mc"

    def test_definition_inlining(self):
        spec = parse_spec(DEMO)
        assert spec.flat_defs["same"] == F.Select(
            F.Var("P"), F.Var("Q"), F.Complement(F.Bottom())
        )
        assert spec.state_defs["canfill"] == S.Diamond(
            D.Action("FullP", ("P",), frozenset(), frozenset({"P"})),
            S.Prop("FullP", ("P",)),
        )


class TestRoundTrip:
    def test_flat(self):
        rng = random.Random(71)
        for _ in range(60):
            ast = random_flat(rng, 4)
            assert parse_flat(to_text(ast)) == ast

    def test_dyn(self):
        rng = random.Random(72)
        for _ in range(60):
            ast = random_proc_with_tests(rng, 3)
            assert parse_dyn(to_text(ast)) == ast

    def test_state(self):
        rng = random.Random(73)
        for _ in range(60):
            ast = random_state(rng, 3)
            assert parse_state(to_text(ast)) == ast


@pytest.fixture
def demo_spec(tmp_path):
    path = tmp_path / "demo.mod"
    path.write_text(DEMO, encoding="utf-8")
    return str(path)


class TestCli:
    def test_eval_flat_empty_exit_zero(self, demo_spec, capsys):
        spec = demo_spec
        code = main(["eval-flat", spec, "-e", "same"])
        out = capsys.readouterr().out
        assert code == 0 and len(out.strip().splitlines()) == 4

    def test_eval_flat_bot(self, tmp_path, capsys):
        path = tmp_path / "bot.mod"
        path.write_text("domain {a}; vocab {P/1}; flat empty = bot;", encoding="utf-8")
        code = main(["eval-flat", str(path), "-e", "empty"])
        assert code == 0 and capsys.readouterr().out == ""

    def test_task_yes_no(self, demo_spec, capsys):
        assert main(["task", demo_spec, "--name", "yes"]) == 0
        assert capsys.readouterr().out.strip() == "yes"
        assert main(["task", demo_spec, "--name", "no"]) == 1
        assert capsys.readouterr().out.strip() == "no"

    def test_task_flags(self, demo_spec, capsys):
        code = main([
            "task", demo_spec, "--kind", "mc", "--formula", "same",
            "--bind", "P={(a)}", "--bind", "Q={(a)}",
        ])
        assert code == 0

    def test_task_mx(self, demo_spec, capsys):
        code = main(["task", demo_spec, "--name", "expand"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.strip().splitlines() == ["P={(a),(b)} Q={(b)}"]

    def test_task_temp_mc(self, demo_spec, capsys):
        assert main(["task", demo_spec, "--name", "probe"]) == 0

    def test_task_temp_sat(self, demo_spec, capsys):
        assert main(["task", demo_spec, "--name", "satq"]) == 0

    def test_translate(self, demo_spec, capsys):
        code = main(["translate", demo_spec, "-e", "sometime"])
        out = capsys.readouterr().out.strip()
        assert code == 0
        assert out == "mu X . dn (FullP(P)? | FullP(out P) ; X)"

    def test_error_exit_two(self, demo_spec, capsys):
        assert main(["eval-flat", demo_spec, "-e", "missing"]) == 2
        assert "error" in capsys.readouterr().err

    def test_stats(self, demo_spec, capsys):
        assert main(["stats", demo_spec, "-e", "setp"]) == 0
        out = capsys.readouterr().out
        assert "universe size: 16" in out and "FullP(out P): 16" in out


class TestGraphPipelineSpec:
    """The shipped graph.mod drives the circuit/colouring builtins."""

    @pytest.fixture
    def graph_spec(self):
        import os

        return os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                            "graph.mod")

    def test_colourings(self, graph_spec, capsys):
        assert main(["task", graph_spec, "--name", "colourings"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2
        assert all("Y={(a,b),(b,a)}" in line for line in lines)

    def test_three_way_passes(self, graph_spec, capsys):
        assert main(["task", graph_spec, "--name", "three_way"]) == 0
        out = capsys.readouterr().out
        assert out.strip().endswith("pass") and "DISAGREE" not in out


class TestExports:
    def test_dot_bottom_two_structures(self, pq):
        domain = Domain(("a",))
        vocab = Vocabulary((("P", 1),))
        u = build_universe(domain, vocab)
        _, _, _, val = pq
        ts = build_transition_system(D.Bottom(), val, u)
        dot = render_dot(ts)
        assert dot.count("[label=") == 2  # two nodes
        assert "->" not in dot

    def test_dot_diagonal_self_loops(self, pq):
        _, _, u, val = pq
        ts = build_transition_system(D.Diagonal(), val, u)
        dot = render_dot(ts)
        assert sum(1 for line in dot.splitlines() if "->" in line) == 16
        assert all(f"{i} -> {i} " in dot for i in range(16))

    def test_dot_setp(self, pq):
        _, _, u, val = pq
        setp = D.Action("FullP", ("P",), frozenset(), frozenset({"P"}))
        ts = build_transition_system(setp, val, u)
        dot = render_dot(ts)
        edges = [line for line in dot.splitlines() if "->" in line]
        assert len(edges) == 16
        assert sum(1 for i in range(16) if f"  {i} -> {i} " in dot) == 4

    def test_dot_deterministic(self, pq):
        _, _, u, val = pq
        a = D.Union(D.Diagonal(), D.Action("FullP", ("P",), frozenset(), frozenset({"P"})))
        first = render_dot(build_transition_system(a, val, u))
        second = render_dot(build_transition_system(a, val, u))
        assert first == second

    def test_json_schema(self, pq):
        _, _, u, val = pq
        setp = D.Action("FullP", ("P",), frozenset(), frozenset({"P"}))
        ts = build_transition_system(setp, val, u)
        doc = ts_to_json(ts)
        assert doc["domain"] == ["a", "b"]
        assert doc["vocab"] == [["P", 1], ["Q", 1]]
        assert len(doc["structures"]) == 16
        assert len(doc["edges"]["FullP(out P)"]) == 16

    def test_stats_edge_counts_match(self, pq):
        from modalg.export import collect_stats
        from modalg.dynamic import eval_dyn

        _, _, u, val = pq
        a = D.Union(D.Diagonal(), D.Action("FullP", ("P",), frozenset(), frozenset({"P"})))
        ts, stats = collect_stats(a, val, u)
        for key in ts.order:
            assert stats.edge_counts[key] == len(ts.edges[key])
        assert stats.edge_counts[to_text(a)] == len(eval_dyn(a, val, u))
