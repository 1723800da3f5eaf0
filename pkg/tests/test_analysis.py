"""Join trees, acyclicity, disruptive trios, and algorithm selection."""
import random

import pytest

from anykq.analysis import (
    all_join_trees,
    analyze,
    build_join_tree,
    check_l_prefix,
    has_disruptive_trio,
    is_acyclic,
    is_free_connex,
    l_consistent_join_tree,
    topological_rel_order,
    tree_is_valid,
)
from anykq.errors import CyclicQueryError, NotAchievable
from anykq.model import LexOrder, SumOrder, SumTerm
from anykq.parser import parse_query


def q(text):
    return parse_query(text)[0]


FIG = q("Q(..) :- R(x1,x2), S(x1,x3), T(x2,x4), U(x4,x5)")


def test_acyclic_detection():
    assert is_acyclic(FIG)
    assert is_acyclic(q("Q(..) :- R(a,b), S(b,c), T(c,d)"))
    assert not is_acyclic(q("Q(..) :- R(a,b), S(b,c), T(c,a)"))


def test_cyclic_raises_with_residual():
    with pytest.raises(CyclicQueryError) as e:
        build_join_tree(q("Q(..) :- R(a,b), S(b,c), T(c,a)"))
    assert len(e.value.residual) == 3


def test_deterministic_tree_shape():
    # 4-atom worked example: root R, children S (x1) and T (x2), U under T (x4)
    tree = build_join_tree(FIG)
    assert tree.root == 0
    assert tree.parent == {1: 0, 2: 0, 3: 2}
    assert tree.join_vars[1] == ("x1",)
    assert tree.join_vars[2] == ("x2",)
    assert tree.join_vars[3] == ("x4",)
    assert topological_rel_order(tree) == [0, 1, 2, 3]


def test_every_enumerated_tree_satisfies_running_intersection():
    queries = [
        FIG,
        q("Q(..) :- R(a,b), S(b,c), T(c,d), V(d,e)"),
        q("Q(..) :- Hub(a,b,c), P(a,x), Rr(b,y), Ss(c,z)"),
    ]
    for query in queries:
        trees = list(all_join_trees(query))
        assert trees, str(query)
        for t in trees:
            assert tree_is_valid(query, t.root, t.parent)


def test_tree_connectedness_random():
    # every variable's atoms form a connected subtree in the chosen tree
    rng = random.Random(11)
    for _ in range(30):
        n_atoms = rng.randint(2, 5)
        text = ", ".join(f"A{i}(v{i}, v{i + 1})" for i in range(n_atoms))
        query = q(f"Q(..) :- {text}")
        tree = build_join_tree(query)
        assert tree_is_valid(query, tree.root, tree.parent)


def test_disruptive_trio_witnesses():
    r = has_disruptive_trio(FIG, ("x1", "x4", "x2"))
    assert r.found and r.witness == ("x1", "x4", "x2")
    r2 = has_disruptive_trio(FIG, ("x1", "x3", "x4", "x5", "x2"))
    assert r2.found
    a, b, c = r2.witness
    assert c == "x2"  # x2 neighbors x1 (via R) and x4 (via T)
    r3 = has_disruptive_trio(FIG, ("x1", "x2", "x3", "x4", "x5"))
    assert not r3.found


def test_l_prefix_rejects_interleaving():
    # concatenating new-L-variable runs must reproduce L, and no L variable
    # may be introduced after a non-L variable has appeared
    chain = q("Q(..) :- R(x1, y), S(y, x2)")
    tree = build_join_tree(chain)
    assert check_l_prefix(chain, tree, [0, 1], ("x1", "y", "x2"))
    assert not check_l_prefix(chain, tree, [0, 1], ("x1", "x2"))
    assert check_l_prefix(chain, tree, [0, 1], ("x1",))


def test_l_consistent_tree_found_for_full_appearance_order():
    tree, rel = l_consistent_join_tree(FIG, ("x1", "x2", "x3", "x4", "x5"))
    assert tree_is_valid(FIG, tree.root, tree.parent)
    assert check_l_prefix(FIG, tree, rel, ("x1", "x2", "x3", "x4", "x5"))


def test_l_consistent_tree_unreachable_orders():
    with pytest.raises(NotAchievable):
        l_consistent_join_tree(FIG, ("x1", "x4", "x2"))  # disruptive trio order
    with pytest.raises(NotAchievable):
        l_consistent_join_tree(q("Q(..) :- R(x1, y), S(y, x2)"), ("x1", "x2"))


def test_free_connex():
    assert is_free_connex(FIG)  # full join query
    proj = parse_query("Q(x1, x5) :- R(x1,x2), S(x2,x3), T(x3,x4), U(x4,x5)")[0]
    assert not is_free_connex(proj)
    proj2 = parse_query("Q(a, b) :- R(a,b), S(b,c)")[0]
    assert is_free_connex(proj2)


def test_analyze_selects_algorithm():
    full_l = LexOrder(("x1", "x2", "x3", "x4", "x5"))
    assert analyze(FIG, full_l).algorithm == "LEX"
    trio_l = LexOrder(("x1", "x4", "x2"))
    assert analyze(FIG, trio_l).algorithm == "LEX-via-SUM"
    s = SumOrder((SumTerm("x1"),))
    assert analyze(FIG, s).algorithm == "SUM"
    cyc = q("Q(..) :- R(a,b), S(b,c), T(c,a)")
    assert analyze(cyc, s).algorithm == "NONE"


def test_analyze_report_lines(capsys):
    rep = analyze(FIG, LexOrder(("x1", "x2", "x3", "x4", "x5")))
    lines = rep.lines(FIG)
    assert any(l.startswith("algorithm: LEX") for l in lines)
    assert any(l.startswith("tree_root:") for l in lines)
    assert any(l.startswith("rel_order:") for l in lines)
