import pytest

from chasekit.arboreal import build_term_tree, check_arboreous
from chasekit.chase import chase
from chasekit.corpus import QbfFormula, gen_qbf, gen_sets, qbf_truth
from chasekit.depgraph import build_ledgraph, compute_rank, scc_analysis
from chasekit.matching import evaluate_bcq
from chasekit.model import parse_facts, parse_program, parse_query
from chasekit.saturation import find_saturating_certificate
from chasekit.treechase import (Apply, InvalidChoice, TreeChaseRun,
                                build_task_tree, schedule_sequence,
                                tree_chase_guided, tree_chase_run,
                                tree_chase_search)


def arboreous_info(program):
    graph = build_ledgraph(program)
    scc = scc_analysis(graph)
    sat = find_saturating_certificate(program, scc)
    ranks = compute_rank(scc, sat.certificates)
    info = check_arboreous(program, scc, ranks, sat.certificates)
    assert info.arboreous
    return info


@pytest.fixture(scope="module")
def sets1():
    inst = gen_sets(1)
    return inst, arboreous_info(inst.program)


def test_empty_script_keeps_database(sets1):
    inst, info = sets1
    q = parse_query("?- su(a1,S,S) .", inst.program.signature)
    verdict, profile = tree_chase_run(inst.program, inst.database, q,
                                      info.v_ehat, 4, [[], []][:1])
    assert verdict is False
    assert profile.max_atoms == len(inst.database)


def test_query_satisfied_by_database_needs_no_steps(sets1):
    inst, info = sets1
    q = parse_query("?- elem(a1) .", inst.program.signature)
    verdict, _ = tree_chase_run(inst.program, inst.database, q, info.v_ehat, 4, [[]])
    assert verdict is True


def test_manual_script_builds_singleton(sets1):
    inst, info = sets1
    program = inst.program
    rule = program.rule(1)
    by_name = {v.name: v for v in rule.variables()}
    match = ((by_name["X"], parse_facts("elem(a1) .").by_pred("elem")[0].args[0]),
             (by_name["S"], parse_facts("set(e0) .").by_pred("set")[0].args[0]))
    q = parse_query("?- su(a1,S,S) .", program.signature)
    verdict, profile = tree_chase_run(program, inst.database, q, info.v_ehat, 4,
                                      [[Apply(1, match)]])
    assert verdict is True
    assert profile.max_stack == 2      # root plus one pushed bag


def test_invalid_script_rejected(sets1):
    inst, info = sets1
    program = inst.program
    rule = program.rule(1)
    by_name = {v.name: v for v in rule.variables()}
    elem_a, set_e0 = inst.database.by_pred("elem")[0], inst.database.by_pred("set")[0]
    match = ((by_name["X"], elem_a.args[0]), (by_name["S"], set_e0.args[0]))
    run = TreeChaseRun(program, inst.database, info.v_ehat)
    run.apply(rule, dict(match))
    with pytest.raises(InvalidChoice):
        run.apply(rule, dict(match))    # now satisfied


def test_guided_sets_query_true(sets1):
    inst, info = sets1
    q = parse_query("?- su(a1,S,S) .", inst.program.signature)
    result = tree_chase_guided(inst.program, inst.database, q, info)
    assert result.entailed is True
    full = chase(inst.program, inst.database, max_steps=4000)
    assert evaluate_bcq(full.interpretation, q) is True


def test_guided_false_without_replay(sets1):
    inst, info = sets1
    q = parse_query("?- su(e0,S,S) .", inst.program.signature)
    result = tree_chase_guided(inst.program, inst.database, q, info)
    assert result.entailed is False
    assert result.replayed_steps == 0
    assert result.profile.max_atoms == len(inst.database)


def test_guided_absent_constant_false(sets1):
    inst, info = sets1
    q = parse_query("?- su(zz,S,S) .", inst.program.signature)
    result = tree_chase_guided(inst.program, inst.database, q, info)
    assert result.entailed is False


def test_task_tree_single_node_for_root_only_body():
    program = parse_program(
        "elem(X), set(S) -> set(V), su(X,S,V), su(X,V,V) .\n"
        "su(X,S,T), su(Y,S,S) -> su(Y,T,T) .\n"
        "elem(X), elem(Y) -> pair(X,Y) .\n")
    db = parse_facts("elem(a1) . elem(a2) . set(e0) .", program.signature)
    info = arboreous_info(program)
    result = chase(program, db, max_steps=4000)
    tree = build_term_tree(result.trace, info)
    pair_step = next(s for s in result.trace.steps
                     if program.rule(s.rule_id).head[0].pred == "pair")
    node = build_task_tree(program, result.trace, tree, pair_step.index)
    assert node.depth == 1 and node.step == pair_step.index
    sub_steps = schedule_sequence(node)
    assert sub_steps[-1] == pair_step.index
    assert all(a < b for a, b in zip(sub_steps, sub_steps[1:])) or len(sub_steps) == 1


def test_task_tree_descendants_strictly_earlier(sets1):
    inst, info = sets1
    result = chase(inst.program, inst.database, max_steps=4000)
    tree = build_term_tree(result.trace, info)
    target = result.trace.steps[-1].index
    node = build_task_tree(inst.program, result.trace, tree, target)

    def check(n):
        for c in n.children:
            assert c.step < n.step
            check(c)

    check(node)


def test_schedule_replays_in_runner(sets1):
    inst, info = sets1
    q = parse_query("?- su(a1,S,S) .", inst.program.signature)
    result = tree_chase_guided(inst.program, inst.database, q, info)
    assert result.entailed and result.m_bound >= 1


@pytest.mark.parametrize("quantifiers,clauses", [
    ("e", ((1,),)),
    ("a", ((1,),)),
    ("ea", ((1, 2), (1, -2))),
    ("ae", ((1, 2), (-1, -2))),
])
def test_guided_qbf_matches_brute_force(quantifiers, clauses):
    formula = QbfFormula(quantifiers, clauses)
    inst = gen_qbf(formula)
    info = arboreous_info(inst.program)
    (q,) = inst.queries
    result = tree_chase_guided(inst.program, inst.database, q, info)
    assert result.entailed == qbf_truth(formula)
    full = chase(inst.program, inst.database, max_steps=20_000)
    assert result.entailed == evaluate_bcq(full.interpretation, q)


def test_guided_stack_stays_path_shaped():
    formula = QbfFormula("aa", ((1, -1), (2, -2)))
    inst = gen_qbf(formula)
    info = arboreous_info(inst.program)
    (q,) = inst.queries
    result = tree_chase_guided(inst.program, inst.database, q, info)
    assert result.entailed is True
    assert result.profile.max_stack <= len(formula.quantifiers) + 2


def test_search_tiny_sets_true(sets1):
    inst, info = sets1
    q = parse_query("?- su(a1,S,S) .", inst.program.signature)
    assert tree_chase_search(inst.program, inst.database, q,
                             info.v_ehat, 4, node_budget=20_000) == "true"


def test_search_unsatisfiable_ground_false(sets1):
    inst, info = sets1
    q = parse_query("?- su(e0,e0,e0) .", inst.program.signature)
    assert tree_chase_search(inst.program, inst.database, q,
                             info.v_ehat, 2, node_budget=50_000) == "false"


def test_search_budget_yields_inconclusive(sets1):
    inst, info = sets1
    q = parse_query("?- su(e0,e0,e0) .", inst.program.signature)
    assert tree_chase_search(inst.program, inst.database, q,
                             info.v_ehat, 3, node_budget=2) == "inconclusive"


def test_search_agrees_with_guided_on_tiny_qbf():
    formula = QbfFormula("e", ((1,),))
    inst = gen_qbf(formula)
    info = arboreous_info(inst.program)
    (q,) = inst.queries
    guided = tree_chase_guided(inst.program, inst.database, q, info)
    search = tree_chase_search(inst.program, inst.database, q,
                               info.v_ehat, 32, node_budget=60_000)
    assert search == ("true" if guided.entailed else "false")


def test_run_log_records_prunes_and_pushes(sets1):
    inst, info = sets1
    q = parse_query("?- su(a1,S,S) .", inst.program.signature)
    result = tree_chase_guided(inst.program, inst.database, q, info)
    assert result.entailed
    # the guided replay goes through one runner whose log mirrors each step
    assert result.profile.to_dict()["maxStack"] == 2
    run = TreeChaseRun(inst.program, inst.database, info.v_ehat)
    rule = inst.program.rule(1)
    by_name = {v.name: v for v in rule.variables()}
    elem_a, set_e0 = inst.database.by_pred("elem")[0], inst.database.by_pred("set")[0]
    run.apply(rule, {by_name["X"]: elem_a.args[0], by_name["S"]: set_e0.args[0]})
    assert run.log == [{"rule": 1, "pruned": 0, "action": "push",
                        "lastSetSize": 1, "atoms": len(inst.database) + 3}]


def test_datalog_first_strictness_is_enforced_in_scripted_runs(sets1):
    inst, info = sets1
    program = parse_program(inst.program.to_text() + "elem(X) -> seen(X) .\n")
    info2 = arboreous_info(program)
    run = TreeChaseRun(program, inst.database, info2.v_ehat)
    rule = program.rule(1)
    by_name = {v.name: v for v in rule.variables()}
    elem_a, set_e0 = inst.database.by_pred("elem")[0], inst.database.by_pred("set")[0]
    match = {by_name["X"]: elem_a.args[0], by_name["S"]: set_e0.args[0]}
    with pytest.raises(InvalidChoice):
        run.apply(rule, match)    # the seen-rule is still unsaturated
    relaxed = TreeChaseRun(program, inst.database, info2.v_ehat, datalog_first=False)
    relaxed.apply(rule, match)    # allowed once the strict check is off
