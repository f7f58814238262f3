"""Path queries, propagation checks, and the saturation certificate search.

A path through the dependency graph induces a conjunctive query: each edge
contributes a variable-disjoint variant of its target rule, with the fresh
null of one step identified with the frontier variable that consumes it in
the next.  Base propagation asks the Datalog part to re-derive the first
step's head re-anchored at the end of the path; step propagation asks it to
carry such a re-anchored head across a second cycle traversal while keeping
the context variables fixed.

A component is certified by an edge set E when removing E breaks all its
cycles, all E-edges into one target share a label, and both propagation
conditions hold for every E-avoiding connection between E-edges.  The
search enumerates feedback edge sets ascending by size and memoizes the
individual propagation checks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional

from .datalog import entails
from .depgraph import DepEdge, LabelledDepGraph, SccAnalysis
from .model import Program, Variable, substitute


class NonComposablePath(Exception):
    pass


class PathBudgetExceeded(Exception):
    pass


@dataclass(frozen=True)
class PathQuery:
    path: tuple                 # DepEdge sequence
    atoms: tuple                # full conjunction
    body_parts: tuple           # per-step instantiated body conjunctions
    head_parts: tuple           # per-step head conjunctions, nulls chained
    chain_vars: tuple           # y~_1 .. y~_{k+1}
    renamings: tuple            # per-step mapping rule variable -> fresh variable


def _edge_key(e: DepEdge) -> tuple:
    return (e.src.id, e.label.id, e.dst.id)


def path_query(program: Program, path: Iterable[DepEdge],
               graph: Optional[LabelledDepGraph] = None) -> PathQuery:
    """The conjunction accompanying a chain of rule applications along ``path``."""
    path = tuple(path)
    if not path:
        raise NonComposablePath("empty path has no query")
    for a, b in zip(path, path[1:]):
        if a.dst != b.src:
            raise NonComposablePath(f"{a} does not compose with {b}")
    if graph is not None:
        known = {_edge_key(e) for e in graph.edges}
        for e in path:
            if _edge_key(e) not in known:
                raise NonComposablePath(f"{e} is not a graph edge")
    fresh = program.fresh_variables("P")
    renamings = []
    for i, edge in enumerate(path, start=1):
        rule = program.rule_of_var[edge.dst]
        ren = {v: Variable(next(fresh).id, f"{v.name}~{i}") for v in rule.variables()}
        renamings.append(ren)
    chain = [renamings[0][path[0].label]]
    for i in range(1, len(path)):
        chain.append(renamings[i][path[i].label])
    final = next(fresh)
    chain.append(Variable(final.id, f"Y~{len(path) + 1}"))

    body_parts = []
    head_parts = []
    atoms = []
    for i, edge in enumerate(path):
        rule = program.rule_of_var[edge.dst]
        ren = dict(renamings[i])
        body = tuple(substitute(a, ren) for a in rule.body)
        ren[edge.dst] = chain[i + 1]     # the created null chains forward
        head = tuple(substitute(a, ren) for a in rule.head)
        body_parts.append(body)
        head_parts.append(head)
        atoms.extend(body)
        atoms.extend(head)
    return PathQuery(path, tuple(atoms), tuple(body_parts), tuple(head_parts),
                     tuple(chain), tuple(dict(r) for r in renamings))


def _head_slots(program: Program, e: DepEdge) -> tuple:
    """Slot variables of the rule behind ``e``: label, other frontier,
    target existential, other existentials."""
    rule = program.rule_of_var[e.dst]
    z = tuple(v for v in rule.frontier if v != e.label)
    w = tuple(v for v in rule.existentials if v != e.dst)
    return rule, e.label, z, e.dst, w


def is_base_propagating(program: Program, path: Iterable[DepEdge]) -> bool:
    """Does the Datalog part re-derive the first head at the path's end?

    ``path`` is the certificate edge followed by an edge sequence avoiding
    the certificate set (possibly none).
    """
    pq = path_query(program, path)
    first_label = pq.renamings[0][pq.path[0].label]
    conclusion = tuple(substitute(a, {first_label: pq.chain_vars[-1]})
                       for a in pq.head_parts[0])
    datalog = [r for r in program.rules if r.is_datalog]
    return entails(datalog, pq.atoms, conclusion)


def is_step_propagating(program: Program, path_a: Iterable[DepEdge],
                        path_b: Iterable[DepEdge], e_star: DepEdge) -> bool:
    """Propagate a satisfied head of ``e_star``'s rule across a second cycle.

    ``path_a`` and ``path_b`` each start with a certificate edge followed by
    an avoiding (possibly empty) continuation; the hypothesis head keeps its
    context variables fresh, so entailment must not depend on them.
    """
    path_a, path_b = tuple(path_a), tuple(path_b)
    pq = path_query(program, path_a + path_b)
    ell = len(path_a)
    rule_star, y_star, z_star, v_star, w_star = _head_slots(program, e_star)
    top = max(v.id for v in pq.chain_vars)
    for ren in pq.renamings:
        top = max(top, max(v.id for v in ren.values()))
    counter = itertools.count(top + 1)
    xz = {v: Variable(next(counter), f"Xz_{v.name}") for v in z_star}
    xw = {v: Variable(next(counter), f"Xw_{v.name}") for v in w_star}
    hyp_map = dict(xz)
    hyp_map.update(xw)
    hyp_map[y_star] = pq.chain_vars[ell]             # junction variable
    hyp_map[v_star] = pq.chain_vars[1]               # null of the first traversal
    conc_map = dict(xz)
    conc_map.update(xw)
    conc_map[y_star] = pq.chain_vars[-1]             # final variable
    conc_map[v_star] = pq.chain_vars[ell + 1]        # null created by path_b's edge
    hypothesis = pq.atoms + tuple(substitute(a, hyp_map) for a in rule_star.head)
    conclusion = tuple(substitute(a, conc_map) for a in rule_star.head)
    datalog = [r for r in program.rules if r.is_datalog]
    return entails(datalog, hypothesis, conclusion)


def enumerate_ebar_paths(scc: SccAnalysis, component: int, e_set: Iterable[DepEdge],
                         path_budget: int = 10_000) -> list:
    """All paths inside the component that avoid ``e_set``, lead from a
    target of an ``e_set`` edge to a source of one, including the empty
    path anchored wherever a target is itself a source.

    Returns (start_vertex, edge_tuple) pairs.  Requires the component
    without ``e_set`` to be acyclic; raises PathBudgetExceeded past the cap.
    """
    e_keys = {_edge_key(e) for e in e_set}
    intra = [e for e in scc.intra_edges[component] if _edge_key(e) not in e_keys]
    if not _is_acyclic(scc.components[component], intra):
        raise ValueError("component minus the edge set is cyclic")
    starts = {e.dst for e in e_set}
    ends = {e.src for e in e_set}
    out_edges: dict = {}
    for e in intra:
        out_edges.setdefault(e.src, []).append(e)
    paths = []
    for s in sorted(starts, key=lambda v: v.id):
        if s in ends:
            paths.append((s, ()))
        stack = [(s, ())]
        while stack:
            v, prefix = stack.pop()
            for e in out_edges.get(v, ()):
                ext = prefix + (e,)
                if e.dst in ends:
                    paths.append((s, ext))
                    if len(paths) > path_budget:
                        raise PathBudgetExceeded(len(paths))
                stack.append((e.dst, ext))
    return paths


def _is_acyclic(vertices, edges) -> bool:
    succ: dict = {v: [] for v in vertices}
    for e in edges:
        succ[e.src].append(e.dst)
    state: dict = {}

    def visit(v) -> bool:
        state[v] = 1
        for w in succ[v]:
            s = state.get(w)
            if s == 1:
                return False
            if s is None and not visit(w):
                return False
        state[v] = 2
        return True

    return all(visit(v) for v in vertices if v not in state)


@dataclass
class CheckReport:
    component: int
    e_set: tuple
    conditions: tuple          # four booleans
    counterexample: Optional[str]
    base_paths_checked: int
    step_pairs_checked: int

    @property
    def ok(self) -> bool:
        return all(self.conditions)


class PropagationCache:
    """Memoizes base/step checks across certificate candidates."""

    def __init__(self, program: Program):
        self.program = program
        self.base: dict = {}
        self.step: dict = {}

    def base_ok(self, path: tuple) -> bool:
        key = tuple(_edge_key(e) for e in path)
        if key not in self.base:
            self.base[key] = is_base_propagating(self.program, path)
        return self.base[key]

    def step_ok(self, path_a: tuple, path_b: tuple, e_star: DepEdge) -> bool:
        key = (tuple(_edge_key(e) for e in path_a),
               tuple(_edge_key(e) for e in path_b), _edge_key(e_star))
        if key not in self.step:
            self.step[key] = is_step_propagating(self.program, path_a, path_b, e_star)
        return self.step[key]


def check_e_saturating(program: Program, scc: SccAnalysis, component: int,
                       e_set: Iterable[DepEdge], cache: Optional[PropagationCache] = None,
                       path_budget: int = 10_000) -> CheckReport:
    """Evaluate the four certificate conditions for one component and edge set."""
    cache = cache or PropagationCache(program)
    e_set = tuple(e_set)
    intra_keys = {_edge_key(e) for e in scc.intra_edges[component]}
    for e in e_set:
        if _edge_key(e) not in intra_keys:
            raise ValueError(f"{e} is not an edge of component {component}")
    e_keys = {_edge_key(e) for e in e_set}
    remainder = [e for e in scc.intra_edges[component] if _edge_key(e) not in e_keys]
    cond1 = _is_acyclic(scc.components[component], remainder)
    by_target: dict = {}
    for e in e_set:
        by_target.setdefault(e.dst, set()).add(e.label)
    cond2 = all(len(labels) == 1 for labels in by_target.values())
    counterexample = None
    if not cond1:
        counterexample = "cycle survives edge removal"
    elif not cond2:
        bad = next(v for v, ls in by_target.items() if len(ls) > 1)
        counterexample = (f"edges into {bad.name} carry labels "
                          f"{sorted(l.name for l in by_target[bad])}")
    cond3 = cond4 = True
    base_count = step_count = 0
    if cond1 and cond2:
        ebar = enumerate_ebar_paths(scc, component, e_set, path_budget)
        for e in e_set:
            for start, cont in ebar:
                if start != e.dst:
                    continue
                base_count += 1
                if not cache.base_ok((e,) + cont):
                    cond3 = False
                    counterexample = counterexample or \
                        f"not base-propagating: {e} with continuation length {len(cont)}"
        for ea, eb in itertools.product(e_set, repeat=2):
            for start_a, cont_a in ebar:
                if start_a != ea.dst or (cont_a[-1].dst if cont_a else start_a) != eb.src:
                    continue
                for start_b, cont_b in ebar:
                    if start_b != eb.dst:
                        continue
                    for e_star in e_set:
                        step_count += 1
                        if not cache.step_ok((ea,) + cont_a, (eb,) + cont_b, e_star):
                            cond4 = False
                            counterexample = counterexample or \
                                f"not step-propagating for {e_star}"
    return CheckReport(component, e_set, (cond1, cond2, cond3, cond4),
                       counterexample, base_count, step_count)


@dataclass
class ComponentCertificate:
    component: int
    vertices: tuple
    e_set: tuple
    report: Optional[CheckReport]
    verdict: str               # saturating | not-saturating | inconclusive
    reason: Optional[str] = None
    candidates_tried: int = 0


@dataclass
class SaturationResult:
    verdict: str               # saturating | not-saturating | inconclusive
    components: tuple          # ComponentCertificate per component index

    @property
    def certificates(self) -> dict:
        """Certificate edge sets per component (empty for trivial ones)."""
        return {c.component: c.e_set for c in self.components
                if c.verdict == "saturating"}


def find_saturating_certificate(program: Program, scc: SccAnalysis,
                                path_budget: int = 10_000,
                                candidate_budget: int = 4096) -> SaturationResult:
    """Search every cyclic component for a certified edge set.

    Candidates are enumerated ascending by cardinality over the component's
    edges, keeping only feedback sets (condition one is necessary), with
    propagation checks memoized across candidates.  Exhausting the
    enumeration yields a definitive negative; hitting the candidate or path
    budget yields an inconclusive verdict instead.
    """
    cache = PropagationCache(program)
    out = []
    for ci, comp in enumerate(scc.components):
        intra = scc.intra_edges[ci]
        if not intra:
            out.append(ComponentCertificate(ci, tuple(sorted(comp, key=lambda v: v.id)),
                                            (), None, "saturating", "trivial component"))
            continue
        tried = 0
        found = None
        failure_reports = []
        budget_hit = False
        for size in range(1, len(intra) + 1):
            if found or budget_hit:
                break
            for e_set in itertools.combinations(intra, size):
                tried += 1
                if tried > candidate_budget:
                    budget_hit = True
                    break
                try:
                    report = check_e_saturating(program, scc, ci, e_set, cache,
                                                path_budget)
                except PathBudgetExceeded:
                    budget_hit = True
                    break
                if not report.conditions[0]:
                    continue
                if report.ok:
                    found = report
                    break
                failure_reports.append(report)
        verts = tuple(sorted(comp, key=lambda v: v.id))
        if found:
            out.append(ComponentCertificate(ci, verts, found.e_set, found,
                                            "saturating", None, tried))
        elif budget_hit:
            out.append(ComponentCertificate(ci, verts, (), None, "inconclusive",
                                            "search budget exceeded", tried))
        else:
            last = failure_reports[-1] if failure_reports else None
            reason = (last.counterexample if last
                      else "no feedback edge set exists")
            out.append(ComponentCertificate(ci, verts, (), last,
                                            "not-saturating", reason, tried))
    if all(c.verdict == "saturating" for c in out):
        verdict = "saturating"
    elif any(c.verdict == "not-saturating" for c in out):
        verdict = "not-saturating"
    else:
        verdict = "inconclusive"
    return SaturationResult(verdict, tuple(out))
