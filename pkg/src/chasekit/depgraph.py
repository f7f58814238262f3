"""The labelled existential dependency graph and its component analysis.

Vertices are the existential variables of a program.  For an existential
``v``, the position set ``omega(v)`` over-approximates where values created
for ``v`` can flow: it starts from the head positions of ``v`` and is closed
under "if all body positions of a universal variable ``x`` are reachable,
then so are the head positions of ``x``".  An edge ``u -(y)-> w`` exists
when the body positions of the frontier variable ``y`` of ``w``'s rule all
lie inside ``omega(u)``.

On top of the graph: strongly connected components in topological order,
per-vertex intra-component edge-label sets, confluence (the maximum number
of distinct intra-component in-edge labels at a vertex), and the rank
computation that grades components by how often their cycles can multiply
values flowing in from predecessor components.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Optional

from .model import Program, Variable


class Position(NamedTuple):
    pred: str
    index: int      # 1-based

    def __str__(self) -> str:
        return f"<{self.pred},{self.index}>"


def positions_of(program: Program, var: Variable, side: str) -> frozenset:
    """All predicate positions where ``var`` occurs in its rule's body or head."""
    rule = program.rule_of_var.get(var)
    if rule is None:
        raise KeyError(f"unknown variable {var}")
    atoms = rule.body if side == "body" else rule.head
    out = set()
    for atom in atoms:
        for i, a in enumerate(atom.args, start=1):
            if a == var:
                out.add(Position(atom.pred, i))
    return frozenset(out)


def compute_omegas(program: Program) -> dict:
    """Least position sets closed under body-to-head flow, per existential."""
    body_pos = {}
    head_pos = {}
    universals = []
    for rule in program.rules:
        for v in rule.frontier + rule.body_only:
            universals.append(v)
            body_pos[v] = positions_of(program, v, "body")
            head_pos[v] = positions_of(program, v, "head")
    omegas = {}
    for rule in program.rules:
        for v in rule.existentials:
            omega = set(positions_of(program, v, "head"))
            changed = True
            while changed:
                changed = False
                for x in universals:
                    if body_pos[x] <= omega and not head_pos[x] <= omega:
                        omega |= head_pos[x]
                        changed = True
            omegas[v] = frozenset(omega)
    return omegas


@dataclass(frozen=True)
class DepEdge:
    src: Variable
    label: Variable    # a frontier variable of dst's rule
    dst: Variable

    def __str__(self) -> str:
        return f"{self.src.name} -({self.label.name})-> {self.dst.name}"


@dataclass
class LabelledDepGraph:
    program: Program
    vertices: tuple
    edges: tuple
    omega: dict

    def edges_into(self, v: Variable) -> list:
        return [e for e in self.edges if e.dst == v]

    def edges_from(self, v: Variable) -> list:
        return [e for e in self.edges if e.src == v]

    def vertex_label(self, v: Variable) -> str:
        return f"{v.name}@r{self.program.rule_of_var[v].rule_id}"

    def to_dot(self, scc: Optional["SccAnalysis"] = None) -> str:
        lines = ["digraph ledgraph {"]
        name = {v: f'"{self.vertex_label(v)}"' for v in self.vertices}
        if scc is None:
            for v in self.vertices:
                lines.append(f"  {name[v]};")
        else:
            for ci, comp in enumerate(scc.components):
                lines.append(f"  subgraph cluster_{ci} {{")
                lines.append(f'    label="C{ci}";')
                for v in sorted(comp, key=lambda u: u.id):
                    lines.append(f"    {name[v]};")
                lines.append("  }")
        for e in self.edges:
            lines.append(f'  {name[e.src]} -> {name[e.dst]} [label="{e.label.name}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_ledgraph(program: Program) -> LabelledDepGraph:
    omegas = compute_omegas(program)
    vertices = tuple(omegas)
    edges = []
    for rule in program.rules:
        for w in rule.existentials:
            for y in rule.frontier:
                b_y = positions_of(program, y, "body")
                for u in vertices:
                    if b_y <= omegas[u]:
                        edges.append(DepEdge(u, y, w))
    return LabelledDepGraph(program, vertices, tuple(edges), omegas)


# ---------------------------------------------------------------------------
# Strongly connected components
# ---------------------------------------------------------------------------

@dataclass
class SccAnalysis:
    graph: LabelledDepGraph
    components: tuple          # frozensets of vertices, in topological order
    component_of: dict         # vertex -> component index
    lambda_of: dict            # vertex -> frozenset of intra-component labels
    beta_of: dict              # vertex -> confluence
    beta: tuple                # per-component confluence
    intra_edges: tuple         # per-component tuple of edges
    incoming_edges: tuple      # per-component tuple of edges from outside

    def nontrivial(self) -> list:
        """Indices of components with a cycle (an intra-component edge)."""
        return [i for i, es in enumerate(self.intra_edges) if es]


def _tarjan(vertices: tuple, succ: Mapping[Variable, list]) -> list:
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    components: list = []
    counter = [0]

    def strongconnect(v):
        work = [(v, iter(succ.get(v, ())))]
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        while work:
            node, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    low[node] = min(low[node], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == node:
                        break
                components.append(frozenset(comp))

    for v in vertices:
        if v not in index:
            strongconnect(v)
    return components


def scc_analysis(graph: LabelledDepGraph) -> SccAnalysis:
    succ: dict = {v: [] for v in graph.vertices}
    for e in graph.edges:
        succ[e.src].append(e.dst)
    components = _tarjan(graph.vertices, succ)

    # Topological order of the condensation; ties broken by the smallest
    # rule id (then variable id) occurring in the component.
    comp_of = {}
    for i, comp in enumerate(components):
        for v in comp:
            comp_of[v] = i
    preds: dict = {i: set() for i in range(len(components))}
    for e in graph.edges:
        a, b = comp_of[e.src], comp_of[e.dst]
        if a != b:
            preds[b].add(a)

    def comp_key(i: int) -> tuple:
        rule_ids = sorted(graph.program.rule_of_var[v].rule_id for v in components[i])
        var_ids = sorted(v.id for v in components[i])
        return (rule_ids[0], var_ids[0])

    order: list = []
    placed: set = set()
    remaining = set(range(len(components)))
    while remaining:
        ready = sorted((i for i in remaining if preds[i] <= placed), key=comp_key)
        order.append(ready[0])
        placed.add(ready[0])
        remaining.discard(ready[0])

    ordered = tuple(components[i] for i in order)
    comp_of = {}
    for i, comp in enumerate(ordered):
        for v in comp:
            comp_of[v] = i

    lambda_of = {}
    beta_of = {}
    for v in graph.vertices:
        labels = frozenset(e.label for e in graph.edges
                           if e.dst == v and comp_of[e.src] == comp_of[v])
        lambda_of[v] = labels
        beta_of[v] = len(labels)
    beta = tuple(max((beta_of[v] for v in comp), default=0) for comp in ordered)
    intra = tuple(tuple(e for e in graph.edges
                        if comp_of[e.src] == i and comp_of[e.dst] == i)
                  for i, _ in enumerate(ordered))
    incoming = tuple(tuple(e for e in graph.edges
                           if comp_of[e.dst] == i and comp_of[e.src] != i)
                     for i, _ in enumerate(ordered))
    return SccAnalysis(graph, ordered, comp_of, lambda_of, beta_of, beta,
                       intra, incoming)


# ---------------------------------------------------------------------------
# Ranks
# ---------------------------------------------------------------------------

@dataclass
class ComponentRank:
    component: int
    r_in: int
    r_cxt: int
    context_components: tuple
    rank: int


@dataclass
class RankReport:
    components: tuple      # ComponentRank per component, topological order
    program_rank: int

    def rank_of(self, component: int) -> int:
        return self.components[component].rank


class MissingCertificate(Exception):
    pass


def compute_rank(scc: SccAnalysis, certificates: Mapping[int, Iterable[DepEdge]]) -> RankReport:
    """Grade components along the condensation order.

    ``certificates`` maps each nontrivial component index to the edge set
    used to break its cycles; context components are those feeding, from the
    outside, a target of a certificate edge under a different label.
    """
    graph = scc.graph
    ranks: dict = {}
    out = []
    for i, comp in enumerate(scc.components):
        direct_preds = {scc.component_of[e.src] for e in scc.incoming_edges[i]}
        r_in = max((ranks[j] for j in direct_preds), default=0)
        beta = scc.beta[i]
        if beta == 0:
            cxt_comps: tuple = ()
            r_cxt = 0
            rank = r_in
        else:
            if i not in certificates:
                raise MissingCertificate(f"component {i} has no certificate edge set")
            e_set = tuple(certificates[i])
            cxt = set()
            for ce in e_set:
                for e in graph.edges_into(ce.dst):
                    if scc.component_of[e.src] != i and e.label != ce.label:
                        cxt.add(scc.component_of[e.src])
            cxt_comps = tuple(sorted(cxt))
            r_cxt = max((ranks[j] for j in cxt_comps), default=0)
            bump = 1 if beta == 1 else 2
            rank = max(r_in, r_cxt + bump)
        ranks[i] = rank
        out.append(ComponentRank(i, r_in, r_cxt, cxt_comps, rank))
    program_rank = max(ranks.values(), default=0)
    return RankReport(tuple(out), program_rank)
