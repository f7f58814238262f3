"""Decide chase termination statically, for programs whose dependency
graphs have cycles.

Three programs, three verdicts:

* the sequence-doubling rules with their propagation companions are
  *saturating*: every cycle can be broken by an edge set whose head
  inferences the Datalog rules propagate backwards, so the chase is finite
  for every database, with a rank that grades how fast it can grow;
* the finite-set constructor is saturating of rank 1 and *arboreous*: its
  nulls form a forest, which licenses a space-bounded query procedure;
* letting sets be their own elements creates two confluent loops with
  distinct labels, which no edge set reconciles: not saturating (and the
  chase really does run away).
"""

import sys
from pathlib import Path

try:
    import chasekit
except ImportError:
    sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from chasekit import analyze, chase, gen_dexp, gen_sets, gen_sets_nonterm


def show(title, inst):
    print(f"== {title} ==")
    report = analyze(inst.program)
    graph = report.graph
    print(f"dependency graph: {len(graph.vertices)} vertices, edges:")
    for e in graph.edges:
        print(f"   {graph.vertex_label(e.src)} --[{e.label.name}]--> "
              f"{graph.vertex_label(e.dst)}")
    for v in graph.vertices:
        flow = ", ".join(str(p) for p in sorted(graph.omega[v]))
        print(f"   positions fed by {graph.vertex_label(v)}: {flow}")
    print(f"saturating: {report.saturation.verdict}")
    for comp in report.saturation.components:
        if comp.e_set:
            edges = ", ".join(f"{e.src.name}-[{e.label.name}]->{e.dst.name}"
                              for e in comp.e_set)
            print(f"   component {comp.component}: certificate edges {{{edges}}}, "
                  f"{comp.report.base_paths_checked} base paths, "
                  f"{comp.report.step_pairs_checked} step pairs")
        elif comp.reason:
            print(f"   component {comp.component}: {comp.reason}")
    if report.ranks:
        print(f"rank: {report.ranks.program_rank}")
    if report.arboreous:
        print(f"tree chase applicable: {report.arboreous.verdict}")
    if report.path_guarded:
        print(f"path-guarded: {report.path_guarded.guarded}")
    result = chase(inst.program, inst.database, max_steps=5_000)
    outcome = "terminated" if result.terminated else "hit the step cap"
    print(f"chase on the bundled database: {outcome} "
          f"after {result.steps} steps\n")


show("sequence doubling with propagation", gen_dexp(2, True))
show("finite sets", gen_sets(2))
show("sets as their own elements", gen_sets_nonterm())
