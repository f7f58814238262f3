"""The standard (restricted) chase under a Datalog-first strategy.

Every rule application is one chase step, recorded in a trace together with
its match, its extension to fresh nulls, and the labelled provenance edges
``t -(y)-> n`` that connect a frontier value ``t`` to each null ``n``
created by the step.

A rule is applied only on an *unsatisfied* match: no extension of the match
embeds the head into the current interpretation.  An existential rule fires
only while no existential-free rule has an unsatisfied match (Datalog
first).  Fairness comes from per-rule FIFO match queues consumed round
robin; the seeded strategy instead draws the next candidate at random.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .matching import find_matches, head_satisfied, match_each
from .model import (Atom, Database, Interpretation, Null, Program, Tgd,
                    Variable, substitute)


@dataclass(frozen=True)
class Deterministic:
    pass


@dataclass(frozen=True)
class Seeded:
    seed: int


@dataclass
class ChaseStep:
    index: int
    rule_id: int
    match: dict                # body variables -> terms
    extension: dict            # match plus existentials -> fresh nulls
    new_facts: tuple           # the instantiated head
    added: tuple               # head atoms that were actually new
    created_nulls: tuple

    def line(self) -> str:
        bind = ", ".join(f"{v.name}={t}" for v, t in
                         sorted(self.match.items(), key=lambda kv: kv[0].name))
        new = ", ".join(str(a) for a in self.new_facts)
        return f"step {self.index}: rule {self.rule_id}, match {{{bind}}}, new {{{new}}}"

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "rule": self.rule_id,
            "match": {v.name: str(t) for v, t in self.match.items()},
            "extension": {v.name: str(t) for v, t in self.extension.items()},
            "newFacts": [str(a) for a in self.new_facts],
            "added": [str(a) for a in self.added],
            "createdNulls": [n.name for n in self.created_nulls],
        }


@dataclass
class ChaseTrace:
    program: Program
    database: tuple
    steps: list = field(default_factory=list)
    var_of_null: dict = field(default_factory=dict)
    chain_edges: list = field(default_factory=list)   # (term, frontier var, null)

    def lines(self) -> list:
        return [s.line() for s in self.steps]

    def to_dict(self) -> dict:
        return {
            "database": [str(a) for a in self.database],
            "steps": [s.to_dict() for s in self.steps],
            "chainEdges": [[str(t), y.name, n.name] for t, y, n in self.chain_edges],
        }

    def null_chain_edges(self) -> list:
        """The chain edges whose source is itself a null."""
        return [(t, y, n) for t, y, n in self.chain_edges if isinstance(t, Null)]

    def producer_of(self, atom: Atom) -> Optional[int]:
        """Index of the step that added ``atom``, or None for database atoms."""
        for step in self.steps:
            if atom in step.added:
                return step.index
        return None


@dataclass
class ChaseResult:
    terminated: bool
    interpretation: Interpretation
    trace: ChaseTrace

    @property
    def steps(self) -> int:
        return len(self.trace.steps)


class _RuleQueue:
    """FIFO of discovered candidate matches for one rule, stored as value
    tuples aligned with the rule's body variables.

    Duplicates are allowed: every pop re-checks satisfaction, and a match
    that was satisfied once stays satisfied, so an already-applied match
    rediscovered later is simply discarded.
    """

    def __init__(self, rule: Tgd):
        self.rule = rule
        self.vars = rule.frontier + rule.body_only
        self.items: list = []
        self.head = 0

    def push_binding(self, binding: dict) -> None:
        self.items.append(tuple([binding[v] for v in self.vars]))

    def __len__(self) -> int:
        return len(self.items) - self.head

    def _as_match(self, values: tuple) -> dict:
        return dict(zip(self.vars, values))

    def pop_oldest(self) -> dict:
        m = self.items[self.head]
        self.items[self.head] = None
        self.head += 1
        return self._as_match(m)

    def pop_at(self, offset: int) -> dict:
        return self._as_match(self.items.pop(self.head + offset))


class _Engine:
    def __init__(self, program: Program, database: Database,
                 strategy, max_steps: int):
        self.program = program
        self.interp = database.copy()
        self.max_steps = max_steps
        self.rng = random.Random(strategy.seed) if isinstance(strategy, Seeded) else None
        self.trace = ChaseTrace(program, tuple(database))
        self.null_counter = 0
        self.datalog = [r for r in program.rules if r.is_datalog]
        self.existential = [r for r in program.rules if not r.is_datalog]
        self.queues = {r.rule_id: _RuleQueue(r) for r in program.rules}
        self.rr = 0  # round-robin pointer over existential rules
        self.body_index: dict = {}
        for rule in program.rules:
            for k, atom in enumerate(rule.body):
                self.body_index.setdefault(atom.pred, []).append((rule, k))
        for rule in program.rules:
            q = self.queues[rule.rule_id]
            match_each(self.interp, rule.body, {},
                       lambda b, q=q: q.push_binding(b) or False, reorder=False)

    def discover(self, fact: Atom) -> None:
        """Enqueue every candidate match that involves a new fact."""
        for rule, k in self.body_index.get(fact.pred, ()):
            q = self.queues[rule.rule_id]
            seed = {}
            ok = True
            for p, f in zip(rule.body[k].args, fact.args):
                if isinstance(p, Variable):
                    bound = seed.get(p)
                    if bound is None:
                        seed[p] = f
                    elif bound != f:
                        ok = False
                        break
                elif p != f:
                    ok = False
                    break
            if not ok:
                continue
            rest = rule.body[:k] + rule.body[k + 1:]
            match_each(self.interp, rest, seed,
                       lambda b, q=q: q.push_binding(b) or False)

    def fresh_null(self, step_index: int, var: Variable) -> Null:
        self.null_counter += 1
        return Null(self.null_counter, f"n{step_index}_{var.name}")

    def apply(self, rule: Tgd, match: dict) -> None:
        index = len(self.trace.steps) + 1
        extension = dict(match)
        created = []
        for v in rule.existentials:
            n = self.fresh_null(index, v)
            extension[v] = n
            created.append(n)
            self.trace.var_of_null[n] = v
        new_facts = tuple(substitute(a, extension) for a in rule.head)
        added = tuple(a for a in new_facts if self.interp.add(a))
        self.trace.steps.append(ChaseStep(index, rule.rule_id, match, extension,
                                          new_facts, added, tuple(created)))
        for n in created:
            for y in rule.frontier:
                self.trace.chain_edges.append((match[y], y, n))
        for fact in added:
            self.discover(fact)

    def run_datalog(self) -> Optional[ChaseResult]:
        """Apply unsatisfied Datalog matches until fixpoint (or the cap)."""
        progress = True
        while progress:
            progress = False
            for rule in self.datalog:
                q = self.queues[rule.rule_id]
                while len(q):
                    match = q.pop_oldest()
                    if head_satisfied(self.interp, rule.head, match):
                        continue
                    if len(self.trace.steps) >= self.max_steps:
                        return ChaseResult(False, self.interp, self.trace)
                    self.apply(rule, match)
                    progress = True
        return None

    def pick_existential(self) -> Optional[tuple]:
        if self.rng is None:
            n = len(self.existential)
            for i in range(n):
                rule = self.existential[(self.rr + i) % n]
                q = self.queues[rule.rule_id]
                while len(q):
                    match = q.pop_oldest()
                    if not head_satisfied(self.interp, rule.head, match):
                        self.rr = (self.rr + i + 1) % n
                        return rule, match
            return None
        # Seeded: draw uniformly among all pending candidates, discarding
        # any that have become satisfied since they were enqueued.
        while True:
            pending = [(r, self.queues[r.rule_id]) for r in self.existential
                       if len(self.queues[r.rule_id])]
            total = sum(len(q) for _, q in pending)
            if not total:
                return None
            pick = self.rng.randrange(total)
            for rule, q in pending:
                if pick < len(q):
                    match = q.pop_at(pick)
                    if not head_satisfied(self.interp, rule.head, match):
                        return rule, match
                    break
                pick -= len(q)

    def run(self) -> ChaseResult:
        while True:
            capped = self.run_datalog()
            if capped is not None:
                return capped
            choice = self.pick_existential()
            if choice is None:
                return ChaseResult(True, self.interp, self.trace)
            if len(self.trace.steps) >= self.max_steps:
                return ChaseResult(False, self.interp, self.trace)
            rule, match = choice
            self.apply(rule, match)


def chase(program: Program, database: Database, strategy=Deterministic(),
          max_steps: int = 100_000) -> ChaseResult:
    """Run the Datalog-first restricted chase up to ``max_steps`` applications.

    A ``terminated`` result is a model of the program over the database; a
    capped result signals *possible* nontermination, never a verdict.
    """
    return _Engine(program, database, strategy, max_steps).run()


def chain_edges(trace: ChaseTrace) -> list:
    return list(trace.chain_edges)


def validate_trace(program: Program, trace: ChaseTrace,
                   check_datalog_first: bool = True) -> None:
    """Replay a trace and verify every chase-step side condition.

    Checks, step by step: the match embeds the body in the pre-state, the
    match was unsatisfied, fresh nulls were really fresh, the new facts are
    exactly the instantiated head, and (optionally) that no existential-free
    rule had an unsatisfied match when an existential rule fired.
    Raises AssertionError on the first violation.
    """
    interp = Interpretation(trace.database)
    seen_nulls: set = set()
    for step in trace.steps:
        rule = program.rule(step.rule_id)
        for atom in rule.body:
            assert substitute(atom, step.match) in interp, \
                f"step {step.index}: match does not embed the body"
        assert not head_satisfied(interp, rule.head, step.match), \
            f"step {step.index}: match was already satisfied"
        if check_datalog_first and rule.existentials:
            for dl in program.rules:
                if not dl.is_datalog:
                    continue
                for m in find_matches(interp, dl.body):
                    assert head_satisfied(interp, dl.head, m), \
                        f"step {step.index}: Datalog rule {dl.rule_id} was not at fixpoint"
        for v in rule.existentials:
            n = step.extension[v]
            assert isinstance(n, Null) and n not in seen_nulls, \
                f"step {step.index}: null {n} is not fresh"
            seen_nulls.add(n)
        expect = tuple(substitute(a, step.extension) for a in rule.head)
        assert expect == step.new_facts, f"step {step.index}: head mismatch"
        for atom in step.new_facts:
            interp.add(atom)
