"""Bottom-up Datalog saturation and the frozen-constant entailment check.

``saturate`` computes the least fixpoint of a set of existential-free rules
by semi-naive iteration: each round only considers matches that touch at
least one atom derived in the previous round.

``entails`` decides whether the rules entail a universally quantified
implication ``body -> head`` by replacing every variable with a reserved
fresh constant, saturating, and testing membership of the frozen head.
"""

from __future__ import annotations

from typing import Iterable

from .matching import find_matches, unify_atom
from .model import Atom, Constant, Interpretation, Tgd, Variable, substitute

# Frozen constants live outside the user namespace: quoted constants cannot
# contain control characters, so no parsed program can ever mention these.
_FREEZE_PREFIX = "\x00frz_"


def check_datalog(rules: Iterable[Tgd]) -> tuple:
    rules = tuple(rules)
    for r in rules:
        if r.existentials:
            raise ValueError(f"rule {r.rule_id} has existential variables")
    return rules


def saturate(rules: Iterable[Tgd], facts: Interpretation) -> Interpretation:
    """Least fixpoint of ``rules`` over ``facts``; the input is not modified."""
    rules = check_datalog(rules)
    result = facts.copy()
    delta = list(result)
    while delta:
        delta_set = set(delta)
        fresh: dict = {}
        for rule in rules:
            for k, atom in enumerate(rule.body):
                for pivot in delta:
                    seed = unify_atom(atom, pivot, {})
                    if seed is None:
                        continue
                    rest = rule.body[:k] + rule.body[k + 1:]
                    for match in find_matches(result, rest, seed, reorder=True):
                        # Dedupe pivot roles: count a match only at its first
                        # delta position, so each match fires once per round.
                        if any(substitute(b, match) in delta_set
                               for b in rule.body[:k]):
                            continue
                        for h in rule.head:
                            new = substitute(h, match)
                            if new not in result and new not in fresh:
                                fresh[new] = None
        for atom in fresh:
            result.add(atom)
        delta = list(fresh)
    return result


class FreshConstants:
    """Injective map from variables into the reserved constant namespace."""

    def __init__(self):
        self._map: dict = {}

    def __getitem__(self, v: Variable) -> Constant:
        c = self._map.get(v)
        if c is None:
            c = Constant(f"{_FREEZE_PREFIX}{len(self._map)}_{v.name}")
            self._map[v] = c
        return c

    def freeze(self, atom: Atom) -> Atom:
        return Atom(atom.pred, tuple(self[a] if isinstance(a, Variable) else a
                                     for a in atom.args))


def entails(rules: Iterable[Tgd], body: Iterable[Atom], head: Iterable[Atom]) -> bool:
    """True iff ``rules`` entail ``forall vars . body -> head``.

    Head variables not occurring in the body are frozen as well, which makes
    the check test entailment of the implication with those variables also
    universally quantified.
    """
    frz = FreshConstants()
    frozen_body = Interpretation(frz.freeze(a) for a in body)
    frozen_head = [frz.freeze(a) for a in head]
    closure = saturate(rules, frozen_body)
    return all(a in closure for a in frozen_head)
