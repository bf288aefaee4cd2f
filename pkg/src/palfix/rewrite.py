"""Announcement elimination, negation normal form, and polarity analysis.

reduce_announcements rewrites any formula of the boolean/epistemic/
announcement fragment into an equivalent announcement-free formula using
the classic reduction axioms. Boxes and diamonds each have their own rule
set (the diamond rules avoid the spurious negative occurrences that the
pure box encoding would introduce through the guard antecedents):

    [g]p        ->  g -> p                <g>p        ->  g & p
    [g]~h       ->  g -> ~[g]h            <g>~h       ->  g & ~[g]h
    [g](h & i)  ->  [g]h & [g]i           <g>(h & i)  ->  <g>h & <g>i
    [g](h | i)  ->  [g]h | [g]i           <g>(h | i)  ->  <g>h | <g>i
    [g]K{a}h    ->  g -> K{a}[g]h         <g>K{a}h    ->  g & K{a}[g]h
    [g]Khat{a}h ->  g -> Khat{a}<g>h      <g>Khat{a}h ->  g & Khat{a}<g>h
    [g][h]i     ->  [g & [g]h]i           (composition; likewise for the
                                           three mixed box/diamond nests)

Nested announcements are eliminated through the composition axiom rather
than by recursing into the inner announcement first; both terminate, the
composition keeps intermediate growth smaller. Union announcements and
tests expand by their defining conjunction/disjunction before any rule
applies.

Polarity of a variable is defined on one canonical form only: the
innermost-first reduction above followed by negation normal form, with no
propositional simplification. A purely syntactic positivity criterion for
announcement formulas is not available, so this canonical-form census is a
pragmatic surrogate; it is exact on the worked fixture cases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import UnsupportedConstructError
from .lang import (
    Ann,
    Announce,
    Assign,
    Atom,
    And,
    BellFamilyAnn,
    Const,
    DualKnow,
    Formula,
    Gfp,
    Implies,
    Know,
    Lfp,
    Not,
    Or,
    PermInvariant,
)


def _check_reducible(f: Formula) -> None:
    from .lang import iter_subformulas

    for node in iter_subformulas(f):
        if isinstance(node, (Gfp, Lfp)):
            raise UnsupportedConstructError("reduction does not handle fixpoints")
        if isinstance(node, Assign):
            raise UnsupportedConstructError("reduction does not handle assignments")
        if isinstance(node, PermInvariant):
            raise UnsupportedConstructError("reduction does not handle invariance surrogates")
        if isinstance(node, Announce):
            if node.power == "*":
                raise UnsupportedConstructError("reduction does not handle starred iteration")
            if isinstance(node.ann, BellFamilyAnn):
                raise UnsupportedConstructError("reduction does not handle symbolic bell families")


def reduce_announcements(f: Formula) -> Formula:
    """Equivalent announcement-free formula (announcement fragment only)."""
    _check_reducible(f)
    return _red(f)


def _red(f: Formula) -> Formula:
    if isinstance(f, (Atom, Const)):
        return f
    if isinstance(f, Not):
        return Not(_red(f.sub))
    if isinstance(f, And):
        return And(_red(f.left), _red(f.right))
    if isinstance(f, Or):
        return Or(_red(f.left), _red(f.right))
    if isinstance(f, Implies):
        return Implies(_red(f.left), _red(f.right))
    if isinstance(f, Know):
        return Know(f.agent, _red(f.sub))
    if isinstance(f, DualKnow):
        return DualKnow(f.agent, _red(f.sub))
    if isinstance(f, Announce):
        return _red_announce(f)
    raise UnsupportedConstructError(f"cannot reduce node {type(f).__name__}")


def _red_announce(f: Announce) -> Formula:
    ann = f.ann
    assert isinstance(ann, Ann)
    # bounded iteration unfolds first
    if isinstance(f.power, int):
        body = f.body
        for _ in range(f.power):
            body = Announce(ann, body, diamond=f.diamond)
        return _red(body) if f.power > 0 else _red(f.body)
    # unions expand by the defining conjunction/disjunction
    if ann.is_union:
        parts = [Announce(Ann((alt,)), f.body, diamond=f.diamond) for alt in ann.alternatives]
        out = parts[0]
        for p in parts[1:]:
            out = Or(out, p) if f.diamond else And(out, p)
        return _red(out)
    g = _red(ann.alternatives[0])
    return _red_single(g, f.body, f.diamond)


def _red_single(g: Formula, body: Formula, diamond: bool) -> Formula:
    """One reduction step for [g]body / <g>body with g already reduced."""

    def guard(h: Formula) -> Formula:
        return And(g, h) if diamond else Implies(g, h)

    if isinstance(body, (Atom, Const)):
        return guard(body)
    if isinstance(body, Not):
        return guard(Not(_red_single(g, body.sub, diamond=False)))
    if isinstance(body, And):
        return And(_red_single(g, body.left, diamond), _red_single(g, body.right, diamond))
    if isinstance(body, Or):
        return Or(_red_single(g, body.left, diamond), _red_single(g, body.right, diamond))
    if isinstance(body, Implies):
        return _red_single(g, Or(Not(body.left), body.right), diamond)
    if isinstance(body, Know):
        return guard(Know(body.agent, _red_single(g, body.sub, diamond=False)))
    if isinstance(body, DualKnow):
        return guard(DualKnow(body.agent, _red_single(g, body.sub, diamond=True)))
    if isinstance(body, Announce):
        inner = body
        if isinstance(inner.power, int) or (isinstance(inner.ann, Ann) and inner.ann.is_union):
            return _red_single(g, _red_announce(inner), diamond)
        h = _red(inner.ann.alternatives[0])
        composed = And(g, _red_single(g, h, diamond=False))  # g & [g]h
        stepped = Announce(Ann((composed,)), inner.body, diamond=inner.diamond)
        reduced_inner = _red_single(composed, inner.body, inner.diamond)
        del stepped
        if diamond and inner.diamond:
            return reduced_inner  # <g><h>i == <g & [g]h> i
        if diamond and not inner.diamond:
            return And(g, reduced_inner)  # <g>[h]i == g & [g & [g]h] i
        if not diamond and inner.diamond:
            return Implies(g, reduced_inner)  # [g]<h>i == g -> <g & [g]h> i
        return reduced_inner  # [g][h]i == [g & [g]h] i
    raise UnsupportedConstructError(f"cannot reduce announcement over {type(body).__name__}")


# ---------------------------------------------------------------------------
# Negation normal form


def to_nnf(f: Formula) -> Formula:
    """Negations pushed onto atoms; announcement-free input only."""
    return _nnf(f, negate=False)


def _nnf(f: Formula, negate: bool) -> Formula:
    if isinstance(f, Const):
        return Const(f.value != negate)
    if isinstance(f, Atom):
        return Not(f) if negate else f
    if isinstance(f, Not):
        return _nnf(f.sub, not negate)
    if isinstance(f, And):
        if negate:
            return Or(_nnf(f.left, True), _nnf(f.right, True))
        return And(_nnf(f.left, False), _nnf(f.right, False))
    if isinstance(f, Or):
        if negate:
            return And(_nnf(f.left, True), _nnf(f.right, True))
        return Or(_nnf(f.left, False), _nnf(f.right, False))
    if isinstance(f, Implies):
        if negate:
            return And(_nnf(f.left, False), _nnf(f.right, True))
        return Or(_nnf(f.left, True), _nnf(f.right, False))
    if isinstance(f, Know):
        inner = _nnf(f.sub, negate)
        return DualKnow(f.agent, inner) if negate else Know(f.agent, inner)
    if isinstance(f, DualKnow):
        inner = _nnf(f.sub, negate)
        return Know(f.agent, inner) if negate else DualKnow(f.agent, inner)
    raise UnsupportedConstructError(
        f"negation normal form expects an announcement-free formula, found {type(f).__name__}"
    )


# ---------------------------------------------------------------------------
# Polarity


@dataclass(frozen=True)
class Polarity:
    positive_occurrences: int
    negative_occurrences: int

    @property
    def kind(self) -> str:
        if self.positive_occurrences and self.negative_occurrences:
            return "mixed"
        if self.positive_occurrences:
            return "positive"
        if self.negative_occurrences:
            return "negative"
        return "absent"

    def __str__(self) -> str:
        return self.kind


def polarity(f: Formula, var: str) -> Polarity:
    """Sign census of the free occurrences of ``var`` in the canonical
    reduced negation normal form of ``f``."""
    canon = to_nnf(reduce_announcements(f))
    pos = neg = 0

    def walk(g: Formula):
        nonlocal pos, neg
        if isinstance(g, Atom):
            if g.name == var:
                pos += 1
        elif isinstance(g, Not):
            if isinstance(g.sub, Atom) and g.sub.name == var:
                neg += 1
        elif isinstance(g, (And, Or)):
            walk(g.left)
            walk(g.right)
        elif isinstance(g, (Know, DualKnow)):
            walk(g.sub)
        elif isinstance(g, Const):
            pass
        else:  # canonical form contains nothing else
            raise UnsupportedConstructError(f"unexpected node {type(g).__name__} in NNF")

    walk(canon)
    return Polarity(pos, neg)


# ---------------------------------------------------------------------------
# The fixpoint positive fragment
#
#   f ::= q | p | ~p | (f | g) | (f & g) | K{a} f | [~g]f
#
# where qs are the designated fixpoint variables (never negated) and the
# announced formula inside [~g]f is itself in the fragment.


def in_fixpoint_positive_fragment(f: Formula, designated: Iterable[str]) -> bool:
    designated = frozenset(designated)

    def ok(g: Formula) -> bool:
        if isinstance(g, Atom):
            return True
        if isinstance(g, Const):
            return True
        if isinstance(g, Not):
            return isinstance(g.sub, Atom) and g.sub.name not in designated
        if isinstance(g, (And, Or)):
            return ok(g.left) and ok(g.right)
        if isinstance(g, Know):
            return ok(g.sub)
        if isinstance(g, Announce):
            if g.diamond or g.power is not None:
                return False
            if not isinstance(g.ann, Ann) or g.ann.is_union:
                return False
            content = g.ann.alternatives[0]
            if not isinstance(content, Not):
                return False
            return ok(content.sub) and ok(g.body)
        return False

    return ok(f)
