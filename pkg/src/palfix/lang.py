"""Formula AST, concrete syntax, and desugaring.

The language is public announcement logic extended with greatest fixpoints,
bounded/starred announcement iteration, and simultaneous public assignments:

    f ::= p | ~f | f & g | K{a} f | [g]f | nu p. f | [g]* f | [sigma]f

plus the usual defined connectives (|, ->, Khat, diamonds, mu, bounded
iteration [g]^n f, announcement unions [f u g]h, and atomic tests p?).

Concrete syntax (EBNF, also in the README):

    form  := impl
    impl  := disj ("->" impl)?
    disj  := conj ("|" conj)*
    conj  := unary ("&" unary)*
    unary := "~" unary | "K{" id "}" unary | "Khat{" id "}" unary
           | "[" ann "]" ("^" nat | "*")? unary
           | "<" ann ">" ("^" nat | "*")? unary
           | "nu" id "." form | "mu" id "." form
           | "[" id ":=" form ("," id ":=" form)* "]" unary
           | "(" form ")" | id | id "?"
    ann   := form ("u" form)*

`u`, `nu`, `mu`, `K`, `Khat`, `true` and `false` are reserved words and
cannot be used as atom or agent names.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Union

from .errors import ParseError

STAR = "*"

RESERVED = {"u", "nu", "mu", "K", "Khat", "true", "false"}


class Formula:
    """Base class; subclasses are immutable and structurally comparable."""

    def __str__(self) -> str:
        return pretty(self)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({pretty(self)!r})"


@dataclass(frozen=True, repr=False)
class Const(Formula):
    value: bool


@dataclass(frozen=True, repr=False)
class Atom(Formula):
    name: str


@dataclass(frozen=True, repr=False)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True, repr=False)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, repr=False)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, repr=False)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, repr=False)
class Know(Formula):
    agent: str
    sub: Formula


@dataclass(frozen=True, repr=False)
class DualKnow(Formula):
    """Khat{a} f, i.e. ~K{a}~f."""

    agent: str
    sub: Formula


@dataclass(frozen=True, repr=False)
class Ann:
    """An announcement: one alternative, or a flattened finite union.

    ``test_of`` marks the p? sugar (alternatives are then (p, ~p)); it is
    ignored for equality so that printing the expansion round-trips.
    """

    alternatives: tuple[Formula, ...]
    test_of: Optional[Formula] = field(default=None, compare=False)

    def __post_init__(self):
        if not self.alternatives:
            raise ValueError("announcement must have at least one alternative")

    @property
    def is_union(self) -> bool:
        return len(self.alternatives) > 1


@dataclass(frozen=True, repr=False)
class BellFamilyAnn:
    """Symbolic stand-in for the family of mutually exclusive announcements
    "exactly the agents in L know their own hat value", one per L.

    kind: "all" ranges over every L, "nlast" over strict subsets of the
    agent set, "last" is the single announcement for L = everyone.
    Interpreted against the model's colour frame by the checker.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in ("all", "nlast", "last"):
            raise ValueError(f"bad bell family kind {self.kind!r}")


Announcement = Union[Ann, BellFamilyAnn]


@dataclass(frozen=True, repr=False)
class Announce(Formula):
    ann: Announcement
    body: Formula
    diamond: bool = False
    power: Union[None, int, str] = None  # None, an int >= 0, or STAR

    def __post_init__(self):
        if isinstance(self.power, int) and self.power < 0:
            raise ValueError("iteration exponent must be >= 0")
        if self.power is not None and not isinstance(self.power, int) and self.power != STAR:
            raise ValueError(f"bad power {self.power!r}")


@dataclass(frozen=True, repr=False)
class Gfp(Formula):
    var: str
    body: Formula
    # evaluation hint for the checker ("classes" = enumerate unions of the
    # model's colour-permutation classes); never printed or parsed
    hint: Optional[str] = field(default=None, compare=False)


@dataclass(frozen=True, repr=False)
class Lfp(Formula):
    var: str
    body: Formula


@dataclass(frozen=True, repr=False)
class Assign(Formula):
    """[p := f, q := g] body -- right-hand sides evaluated simultaneously."""

    pairs: tuple[tuple[str, Formula], ...]
    body: Formula

    def __post_init__(self):
        names = [p for p, _ in self.pairs]
        if len(set(names)) != len(names):
            raise ValueError("assignment binds an atom twice")


@dataclass(frozen=True, repr=False)
class PermInvariant(Formula):
    """Semantic surrogate for the colour-permutation-invariance conjunct of
    the solvability fixpoint body: true everywhere iff the current value of
    ``var`` is closed under every colour permutation of the model's frame.

    Builder-only; printable but not parseable.
    """

    var: str


TRUE = Const(True)
FALSE = Const(False)


def conj_all(formulas: Iterable[Formula]) -> Formula:
    """Balanced conjunction (keeps AST depth logarithmic)."""
    items = list(formulas)
    if not items:
        return TRUE
    while len(items) > 1:
        items = [
            And(items[i], items[i + 1]) if i + 1 < len(items) else items[i]
            for i in range(0, len(items), 2)
        ]
    return items[0]


def disj_all(formulas: Iterable[Formula]) -> Formula:
    items = list(formulas)
    if not items:
        return FALSE
    while len(items) > 1:
        items = [
            Or(items[i], items[i + 1]) if i + 1 < len(items) else items[i]
            for i in range(0, len(items), 2)
        ]
    return items[0]


def box(ann: Union[Formula, Announcement], body: Formula, power=None) -> Announce:
    if isinstance(ann, Formula):
        ann = Ann((ann,))
    return Announce(ann, body, diamond=False, power=power)


def dia(ann: Union[Formula, Announcement], body: Formula, power=None) -> Announce:
    if isinstance(ann, Formula):
        ann = Ann((ann,))
    return Announce(ann, body, diamond=True, power=power)


def test_ann(f: Formula) -> Ann:
    """The announcement f? = f u ~f."""
    return Ann((f, Not(f)), test_of=f)


# ---------------------------------------------------------------------------
# Variables and substitution


def free_atoms(f: Formula) -> frozenset[str]:
    """Atoms occurring free (fixpoint binders bind their variable)."""
    out: set[str] = set()

    def walk(g: Formula, bound: frozenset[str]):
        if isinstance(g, Atom):
            if g.name not in bound:
                out.add(g.name)
        elif isinstance(g, Const):
            pass
        elif isinstance(g, Not):
            walk(g.sub, bound)
        elif isinstance(g, (And, Or, Implies)):
            walk(g.left, bound)
            walk(g.right, bound)
        elif isinstance(g, (Know, DualKnow)):
            walk(g.sub, bound)
        elif isinstance(g, Announce):
            if isinstance(g.ann, Ann):
                for alt in g.ann.alternatives:
                    walk(alt, bound)
            walk(g.body, bound)
        elif isinstance(g, (Gfp, Lfp)):
            walk(g.body, bound | {g.var})
        elif isinstance(g, Assign):
            for _, rhs in g.pairs:
                walk(rhs, bound)
            walk(g.body, bound)
        elif isinstance(g, PermInvariant):
            if g.var not in bound:
                out.add(g.var)
        else:
            raise TypeError(f"unknown node {type(g).__name__}")

    walk(f, frozenset())
    return frozenset(out)


def subst_free(f: Formula, var: str, replacement: Formula) -> Formula:
    """Substitute ``replacement`` for the free occurrences of atom ``var``.

    Occurrences bound by an inner nu/mu over the same name are untouched.
    The replacements we use introduce no binders, so no renaming is needed.
    """
    if isinstance(f, Atom):
        return replacement if f.name == var else f
    if isinstance(f, Const):
        return f
    if isinstance(f, Not):
        return Not(subst_free(f.sub, var, replacement))
    if isinstance(f, And):
        return And(subst_free(f.left, var, replacement), subst_free(f.right, var, replacement))
    if isinstance(f, Or):
        return Or(subst_free(f.left, var, replacement), subst_free(f.right, var, replacement))
    if isinstance(f, Implies):
        return Implies(subst_free(f.left, var, replacement), subst_free(f.right, var, replacement))
    if isinstance(f, Know):
        return Know(f.agent, subst_free(f.sub, var, replacement))
    if isinstance(f, DualKnow):
        return DualKnow(f.agent, subst_free(f.sub, var, replacement))
    if isinstance(f, Announce):
        ann = f.ann
        if isinstance(ann, Ann):
            ann = Ann(
                tuple(subst_free(a, var, replacement) for a in ann.alternatives),
                test_of=None,
            )
        return Announce(ann, subst_free(f.body, var, replacement), f.diamond, f.power)
    if isinstance(f, (Gfp, Lfp)):
        if f.var == var:
            return f
        cls = type(f)
        if cls is Gfp:
            return Gfp(f.var, subst_free(f.body, var, replacement), hint=f.hint)
        return Lfp(f.var, subst_free(f.body, var, replacement))
    if isinstance(f, Assign):
        pairs = tuple((p, subst_free(rhs, var, replacement)) for p, rhs in f.pairs)
        return Assign(pairs, subst_free(f.body, var, replacement))
    if isinstance(f, PermInvariant):
        return f
    raise TypeError(f"unknown node {type(f).__name__}")


# ---------------------------------------------------------------------------
# Desugaring


def desugar(f: Formula) -> Formula:
    """Rewrite into the primitive cases: atoms, constants, ~, &, K, [.],
    nu, [.]*, assignments, plus union announcements.

    mu x. f becomes ~nu x. ~f[x := ~x] (free occurrences only); diamonds
    dualize; bounded iteration unfolds; tests expand to unions.
    """
    if isinstance(f, (Atom, Const, PermInvariant)):
        return f
    if isinstance(f, Not):
        return Not(desugar(f.sub))
    if isinstance(f, And):
        return And(desugar(f.left), desugar(f.right))
    if isinstance(f, Or):
        return Not(And(Not(desugar(f.left)), Not(desugar(f.right))))
    if isinstance(f, Implies):
        return Not(And(desugar(f.left), Not(desugar(f.right))))
    if isinstance(f, Know):
        return Know(f.agent, desugar(f.sub))
    if isinstance(f, DualKnow):
        return Not(Know(f.agent, Not(desugar(f.sub))))
    if isinstance(f, Announce):
        ann = f.ann
        if isinstance(ann, Ann):
            ann = Ann(tuple(desugar(a) for a in ann.alternatives), test_of=None)
        body = desugar(f.body)
        if f.diamond:
            # <A>^k f == ~[A]^k ~f for every k (None, n, or *)
            return Not(Announce(ann, Not(body), diamond=False, power=f.power))
        if isinstance(f.power, int):
            out = body
            for _ in range(f.power):
                out = Announce(ann, out, diamond=False, power=None)
            return out
        return Announce(ann, body, diamond=False, power=f.power)
    if isinstance(f, Gfp):
        return Gfp(f.var, desugar(f.body), hint=f.hint)
    if isinstance(f, Lfp):
        body = subst_free(f.body, f.var, Not(Atom(f.var)))
        return Not(Gfp(f.var, Not(desugar(body))))
    if isinstance(f, Assign):
        return Assign(tuple((p, desugar(rhs)) for p, rhs in f.pairs), desugar(f.body))
    raise TypeError(f"unknown node {type(f).__name__}")


# ---------------------------------------------------------------------------
# Printing

_LVL_FORM = 0  # a full form may appear here
_LVL_IMPL_LEFT = 1
_LVL_DISJ = 2
_LVL_CONJ = 3


def pretty(f: Formula) -> str:
    return _pr(f, _LVL_FORM)


def _pr(f: Formula, level: int) -> str:
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Implies):
        s = f"{_pr(f.left, _LVL_IMPL_LEFT)} -> {_pr(f.right, _LVL_FORM)}"
        return f"({s})" if level > _LVL_FORM else s
    if isinstance(f, Or):
        s = f"{_pr(f.left, _LVL_DISJ)} | {_pr(f.right, _LVL_CONJ)}"
        return f"({s})" if level > _LVL_DISJ else s
    if isinstance(f, And):
        s = f"{_pr(f.left, _LVL_CONJ)} & {_pr(f.right, _LVL_CONJ + 1)}"
        return f"({s})" if level > _LVL_CONJ else s
    # unary-level constructs
    if isinstance(f, Not):
        return f"~{_pr(f.sub, _LVL_CONJ + 1)}"
    if isinstance(f, Know):
        return f"K{{{f.agent}}} {_pr(f.sub, _LVL_CONJ + 1)}"
    if isinstance(f, DualKnow):
        return f"Khat{{{f.agent}}} {_pr(f.sub, _LVL_CONJ + 1)}"
    if isinstance(f, Announce):
        if f.power is None:
            p = ""
        elif f.power == STAR:
            p = "*"
        else:
            p = f"^{f.power}"
        inner = _pr_ann(f.ann)
        brackets = f"<{inner}>" if f.diamond else f"[{inner}]"
        return f"{brackets}{p} {_pr(f.body, _LVL_CONJ + 1)}"
    if isinstance(f, (Gfp, Lfp)):
        word = "nu" if isinstance(f, Gfp) else "mu"
        s = f"{word} {f.var}. {_pr(f.body, _LVL_FORM)}"
        # the body extends maximally: parenthesize except in form position
        return f"({s})" if level > _LVL_FORM else s
    if isinstance(f, Assign):
        inner = ", ".join(f"{p} := {_pr(rhs, _LVL_FORM)}" for p, rhs in f.pairs)
        return f"[{inner}] {_pr(f.body, _LVL_CONJ + 1)}"
    if isinstance(f, PermInvariant):
        return f"@perm_invariant({f.var})"
    raise TypeError(f"unknown node {type(f).__name__}")


def _pr_ann(ann: Announcement) -> str:
    if isinstance(ann, BellFamilyAnn):
        return f"@bell({ann.kind})"
    if ann.test_of is not None and isinstance(ann.test_of, Atom):
        return f"{ann.test_of.name}?"
    return " u ".join(_pr(a, _LVL_FORM) for a in ann.alternatives)


# ---------------------------------------------------------------------------
# Tokenizer / parser

_SYMBOLS = ("->", ":=", "~", "&", "|", "(", ")", "[", "]", "<", ">", "^", "*", ".", ",", "?", "{", "}")


@dataclass(frozen=True)
class _Tok:
    kind: str  # "sym", "id", or "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if text.startswith("->", i) or text.startswith(":=", i):
            toks.append(_Tok("sym", text[i : i + 2], i))
            i += 2
            continue
        if c in "~&|()[]<>^*.,?{}":
            toks.append(_Tok("sym", c, i))
            i += 1
            continue
        if c.isalnum() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("id", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", i)
    toks.append(_Tok("end", "", n))
    return toks


class _Parser:
    def __init__(self, tokens: list[_Tok], macros: dict):
        self.toks = tokens
        self.i = 0
        self.macros = macros

    def peek(self, ahead: int = 0) -> _Tok:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        if t.kind != "end":
            self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.pos)
        return t

    def expect_id(self) -> _Tok:
        t = self.next()
        if t.kind != "id" or t.text in RESERVED:
            raise ParseError(f"expected an identifier, found {t.text or 'end of input'!r}", t.pos)
        return t

    # grammar productions -------------------------------------------------

    def form(self) -> Formula:
        left = self.disj()
        if self.peek().text == "->":
            self.next()
            return Implies(left, self.form())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek().text == "|":
            self.next()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.peek().text == "&":
            self.next()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        t = self.peek()
        if t.text == "~":
            self.next()
            return Not(self.unary())
        if t.text in ("K", "Khat"):
            self.next()
            self.expect("{")
            agent = self.expect_id().text
            self.expect("}")
            sub = self.unary()
            return Know(agent, sub) if t.text == "K" else DualKnow(agent, sub)
        if t.text == "nu" or t.text == "mu":
            self.next()
            var = self.expect_id().text
            self.expect(".")
            body = self.form()
            return Gfp(var, body) if t.text == "nu" else Lfp(var, body)
        if t.text == "[":
            if self.peek(1).kind == "id" and self.peek(2).text == ":=":
                return self.assignment()
            return self.announcement("[", "]")
        if t.text == "<":
            return self.announcement("<", ">")
        if t.text == "(":
            self.next()
            f = self.form()
            self.expect(")")
            return f
        if t.kind == "id":
            return self.atomic()
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.pos)

    def atomic(self) -> Formula:
        t = self.next()
        name = t.text
        if name == "true":
            return TRUE
        if name == "false":
            return FALSE
        if name in RESERVED:
            raise ParseError(f"reserved word {name!r} cannot stand alone", t.pos)
        if self.peek().text == "?":
            self.next()
            base = self._resolve(name, t.pos)
            if isinstance(base, (Ann, BellFamilyAnn)):
                raise ParseError(f"{name!r} is an announcement family, not testable", t.pos)
            return _PendingTest(base)
        resolved = self._resolve(name, t.pos)
        if isinstance(resolved, (Ann, BellFamilyAnn)):
            return _PendingAnn(resolved)
        return resolved

    def _resolve(self, name: str, pos: int):
        if name in self.macros:
            return self.macros[name]
        return Atom(name)

    def announcement(self, open_sym: str, close_sym: str) -> Formula:
        self.expect(open_sym)
        alts = [self.form()]
        while self.peek().text == "u":
            self.next()
            alts.append(self.form())
        self.expect(close_sym)
        power: Union[None, int, str] = None
        if self.peek().text == "^":
            self.next()
            t = self.next()
            if t.kind != "id" or not t.text.isdigit():
                raise ParseError("expected an iteration exponent", t.pos)
            power = int(t.text)
        elif self.peek().text == "*":
            self.next()
            power = STAR
        body = self.unary()
        ann = _to_announcement(alts)
        return Announce(ann, body, diamond=(open_sym == "<"), power=power)

    def assignment(self) -> Formula:
        self.expect("[")
        pairs = []
        while True:
            name = self.expect_id().text
            self.expect(":=")
            pairs.append((name, self.form()))
            if self.peek().text == ",":
                self.next()
                continue
            break
        self.expect("]")
        body = self.unary()
        return Assign(tuple(pairs), body)


@dataclass(frozen=True, repr=False)
class _PendingTest(Formula):
    """A parsed `p?` before it is placed in announcement position."""

    base: Formula


@dataclass(frozen=True, repr=False)
class _PendingAnn(Formula):
    """A macro that resolved to an announcement family."""

    ann: Announcement


def _to_announcement(alts: list[Formula]) -> Announcement:
    if len(alts) == 1:
        single = alts[0]
        if isinstance(single, _PendingTest):
            return test_ann(single.base)
        if isinstance(single, _PendingAnn):
            return single.ann
    flat: list[Formula] = []
    test_base: Optional[Formula] = None
    for a in alts:
        if isinstance(a, _PendingTest):
            flat.extend((a.base, Not(a.base)))
        elif isinstance(a, _PendingAnn):
            if isinstance(a.ann, BellFamilyAnn):
                raise ParseError("bell family cannot be a union member", 0)
            flat.extend(a.ann.alternatives)
        else:
            flat.append(a)
    if len(alts) == 1 and len(flat) == 2 and isinstance(alts[0], _PendingTest):
        test_base = alts[0].base
    return Ann(tuple(flat), test_of=test_base)


def _reject_pending(f: Formula, pos: int = 0) -> None:
    for node in iter_subformulas(f):
        if isinstance(node, _PendingTest):
            raise ParseError("a test f? may only appear as an announcement", pos)
        if isinstance(node, _PendingAnn):
            raise ParseError("announcement family used as a formula", pos)


def iter_subformulas(f: Formula) -> Iterator[Formula]:
    yield f
    if isinstance(f, Not):
        yield from iter_subformulas(f.sub)
    elif isinstance(f, (And, Or, Implies)):
        yield from iter_subformulas(f.left)
        yield from iter_subformulas(f.right)
    elif isinstance(f, (Know, DualKnow)):
        yield from iter_subformulas(f.sub)
    elif isinstance(f, Announce):
        if isinstance(f.ann, Ann):
            for a in f.ann.alternatives:
                yield from iter_subformulas(a)
        yield from iter_subformulas(f.body)
    elif isinstance(f, (Gfp, Lfp)):
        yield from iter_subformulas(f.body)
    elif isinstance(f, Assign):
        for _, rhs in f.pairs:
            yield from iter_subformulas(rhs)
        yield from iter_subformulas(f.body)
    elif isinstance(f, _PendingTest):
        yield from iter_subformulas(f.base)


def parse(text: str, macros: Optional[dict] = None) -> Formula:
    """Parse concrete syntax into a Formula.

    ``macros`` maps names to Formula or announcement values; they are
    resolved at parse time (used for puzzle vocabularies like bellL).
    """
    parser = _Parser(_tokenize(text), macros or {})
    f = parser.form()
    tail = parser.peek()
    if tail.kind != "end":
        raise ParseError(f"trailing input {tail.text!r}", tail.pos)
    _reject_pending(f)
    return f
