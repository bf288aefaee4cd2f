"""The satisfaction relation and the fixpoint evaluation strategies.

Evaluation is extension-based: every clause computes the set of worlds
satisfying a formula in a given model. Announcements restrict the model and
evaluate the continuation there; a box over a union announcement is the
conjunction of the boxes over the alternatives, and bounded/starred
iteration unfolds one announcement step at a time with max bounded by the
current model's world count (announcements only shrink models).

Fixpoint variables are model-scoped. A binding p -> X made when evaluating
nu p. f over model M applies to occurrences of p evaluated in M itself;
when evaluation crosses a proper announcement into a strict submodel, an
occurrence of p there denotes the value of its binder re-solved in that
submodel. Bodies whose fixpoint variable never sits inside another
announcement's scope (such as the solvability fixpoint, where p occurs only
as announcement content and in the invariance conjunct) are unaffected and
get the plain union-of-post-fixed-sets semantics; bodies that thread the
variable through announcements (mu q. all_know or <bell>q) get the intended
iterated-update reading, and the three least-fixpoint engines below agree
on them.

Greatest fixpoints report U (the union of post-fixed sets), the truth set
at p -> U, and the post-fixed family separately: when the body's map is not
monotone these can differ, and the toolkit never guesses which one "is" the
answer.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from . import lang
from .errors import (
    AnnouncementFalseError,
    NonMonotoneIterationError,
    PalfixError,
    SizeGuardError,
    UnknownAtomError,
)
from .kripke import EpistemicModel, PointedModel
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
    STAR,
)

Extension = frozenset

SUBSET_ENUM_MAX_WORLDS = 20
AUTO_ENUM_MAX_WORLDS = 12
INVARIANT_ENUM_MAX_CLASSES = 16


# ---------------------------------------------------------------------------
# Environments


class _FixBinding:
    __slots__ = ("kind", "var", "body", "home", "value", "outer")

    def __init__(self, kind, var, body, home, value, outer):
        self.kind = kind  # "nu" | "mu"
        self.var = var
        self.body = body
        self.home = home  # frozenset of world ids where ``value`` applies
        self.value = value
        self.outer = outer


class _Env:
    __slots__ = ("fix", "plain", "key")

    def __init__(self, fix: Mapping[str, _FixBinding] = (), plain: Mapping[str, frozenset] = ()):
        self.fix = dict(fix)
        self.plain = dict(plain)
        self.key = (
            tuple(sorted((v, id(b)) for v, b in self.fix.items())),
            tuple(sorted(self.plain.items())),
        )

    def bind_fix(self, binding: _FixBinding) -> "_Env":
        fix = dict(self.fix)
        fix[binding.var] = binding
        return _Env(fix, self.plain)


_EMPTY_ENV = _Env()


def _plain_env(bindings: Optional[Mapping[str, Iterable[str]]]) -> _Env:
    if not bindings:
        return _EMPTY_ENV
    return _Env({}, {a: frozenset(ws) for a, ws in bindings.items()})


# ---------------------------------------------------------------------------
# Evaluation context (memo tables; values keep referents alive so id keys
# stay valid)


class _Ctx:
    def __init__(self):
        self.ext: dict = {}
        self.fix: dict = {}
        self.pow: dict = {}

    def clear(self):
        self.ext.clear()
        self.fix.clear()
        self.pow.clear()


_CTX = _Ctx()


def clear_caches():
    _CTX.clear()


# ---------------------------------------------------------------------------
# Public API


def extension(model: EpistemicModel, f: Formula, bindings=None) -> frozenset:
    """All worlds of ``model`` satisfying ``f`` ([[f]])."""
    return _ext(model, f, _plain_env(bindings), _CTX)


def evaluate(model: EpistemicModel, world: str, f: Formula, bindings=None) -> bool:
    if world not in model.world_set:
        raise PalfixError(f"world {world!r} is not in the model")
    return world in extension(model, f, bindings)


def evaluate_at(pm: PointedModel, f: Formula, bindings=None) -> bool:
    return evaluate(pm.model, pm.point, f, bindings)


def update(model: EpistemicModel, ann, point: str, bindings=None) -> PointedModel:
    """Announce ``ann`` at ``point``: restrict to the true alternative.

    Raises AnnouncementFalseError when no alternative is true at the point
    (a signal, not a failure), and PalfixError when several alternatives of
    a union are true there (the update is then not a function).
    """
    env = _plain_env(bindings)
    if isinstance(ann, Formula):
        ann = Ann((ann,))
    holders = []
    for ext in _alternative_extensions(model, ann, env, _CTX):
        if point in ext:
            holders.append(ext)
    if not holders:
        raise AnnouncementFalseError(f"announcement false at {point!r}")
    if len(holders) > 1:
        raise PalfixError("union announcement has several true alternatives at the point")
    return PointedModel(model.restrict(holders[0]), point)


# ---------------------------------------------------------------------------
# Core recursion


def _ext(model: EpistemicModel, f: Formula, env: _Env, ctx: _Ctx) -> frozenset:
    if isinstance(f, Const):
        return model.world_set if f.value else frozenset()
    if isinstance(f, Atom):
        return _lookup_atom(model, f.name, env, ctx)

    key = (id(model), id(f), env.key)
    hit = ctx.ext.get(key)
    if hit is not None:
        return hit[2]

    W = model.world_set
    if isinstance(f, Not):
        res = W - _ext(model, f.sub, env, ctx)
    elif isinstance(f, And):
        res = _ext(model, f.left, env, ctx) & _ext(model, f.right, env, ctx)
    elif isinstance(f, Or):
        res = _ext(model, f.left, env, ctx) | _ext(model, f.right, env, ctx)
    elif isinstance(f, Implies):
        res = (W - _ext(model, f.left, env, ctx)) | _ext(model, f.right, env, ctx)
    elif isinstance(f, Know):
        sub = _ext(model, f.sub, env, ctx)
        res = frozenset().union(*(b for b in model.relations[f.agent] if b <= sub)) if f.agent in model.relations else _unknown_agent(f.agent)
    elif isinstance(f, DualKnow):
        sub = _ext(model, f.sub, env, ctx)
        res = frozenset().union(*(b for b in model.relations[f.agent] if b & sub)) if f.agent in model.relations else _unknown_agent(f.agent)
    elif isinstance(f, Announce):
        res = _announce_ext(model, f, env, ctx)
    elif isinstance(f, Gfp):
        res = _gfp_auto(model, f.var, f.body, env, ctx, hint=f.hint).truth_set
    elif isinstance(f, Lfp):
        res = _lfp_kleene(model, f.var, f.body, env, ctx)
    elif isinstance(f, Assign):
        res = _assign_ext(model, f, env, ctx)
    elif isinstance(f, PermInvariant):
        res = W if _perm_invariant(model, f.var, env, ctx) else frozenset()
    else:
        raise PalfixError(f"cannot evaluate node {type(f).__name__}")

    ctx.ext[key] = (model, f, res)
    return res


def _unknown_agent(agent):
    from .errors import UnknownAgentError

    raise UnknownAgentError(f"unknown agent {agent!r}")


def _lookup_atom(model: EpistemicModel, name: str, env: _Env, ctx: _Ctx) -> frozenset:
    b = env.fix.get(name)
    if b is not None:
        if b.value is not None and b.home == model.world_set:
            return b.value
        return _solve_binder(model, b, ctx)
    if name in env.plain:
        return env.plain[name] & model.world_set
    val = model.valuation.get(name)
    if val is None:
        raise UnknownAtomError(f"unknown atom {name!r}")
    return val


def _solve_binder(model: EpistemicModel, b: _FixBinding, ctx: _Ctx) -> frozenset:
    key = (id(model), b.kind, b.var, id(b.body), b.outer.key)
    hit = ctx.fix.get(key)
    if hit is not None:
        return hit[2]
    if b.kind == "mu":
        res = _lfp_kleene(model, b.var, b.body, b.outer, ctx)
    else:
        res = _gfp_auto(model, b.var, b.body, b.outer, ctx, hint=None).truth_set
    ctx.fix[key] = (model, b.body, res)
    return res


# ---------------------------------------------------------------------------
# Announcements


def _alternative_extensions(model, ann, env: _Env, ctx: _Ctx) -> list[frozenset]:
    """Extensions of the (mutually exclusive or not) announcement
    alternatives in ``model``."""
    if isinstance(ann, BellFamilyAnn):
        return _bell_groups(model, ann.kind)
    return [_ext(model, alt, env, ctx) for alt in ann.alternatives]


def _bell_groups(model: EpistemicModel, kind: str) -> list[frozenset]:
    frame = model.frame
    if frame is None:
        raise PalfixError("bell family announcement needs a model with a colour frame")
    kmap = frame.knowing_map(model)
    everyone = frozenset(frame.gnomes)
    groups: dict[frozenset, set] = {}
    for w, known in kmap.items():
        groups.setdefault(known, set()).add(w)
    out = []
    for known in sorted(groups, key=lambda s: tuple(sorted(s))):
        if kind == "nlast" and known == everyone:
            continue
        if kind == "last" and known != everyone:
            continue
        out.append(frozenset(groups[known]))
    return out


def _announce_ext(model: EpistemicModel, f: Announce, env: _Env, ctx: _Ctx) -> frozenset:
    if f.power is None:
        return _announce_pow(model, f, 1, env, ctx)
    if isinstance(f.power, int):
        return _announce_pow(model, f, f.power, env, ctx)
    # bounded star: [A]* g == AND_{n < max} [A]^n g with max = |W|
    W = model.world_set
    steps = [_announce_pow(model, f, n, env, ctx) for n in range(max(1, len(W)))]
    if f.diamond:
        return frozenset().union(*steps)
    return frozenset(W).intersection(*steps) if steps else W


def _announce_pow(model: EpistemicModel, f: Announce, n: int, env: _Env, ctx: _Ctx) -> frozenset:
    """[[ [A]^n g ]] (or the diamond) by single-step unfolding."""
    key = (id(model), id(f), n, f.diamond, env.key)
    hit = ctx.pow.get(key)
    if hit is not None:
        return hit[2]
    if n == 0:
        res = _ext(model, f.body, env, ctx)
    else:
        W = model.world_set
        parts = []
        for ext in _alternative_extensions(model, f.ann, env, ctx):
            sub = model.restrict(ext)
            inner = _announce_pow(sub, f, n - 1, env, ctx)
            parts.append(inner if f.diamond else (W - ext) | inner)
        if f.diamond:
            res = frozenset().union(*parts) if parts else frozenset()
        else:
            res = frozenset(W).intersection(*parts) if parts else W
    ctx.pow[key] = (model, f, res)
    return res


def _assign_ext(model: EpistemicModel, f: Assign, env: _Env, ctx: _Ctx) -> frozenset:
    """Evaluate all right-hand sides in the current model, write them
    simultaneously, and bake the environment into the new valuation (an
    assignment leaves fixpoint variables untouched, so their current values
    become plain valuations of the assigned model)."""
    cache_key = (id(f.pairs), env.key)
    assigned = model._assign_cache.get(cache_key)
    if assigned is None:
        updates = {atom: _ext(model, rhs, env, ctx) for atom, rhs in f.pairs}
        sigma_domain = {atom for atom, _ in f.pairs}
        for var, b in env.fix.items():
            if var not in sigma_domain:
                updates[var] = _lookup_atom(model, var, env, ctx)
        for a, ws in env.plain.items():
            if a not in sigma_domain and a not in updates:
                updates[a] = ws & model.world_set
        assigned = model.with_valuation(updates)
        model._assign_cache[cache_key] = assigned
    return _ext(assigned, f.body, _EMPTY_ENV, ctx)


def _perm_invariant(model: EpistemicModel, var: str, env: _Env, ctx: _Ctx) -> bool:
    frame = model.frame
    if frame is None:
        raise PalfixError("permutation-invariance surrogate needs a colour frame")
    value = _lookup_atom(model, var, env, ctx)
    return frame.is_permutation_closed(value)


# ---------------------------------------------------------------------------
# Fixpoint engines


@dataclass(frozen=True)
class FixpointReport:
    """Result of a greatest-fixpoint computation.

    U is the union of the enumerated post-fixed sets; truth_set is [[body]]
    with the variable bound to U. They coincide for monotone bodies but may
    differ otherwise, so both are reported. ``family`` lists the post-fixed
    candidates in canonical order; ``monotone`` is False when the
    enumeration witnessed f(X) not below f(Y) for some X below Y.
    """

    var: str
    U: frozenset
    truth_set: frozenset
    family: tuple[frozenset, ...]
    monotone: bool
    strategy: str
    f_values: Mapping[frozenset, frozenset] = field(default=None, compare=False, hash=False)

    def non_monotone_union_witness(self):
        """A pair of post-fixed sets whose union is not post-fixed, if the
        enumeration covered that union; None otherwise."""
        if self.f_values is None:
            return None
        for x, y in itertools.combinations(self.family, 2):
            union = x | y
            fu = self.f_values.get(union)
            if fu is not None and not union <= fu:
                return (x, y)
        return None


def _bind(model, var, body, X, kind, env) -> _Env:
    return env.bind_fix(_FixBinding(kind, var, body, model.world_set, frozenset(X), env))


def _f_value(model, var, body, X, kind, env, ctx) -> frozenset:
    return _ext(model, body, _bind(model, var, body, X, kind, env), ctx)


def _canonical(sets: Iterable[frozenset]) -> tuple[frozenset, ...]:
    return tuple(sorted(sets, key=lambda s: (len(s), tuple(sorted(s)))))


def _monotone_over(f_values: Mapping[frozenset, frozenset]) -> bool:
    items = sorted(f_values.items(), key=lambda kv: len(kv[0]))
    for (x, fx), (y, fy) in itertools.combinations(items, 2):
        if x <= y and not fx <= fy:
            return False
    return True


def _report_from_enum(model, var, body, candidates, env, ctx, strategy) -> FixpointReport:
    f_values: dict[frozenset, frozenset] = {}
    family = []
    for X in candidates:
        fX = _f_value(model, var, body, X, "nu", env, ctx)
        f_values[X] = fX
        if X <= fX:
            family.append(X)
    U = frozenset().union(*family) if family else frozenset()
    truth = _f_value(model, var, body, U, "nu", env, ctx)
    return FixpointReport(
        var=var,
        U=U,
        truth_set=truth,
        family=_canonical(family),
        monotone=_monotone_over(f_values),
        strategy=strategy,
        f_values=f_values,
    )


def gfp_subset_enum(model: EpistemicModel, var: str, body: Formula, bindings=None) -> FixpointReport:
    """Exhaustive 2^|W| enumeration of post-fixed sets; |W| <= 20."""
    if len(model.worlds) > SUBSET_ENUM_MAX_WORLDS:
        raise SizeGuardError(
            f"subset enumeration needs |W| <= {SUBSET_ENUM_MAX_WORLDS}, got {len(model.worlds)}"
        )
    env = _plain_env(bindings)
    worlds = model.worlds
    candidates = [
        frozenset(c) for r in range(len(worlds) + 1) for c in itertools.combinations(worlds, r)
    ]
    return _report_from_enum(model, var, body, candidates, env, _CTX, "subset-enum")


def gfp_invariant_enum(model: EpistemicModel, var: str, body: Formula, bindings=None) -> FixpointReport:
    """Enumerate only unions of the model's colour-permutation classes."""
    frame = model.frame
    if frame is None:
        raise PalfixError("model lacks colour-permutation class structure")
    classes = frame.class_sets()
    if frozenset().union(*classes) != model.world_set:
        raise PalfixError("invariant enumeration requires the full generated model")
    if len(classes) > INVARIANT_ENUM_MAX_CLASSES:
        raise SizeGuardError(
            f"too many permutation classes ({len(classes)}) for enumeration"
        )
    env = _plain_env(bindings)
    candidates = []
    for r in range(len(classes) + 1):
        for combo in itertools.combinations(classes, r):
            candidates.append(frozenset().union(*combo) if combo else frozenset())
    return _report_from_enum(model, var, body, candidates, env, _CTX, "invariant-enum")


def _lfp_kleene(model, var, body, env, ctx, max_iter=None) -> frozenset:
    limit = (len(model.worlds) + 2) if max_iter is None else max_iter
    X = frozenset()
    for step in range(1, limit + 1):
        nxt = _f_value(model, var, body, X, "mu", env, ctx)
        if not X <= nxt:
            raise NonMonotoneIterationError(step, X, nxt)
        if nxt == X:
            return X
        X = nxt
    raise NonMonotoneIterationError(limit, X, X)  # did not stabilize within bound


def lfp_kleene(model: EpistemicModel, var: str, body: Formula, bindings=None) -> frozenset:
    """Least fixpoint by Kleene iteration from the empty set, asserting the
    chain grows at every step (the monotonicity-along-the-chain guard)."""
    return _lfp_kleene(model, var, body, _plain_env(bindings), _CTX)


def mu_direct(model: EpistemicModel, var: str, body: Formula, bindings=None) -> frozenset:
    """Least fixpoint as the intersection of all pre-fixed sets, by
    exhaustive subset enumeration; |W| <= 20."""
    if len(model.worlds) > SUBSET_ENUM_MAX_WORLDS:
        raise SizeGuardError(
            f"subset enumeration needs |W| <= {SUBSET_ENUM_MAX_WORLDS}, got {len(model.worlds)}"
        )
    env = _plain_env(bindings)
    worlds = model.worlds
    pre_fixed = []
    for r in range(len(worlds) + 1):
        for combo in itertools.combinations(worlds, r):
            X = frozenset(combo)
            if _f_value(model, var, body, X, "mu", env, _CTX) <= X:
                pre_fixed.append(X)
    U = frozenset(model.world_set).intersection(*pre_fixed)
    return _f_value(model, var, body, U, "mu", env, _CTX)


def mu_via_abbrev(model: EpistemicModel, var: str, body: Formula, bindings=None) -> frozenset:
    """Least fixpoint via the abbreviation mu x. f := ~nu x. ~f[x := ~x],
    handing the rewritten body to the greatest-fixpoint machinery."""
    rewritten = lang.desugar(Lfp(var, body))
    return _ext(model, rewritten, _plain_env(bindings), _CTX)


def _gfp_kleene_from_top(model, var, body, env, ctx) -> FixpointReport:
    W = model.world_set
    X = frozenset(W)
    f_values = {}
    for step in range(1, len(W) + 2):
        nxt = _f_value(model, var, body, X, "nu", env, ctx)
        f_values[X] = nxt
        if not nxt <= X:
            raise NonMonotoneIterationError(step, X, nxt)
        if nxt == X:
            break
        X = nxt
    else:
        raise NonMonotoneIterationError(len(W) + 2, X, X)
    truth = f_values.get(X) or _f_value(model, var, body, X, "nu", env, ctx)
    return FixpointReport(
        var=var,
        U=X,
        truth_set=truth,
        family=(X,),
        monotone=True,
        strategy="kleene-top",
        f_values=f_values,
    )


def _gfp_auto(model, var, body, env, ctx, hint=None) -> FixpointReport:
    if hint == "classes" and model.frame is not None:
        classes = model.frame.class_sets()
        if frozenset().union(*classes) == model.world_set and len(classes) <= INVARIANT_ENUM_MAX_CLASSES:
            candidates = []
            for r in range(len(classes) + 1):
                for combo in itertools.combinations(classes, r):
                    candidates.append(frozenset().union(*combo) if combo else frozenset())
            return _report_from_enum(model, var, body, candidates, env, ctx, "invariant-enum")
    if len(model.worlds) <= AUTO_ENUM_MAX_WORLDS:
        worlds = model.worlds
        candidates = [
            frozenset(c) for r in range(len(worlds) + 1) for c in itertools.combinations(worlds, r)
        ]
        return _report_from_enum(model, var, body, candidates, env, ctx, "subset-enum")
    return _gfp_kleene_from_top(model, var, body, env, ctx)
