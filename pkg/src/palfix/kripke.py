"""Explicit epistemic models with partition-stored relations.

A model is (worlds, per-agent partition, valuation). Storing each agent's
indistinguishability relation as a partition makes reflexivity, symmetry and
transitivity unbreakable and makes restriction and refinement linear time.
Models are immutable; every operation returns a new model. World ids are
stable across updates: dropped worlds simply disappear.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

from .errors import ModelFormatError, SizeGuardError, UnknownAgentError

DEFAULT_MAX_WORLDS = 4096


def max_worlds_guard(override: Optional[int] = None) -> int:
    """Explicit-model size cap; PALFIX_MAX_WORLDS overrides the default."""
    if override is not None:
        return override
    return int(os.environ.get("PALFIX_MAX_WORLDS", DEFAULT_MAX_WORLDS))


class EpistemicModel:
    """Worlds + per-agent block partitions + valuation.

    ``frame`` is optional puzzle metadata (see puzzles.ColourFrame); the
    checker uses it to interpret symbolic bell announcements and
    permutation-invariance surrogates.
    """

    __slots__ = (
        "worlds",
        "world_set",
        "relations",
        "valuation",
        "frame",
        "_block_index",
        "_restrict_cache",
        "_assign_cache",
        "_scratch",
    )

    def __init__(
        self,
        worlds: Iterable[str],
        relations: Mapping[str, Iterable[Iterable[str]]],
        valuation: Mapping[str, Iterable[str]],
        frame=None,
        _validate: bool = True,
    ):
        self.worlds: tuple[str, ...] = tuple(worlds)
        self.world_set: frozenset[str] = frozenset(self.worlds)
        self.relations: dict[str, tuple[frozenset[str], ...]] = {
            agent: tuple(frozenset(b) for b in blocks) for agent, blocks in relations.items()
        }
        self.valuation: dict[str, frozenset[str]] = {
            atom: frozenset(ws) for atom, ws in valuation.items()
        }
        self.frame = frame
        self._block_index: dict[str, dict[str, frozenset[str]]] = {}
        self._restrict_cache: dict[frozenset[str], "EpistemicModel"] = {}
        self._assign_cache: dict = {}
        self._scratch: dict = {}
        if _validate:
            self._check_invariants()

    def _check_invariants(self):
        if len(self.world_set) != len(self.worlds):
            raise ModelFormatError("duplicate world ids")
        for agent, blocks in self.relations.items():
            seen: set[str] = set()
            for block in blocks:
                if not block:
                    raise ModelFormatError(f"agent {agent!r} has an empty block")
                if block & seen:
                    raise ModelFormatError(f"agent {agent!r} has overlapping blocks")
                if not block <= self.world_set:
                    raise ModelFormatError(f"agent {agent!r} block mentions unknown worlds")
                seen |= block
            if seen != self.world_set:
                raise ModelFormatError(f"agent {agent!r} blocks do not cover all worlds")
        for atom, ws in self.valuation.items():
            if not ws <= self.world_set:
                raise ModelFormatError(f"atom {atom!r} valued at unknown worlds")

    # -- queries -----------------------------------------------------------

    @property
    def agents(self) -> tuple[str, ...]:
        return tuple(sorted(self.relations))

    @property
    def atoms(self) -> tuple[str, ...]:
        return tuple(sorted(self.valuation))

    def block_of(self, agent: str, world: str) -> frozenset[str]:
        if agent not in self.relations:
            raise UnknownAgentError(f"unknown agent {agent!r}")
        idx = self._block_index.get(agent)
        if idx is None:
            idx = {w: b for b in self.relations[agent] for w in b}
            self._block_index[agent] = idx
        return idx[world]

    def is_empty(self) -> bool:
        return not self.worlds

    def __contains__(self, world: str) -> bool:
        return world in self.world_set

    def __len__(self) -> int:
        return len(self.worlds)

    def __repr__(self) -> str:
        return f"EpistemicModel({len(self.worlds)} worlds, {len(self.relations)} agents)"

    def describe(self) -> str:
        """Deterministic plain-text rendering (world names and blocks)."""
        lines = [f"worlds: {' '.join(self.worlds)}"]
        for agent in self.agents:
            blocks = sorted(tuple(sorted(b)) for b in self.relations[agent])
            rendered = " ".join("{" + ",".join(b) + "}" for b in blocks)
            lines.append(f"  {agent}: {rendered}")
        return "\n".join(lines)

    # -- operations ----------------------------------------------------------

    def restrict(self, keep: Iterable[str]) -> "EpistemicModel":
        """Submodel on ``keep``; blocks and valuation intersected, empty
        blocks dropped. The empty model is a legal value."""
        keep = frozenset(keep)
        if not keep <= self.world_set:
            raise ModelFormatError("restriction set mentions unknown worlds")
        if keep == self.world_set:
            return self
        cached = self._restrict_cache.get(keep)
        if cached is not None:
            return cached
        worlds = tuple(w for w in self.worlds if w in keep)
        relations = {
            agent: tuple(nb for nb in (b & keep for b in blocks) if nb)
            for agent, blocks in self.relations.items()
        }
        valuation = {atom: ws & keep for atom, ws in self.valuation.items()}
        sub = EpistemicModel(worlds, relations, valuation, frame=self.frame, _validate=False)
        self._restrict_cache[keep] = sub
        return sub

    def refine_by_key(self, key: Callable[[str], object]) -> "EpistemicModel":
        """Split every agent block by the label ``key(world)``.

        Worlds are kept; only links across different labels are cut. The
        submodel containing w equals restrict(self, preimage of key(w)).
        """
        labels = {w: key(w) for w in self.worlds}
        relations = {}
        changed = False
        for agent, blocks in self.relations.items():
            new_blocks: list[frozenset[str]] = []
            for block in blocks:
                groups: dict[object, list[str]] = {}
                for w in block:
                    groups.setdefault(labels[w], []).append(w)
                if len(groups) > 1:
                    changed = True
                new_blocks.extend(frozenset(g) for g in groups.values())
            relations[agent] = tuple(new_blocks)
        if not changed:
            return self
        return EpistemicModel(self.worlds, relations, self.valuation, frame=self.frame, _validate=False)

    def with_atom(self, atom: str, worlds: Iterable[str]) -> "EpistemicModel":
        """Model identical but for atom's valuation (the p -> X override)."""
        ws = frozenset(worlds)
        if not ws <= self.world_set:
            raise ModelFormatError("atom valuation mentions unknown worlds")
        valuation = dict(self.valuation)
        valuation[atom] = ws
        return EpistemicModel(self.worlds, self.relations, valuation, frame=self.frame, _validate=False)

    def with_valuation(self, updates: Mapping[str, frozenset[str]]) -> "EpistemicModel":
        valuation = dict(self.valuation)
        valuation.update(updates)
        return EpistemicModel(self.worlds, self.relations, valuation, frame=self.frame, _validate=False)


def apply_assignment(model: EpistemicModel, sigma: Mapping[str, "Formula"]) -> EpistemicModel:
    """Public assignment: evaluate every right-hand side in the original
    model, then write all results simultaneously. Worlds and relations are
    unchanged."""
    from . import checker  # evaluation lives in the checker

    updates = {atom: checker.extension(model, rhs) for atom, rhs in sigma.items()}
    return model.with_valuation(updates)


@dataclass(frozen=True)
class PointedModel:
    model: EpistemicModel
    point: str

    def __post_init__(self):
        if self.point not in self.model.world_set:
            raise ModelFormatError(f"point {self.point!r} is not a world of the model")


# ---------------------------------------------------------------------------
# JSON model files
#
# {"worlds": [{"id": "110", "true_atoms": ["m_a", "m_b"]}, ...],
#  "agents": {"a": [["000", "100"], ...], ...},
#  "point": "110"}


def to_json_dict(model: EpistemicModel, point: Optional[str] = None) -> dict:
    doc = {
        "worlds": [
            {"id": w, "true_atoms": sorted(a for a in model.valuation if w in model.valuation[a])}
            for w in model.worlds
        ],
        "agents": {
            agent: sorted(sorted(b) for b in model.relations[agent]) for agent in model.agents
        },
    }
    if point is not None:
        doc["point"] = point
    return doc


def from_json_dict(doc: dict) -> tuple[EpistemicModel, Optional[str]]:
    try:
        world_entries = doc["worlds"]
        agents = doc["agents"]
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"missing required key: {exc}") from exc
    worlds = []
    valuation: dict[str, set[str]] = {}
    for entry in world_entries:
        wid = entry["id"]
        worlds.append(wid)
        for atom in entry.get("true_atoms", ()):
            valuation.setdefault(atom, set()).add(wid)
    model = EpistemicModel(worlds, agents, valuation)
    point = doc.get("point")
    if point is not None and point not in model.world_set:
        raise ModelFormatError(f"point {point!r} is not a world")
    return model, point


def save_model(model: EpistemicModel, path: str, point: Optional[str] = None) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(model, point), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> tuple[EpistemicModel, Optional[str]]:
    with open(path) as fh:
        doc = json.load(fh)
    return from_json_dict(doc)


def guard_size(n_worlds: int, limit: Optional[int] = None, what: str = "model") -> None:
    cap = max_worlds_guard(limit)
    if n_worlds > cap:
        raise SizeGuardError(
            f"{what} would have {n_worlds} worlds, above the cap of {cap} "
            f"(set PALFIX_MAX_WORLDS or pass max_worlds to raise it)"
        )
