"""Rule-based element classification per engineering profile.

A profile is an ordered list of case-insensitive substring rules over an
element's ``name``, ``category`` or ``material``. The first rule that matches
decides the verdict; anything left unmatched is irrelevant. Sky (id 0) and
ground (id 1) are always irrelevant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import MalformedCatalog, SceneError, UnknownElementId

SKY_ID = 0
GROUND_ID = 1
RESERVED_IDS = (SKY_ID, GROUND_ID)

MATCH_FIELDS = ("name", "category", "material")
VERDICTS = ("relevant", "irrelevant")

# Keyword packs reconstructed from the element kinds a BIM site model carries.
DEFAULT_KEYWORDS = {
    "structure": ("wall", "roof", "beam", "slab", "column", "frame", "concrete", "metal"),
    "method": ("crane", "scaffold", "formwork", "fence", "access"),
    "plumbing": ("pipe", "duct", "valve", "pump"),
}


@dataclass(frozen=True)
class Element:
    id: int
    name: str
    category: str = ""
    material: str = ""


@dataclass
class ElementCatalog:
    elements: list[Element] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for el in self.elements:
            if el.id in seen:
                raise MalformedCatalog(f"duplicate element id {el.id}")
            if el.id <= GROUND_ID:
                raise MalformedCatalog(f"element id {el.id} collides with reserved ids 0/1")
            seen.add(el.id)

    @property
    def ids(self) -> set[int]:
        return {el.id for el in self.elements}

    def to_json(self) -> dict:
        return {
            "elements": [
                {"id": el.id, "name": el.name, "category": el.category, "material": el.material}
                for el in self.elements
            ]
        }

    @classmethod
    def from_json(cls, payload: Mapping) -> "ElementCatalog":
        """Build a catalog from the ``elements.json`` payload.

        Raises:
            MalformedCatalog: on any schema violation.
        """
        if not isinstance(payload, Mapping) or not isinstance(payload.get("elements"), list):
            raise MalformedCatalog('expected an object with an "elements" list')
        elements = []
        for i, raw in enumerate(payload["elements"]):
            if not isinstance(raw, Mapping):
                raise MalformedCatalog(f"elements[{i}] is not an object")
            el_id = raw.get("id")
            if not isinstance(el_id, int) or isinstance(el_id, bool):
                raise MalformedCatalog(f"elements[{i}].id must be an integer")
            strings = {}
            for key in MATCH_FIELDS:
                value = raw.get(key, "")
                if not isinstance(value, str):
                    raise MalformedCatalog(f"elements[{i}].{key} must be a string")
                strings[key] = value
            if "name" not in raw:
                raise MalformedCatalog(f"elements[{i}] has no name")
            elements.append(Element(id=el_id, **strings))
        return cls(elements)


@dataclass(frozen=True)
class Rule:
    field: str
    pattern: str
    verdict: str = "relevant"

    def __post_init__(self):
        if self.field not in MATCH_FIELDS:
            raise ValueError(f"rule field must be one of {MATCH_FIELDS}, got {self.field!r}")
        if not self.pattern:
            raise ValueError("rule pattern must be non-empty")
        if self.verdict not in VERDICTS:
            raise ValueError(f"rule verdict must be one of {VERDICTS}, got {self.verdict!r}")

    def matches(self, element: Element) -> bool:
        return self.pattern.lower() in getattr(element, self.field).lower()


@dataclass(frozen=True)
class Profile:
    name: str
    rules: tuple[Rule, ...]

    def __post_init__(self):
        if not self.rules:
            raise ValueError(f"profile {self.name!r} needs at least one rule")


def _keyword_profile(name: str, keywords: Iterable[str]) -> Profile:
    rules = []
    for word in keywords:
        rules.append(Rule("name", word, "relevant"))
        rules.append(Rule("category", word, "relevant"))
    return Profile(name, tuple(rules))


def default_profiles() -> list[Profile]:
    """The three built-in profiles: structure, method and plumbing."""
    return [_keyword_profile(name, words) for name, words in DEFAULT_KEYWORDS.items()]


def load_rule_pack(path: str | Path) -> list[Profile]:
    """Read a ``profiles.json`` rule pack.

    Raises:
        SceneError: if the file is missing or does not follow the schema.
    """
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise SceneError(f"rule pack not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError(f"cannot read rule pack {path}: {exc}") from exc
    try:
        profiles = []
        for entry in payload["profiles"]:
            rules = tuple(
                Rule(r["field"], r["pattern"], r.get("verdict", "relevant")) for r in entry["rules"]
            )
            profiles.append(Profile(entry["name"], rules))
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"malformed rule pack {path}: {exc}") from exc
    return profiles


def resolve_profile(name: str, rule_pack: str | Path | None = None) -> Profile:
    """Look up a profile by name; rule-pack entries override built-ins."""
    profiles = {p.name: p for p in default_profiles()}
    if rule_pack is not None:
        profiles.update({p.name: p for p in load_rule_pack(rule_pack)})
    if name not in profiles:
        raise SceneError(f"unknown profile {name!r}; available: {sorted(profiles)}")
    return profiles[name]


def classify(catalog: ElementCatalog, profile: Profile) -> dict[int, bool]:
    """Map every catalog id (plus sky and ground) to True when relevant."""
    relevance = {SKY_ID: False, GROUND_ID: False}
    for element in catalog.elements:
        verdict = "irrelevant"
        for rule in profile.rules:
            if rule.matches(element):
                verdict = rule.verdict
                break
        relevance[element.id] = verdict == "relevant"
    return relevance


def relevance_masks(labels: np.ndarray, relevance: Mapping[int, bool]) -> tuple[np.ndarray, np.ndarray]:
    """Split a label mask into boolean (relevant, irrelevant) pixel sets.

    The two masks are disjoint and together cover every pixel.

    Raises:
        UnknownElementId: if the mask holds an id absent from ``relevance``.
    """
    ids = np.unique(labels)
    missing = [int(i) for i in ids if int(i) not in relevance]
    if missing:
        raise UnknownElementId(f"label ids without a relevance verdict: {missing}")
    relevant_ids = np.array([i for i in ids if relevance[int(i)]], dtype=labels.dtype)
    relevant = np.isin(labels, relevant_ids)
    return relevant, ~relevant
