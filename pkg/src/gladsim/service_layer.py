"""Service-level sequencing: hard visit requirements and soft ordering preferences."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import EmptyRequest, ParseError, ValidationError
from .lane_map import ScenarioMap, read_document, resolve_scenario

DEFAULT_VIOLATION_COST = 300.0
RELATIONS = ("before", "after")


@dataclass(frozen=True)
class RequirementGroup:
    """Visit exactly one of ``alternatives``."""

    alternatives: tuple[str, ...]

    def __post_init__(self) -> None:
        alts = tuple(sorted(set(self.alternatives)))
        if not alts:
            raise EmptyRequest("requirement groups must be non-empty")
        object.__setattr__(self, "alternatives", alts)


@dataclass(frozen=True)
class ServiceRequest:
    required: tuple[RequirementGroup, ...] = ()
    terminal: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "required", tuple(self.required))
        if self.terminal is not None and any(self.terminal in g.alternatives for g in self.required):
            raise EmptyRequest(f"terminal {self.terminal!r} may not also appear in a requirement group")

    @classmethod
    def of(cls, *groups: Iterable[str], terminal: str | None = None) -> ServiceRequest:
        return cls(tuple(RequirementGroup(tuple(g)) for g in groups), terminal)

    @property
    def is_empty(self) -> bool:
        return not self.required and self.terminal is None

    def without(self, poi: str) -> ServiceRequest:
        """The request left after visiting ``poi``."""
        if poi == self.terminal:
            return ServiceRequest(self.required, None)
        kept = [g for g in self.required if poi not in g.alternatives]
        if len(kept) == len(self.required):
            raise ValidationError(f"{poi!r} does not satisfy any outstanding requirement")
        return ServiceRequest(tuple(kept), self.terminal)


@dataclass(frozen=True)
class Preference:
    """Soft ordering constraint between two POI categories (or POI names).

    ``before(A, B)`` holds when every visited A precedes every visited B;
    ``after(A, B)`` when every visited A follows every visited B. Absent
    categories satisfy the constraint vacuously.
    """

    name: str
    relation: str
    first: str
    second: str
    violation_cost: float = DEFAULT_VIOLATION_COST

    def __post_init__(self) -> None:
        if self.relation not in RELATIONS:
            raise ValidationError(f"unknown preference relation {self.relation!r}")
        if self.violation_cost < 0:
            raise ValidationError("violation_cost must be non-negative")

    def violated(self, categories: list[tuple[str, str]]) -> bool:
        firsts = [i for i, (n, c) in enumerate(categories) if self.first in (n, c)]
        seconds = [i for i, (n, c) in enumerate(categories) if self.second in (n, c)]
        if not firsts or not seconds:
            return False
        if self.relation == "before":
            return max(firsts) > min(seconds)
        return min(firsts) < max(seconds)


@dataclass(frozen=True)
class PoiSequence:
    visits: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "visits", tuple(self.visits))


def validate_request(scenario: ScenarioMap, rqst: ServiceRequest) -> None:
    if rqst.is_empty:
        raise EmptyRequest("the request has no driving tasks")
    names = [n for g in rqst.required for n in g.alternatives]
    if rqst.terminal is not None:
        names.append(rqst.terminal)
    for n in names:
        scenario.poi(n)


def enumerate_sequences(scenario: ScenarioMap, rqst: ServiceRequest) -> list[PoiSequence]:
    """Every visit order meeting the hard request, in lexicographic order."""
    validate_request(scenario, rqst)
    tail = (rqst.terminal,) if rqst.terminal is not None else ()
    found = set()
    for order in itertools.permutations(rqst.required):
        for choice in itertools.product(*(g.alternatives for g in order)):
            if len(set(choice)) == len(choice) and not set(choice) & set(tail):
                found.add(choice + tail)
    return [PoiSequence(v) for v in sorted(found)]


def pref_cost(scenario: ScenarioMap, seq: PoiSequence | Iterable[str], prefs: Iterable[Preference]) -> float:
    visits = seq.visits if isinstance(seq, PoiSequence) else tuple(seq)
    categories = [(n, scenario.poi(n).category) for n in visits]
    return sum(p.violation_cost for p in prefs if p.violated(categories))


def parse_service(data: Mapping[str, Any]) -> tuple[ServiceRequest, list[Preference]]:
    raw = data.get("request")
    if raw is None:
        raise ParseError("scenario has no 'request'")
    try:
        groups = tuple(RequirementGroup(tuple(g)) for g in raw.get("required", []))
        rqst = ServiceRequest(groups, raw.get("terminal"))
        prefs = [
            Preference(
                name=str(p["name"]),
                relation=str(p["relation"]),
                first=str(p["first"]),
                second=str(p["second"]),
                violation_cost=float(p.get("violation_cost", DEFAULT_VIOLATION_COST)),
            )
            for p in data.get("preferences", [])
        ]
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed request or preferences: {exc}") from None
    return rqst, prefs


def load_service(path: str | Path) -> tuple[ServiceRequest, list[Preference]]:
    return parse_service(read_document(resolve_scenario(path)))


def service_to_dict(rqst: ServiceRequest, prefs: Iterable[Preference]) -> dict[str, Any]:
    return {
        "request": {"required": [list(g.alternatives) for g in rqst.required], "terminal": rqst.terminal},
        "preferences": [
            {"name": p.name, "relation": p.relation, "first": p.first, "second": p.second,
             "violation_cost": p.violation_cost}
            for p in prefs
        ],
    }
