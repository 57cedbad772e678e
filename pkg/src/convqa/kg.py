"""Knowledge graph store: n-ary facts compiled to labeled walk edges.

Facts are loaded from a TAB-separated file, one fact per line:

    factId<TAB>subjId|subjLabel<TAB>predId|predLabel<TAB>objId|objLabel[<TAB>qpId|qpLabel|qoId|qoLabel]*

``#`` starts a comment line; labels must not contain TAB or ``|``. Node kind
is carried by the id: ``lit:`` prefixes literals, ``type:`` prefixes types,
everything else is an entity. Subjects must be entities.

Each fact becomes bidirectional labeled edges walkable in a single hop:
the main edge, one edge between each main endpoint and each qualifier
object, and one edge between each pair of qualifier objects. Every forward
edge is paired with a reversed edge carrying the same path label, so a fact
with m qualifiers yields exactly 2 * (1 + 2m + m*(m-1)/2) directed edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .embeddings import tokenize

__all__ = [
    "EntityRef",
    "NaryFact",
    "ActionEdge",
    "KgIndex",
    "node_kind",
    "parse_fact_line",
    "build_action_edges",
    "load_kg",
    "load_kg_lines",
    "kg_prior",
    "one_hop_neighbors",
]


@dataclass(frozen=True)
class EntityRef:
    """A graph node: entity, literal, or type. Literals keep their lexical form as label."""

    id: str
    label: str
    kind: str  # "entity" | "literal" | "type"


@dataclass(frozen=True)
class NaryFact:
    fact_id: str
    subject: EntityRef
    predicate_id: str
    predicate_label: str
    object: EntityRef
    qualifiers: tuple[tuple[str, str, EntityRef], ...]  # (predId, predLabel, obj)


@dataclass(frozen=True)
class ActionEdge:
    """One directed walk step; ``reversed`` marks the paired back edge."""

    start: EntityRef
    end: EntityRef
    path_label: str
    source_fact_id: str
    reversed: bool


def node_kind(node_id: str) -> str:
    if node_id.startswith("lit:"):
        return "literal"
    if node_id.startswith("type:"):
        return "type"
    return "entity"


def _make_ref(node_id: str, label: str) -> EntityRef:
    return EntityRef(id=node_id, label=label, kind=node_kind(node_id))


def _split_pair(field_text: str, where: str) -> tuple[str, str]:
    parts = field_text.split("|")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise ValueError(f"{where}: expected 'id|label', got {field_text!r}")
    return parts[0], parts[1]


def parse_fact_line(line: str, lineno: int = 0) -> NaryFact:
    """Parse one fact line; raises ValueError with the line number on bad input."""
    where = f"line {lineno}"
    fields = line.rstrip("\n").split("\t")
    if len(fields) < 4:
        raise ValueError(f"{where}: expected at least 4 TAB-separated fields, got {len(fields)}")
    fact_id = fields[0]
    if not fact_id:
        raise ValueError(f"{where}: empty fact id")
    subj_id, subj_label = _split_pair(fields[1], where)
    pred_id, pred_label = _split_pair(fields[2], where)
    obj_id, obj_label = _split_pair(fields[3], where)
    subject = _make_ref(subj_id, subj_label)
    if subject.kind != "entity":
        raise ValueError(f"{where}: fact subject must be an entity, got {subj_id!r}")
    qualifiers = []
    for qfield in fields[4:]:
        parts = qfield.split("|")
        if len(parts) != 4 or not all(parts):
            raise ValueError(f"{where}: expected 'qpId|qpLabel|qoId|qoLabel', got {qfield!r}")
        qp_id, qp_label, qo_id, qo_label = parts
        qualifiers.append((qp_id, qp_label, _make_ref(qo_id, qo_label)))
    return NaryFact(
        fact_id=fact_id,
        subject=subject,
        predicate_id=pred_id,
        predicate_label=pred_label,
        object=_make_ref(obj_id, obj_label),
        qualifiers=tuple(qualifiers),
    )


def build_action_edges(fact: NaryFact) -> list[ActionEdge]:
    """Compile one fact into its directed edge set.

    Label composition:
      - main edge: ``<P>`` or, with qualifiers, ``<P> # <qp1> <qo1-label> # ...``
      - main endpoint <-> qualifier object: ``<P> <other-main-endpoint-label> # <qp>``
      - qualifier object pair i<j: ``<P> <main-object-label> # <qp_j>``
    Reversed edges reuse the forward label.
    """
    edges: list[ActionEdge] = []

    def both_ways(a: EntityRef, b: EntityRef, label: str) -> None:
        edges.append(ActionEdge(a, b, label, fact.fact_id, reversed=False))
        edges.append(ActionEdge(b, a, label, fact.fact_id, reversed=True))

    main_label = fact.predicate_label
    if fact.qualifiers:
        tail = " # ".join(f"{qp_label} {qo.label}" for _, qp_label, qo in fact.qualifiers)
        main_label = f"{fact.predicate_label} # {tail}"
    both_ways(fact.subject, fact.object, main_label)

    for _, qp_label, qo in fact.qualifiers:
        both_ways(fact.subject, qo, f"{fact.predicate_label} {fact.object.label} # {qp_label}")
        both_ways(fact.object, qo, f"{fact.predicate_label} {fact.subject.label} # {qp_label}")

    quals = fact.qualifiers
    for i in range(len(quals)):
        for j in range(i + 1, len(quals)):
            _, qp_j_label, qo_j = quals[j]
            qo_i = quals[i][2]
            both_ways(qo_i, qo_j, f"{fact.predicate_label} {fact.object.label} # {qp_j_label}")
    return edges


@dataclass
class KgIndex:
    """Loaded graph: node registry, adjacency, subject frequencies, label index."""

    facts: dict[str, NaryFact] = field(default_factory=dict)
    entities: dict[str, EntityRef] = field(default_factory=dict)
    adjacency: dict[str, list[ActionEdge]] = field(default_factory=dict)
    subject_frequency: dict[str, int] = field(default_factory=dict)
    label_index: dict[frozenset[str], list[str]] = field(default_factory=dict)

    def outgoing_paths(self, entity_id: str, cap: int = 1000, seed: int = 0) -> list[ActionEdge]:
        """Adjacent edges of a node; uniform sample without replacement above ``cap``.

        Deterministic for a fixed seed; unknown nodes yield an empty list.
        """
        if cap <= 0:
            raise ValueError(f"action cap must be positive, got {cap}")
        edges = self.adjacency.get(entity_id, [])
        if len(edges) <= cap:
            return list(edges)
        rng = np.random.default_rng(seed)
        picked = rng.choice(len(edges), size=cap, replace=False)
        return [edges[i] for i in sorted(picked.tolist())]

    def ref(self, entity_id: str) -> EntityRef | None:
        return self.entities.get(entity_id)


def _register(kg: KgIndex, ref: EntityRef) -> None:
    if ref.id not in kg.entities:
        kg.entities[ref.id] = ref
        key = frozenset(tokenize(ref.label))
        if key:
            kg.label_index.setdefault(key, []).append(ref.id)


def load_kg_lines(lines: Iterable[str], source: str = "<memory>") -> KgIndex:
    kg = KgIndex()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fact = parse_fact_line(line, lineno)
        if fact.fact_id in kg.facts:
            raise ValueError(f"{source}:{lineno}: duplicate fact id {fact.fact_id!r}")
        kg.facts[fact.fact_id] = fact
        _register(kg, fact.subject)
        _register(kg, fact.object)
        for _, _, qo in fact.qualifiers:
            _register(kg, qo)
        kg.subject_frequency[fact.subject.id] = kg.subject_frequency.get(fact.subject.id, 0) + 1
        for edge in build_action_edges(fact):
            kg.adjacency.setdefault(edge.start.id, []).append(edge)
    return kg


def load_kg(path: str | Path) -> KgIndex:
    """Load a fact file into an index; parse errors carry file and line."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        return load_kg_lines(fh, source=str(path))


def kg_prior(kg: KgIndex, entity_id: str, f_max: int = 100) -> float:
    """Frequency prior min(subjectFrequency, fMax) / fMax, in [0, 1]."""
    if f_max <= 0:
        raise ValueError(f"fMax must be positive, got {f_max}")
    freq = kg.subject_frequency.get(entity_id, 0)
    return min(freq, f_max) / f_max


def one_hop_neighbors(kg: KgIndex, entity_ids: Iterable[str]) -> dict[str, int]:
    """Map each 1-hop neighbor to the number of input nodes that reach it.

    Parallel edges from one source count once; iteration order is
    deterministic (inputs sorted, adjacency in load order).
    """
    counts: dict[str, int] = {}
    for source_id in sorted(set(entity_ids)):
        seen: set[str] = set()
        for edge in kg.adjacency.get(source_id, []):
            if edge.end.id not in seen:
                seen.add(edge.end.id)
                counts[edge.end.id] = counts.get(edge.end.id, 0) + 1
    return counts
