"""Conversation context tracking.

The context is the set of graph entities the conversation is currently
about. The first question seeds it through entity linking; every follow-up
scores the 1-hop neighborhood of the current set with a weighted blend of
graph overlap, lexical match, linker confidence, and a frequency prior, and
admits candidates above a threshold. The set only grows within a
conversation and is dropped when the conversation ends. Answer entities are
never inserted by the tracker; only utterance-driven scoring admits nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embeddings import text_digest, tokenize
from .kg import EntityRef, KgIndex, kg_prior, one_hop_neighbors

__all__ = [
    "STOPWORDS",
    "HISTORY_MODES",
    "ContextConfig",
    "ConversationContext",
    "CandidateScore",
    "StaticNed",
    "FileNed",
    "LexicalNed",
    "load_ned_file",
    "content_words",
    "jaccard",
    "init_context",
    "score_candidate",
    "update_context",
    "reset_context",
    "build_question_input",
    "input_dim_for",
]

# Version 1 of the fixed function-word list. Changing it changes the match
# feature everywhere, so treat edits as a format change.
STOPWORDS = frozenset("""
a about after all an and any are as at be been before but by can could did do
does for from had has have he her his how i if in into is it its me my no not
of on or our she so that the their them then there these they this to was we
were what when where which who why will with you your
""".split())

HISTORY_MODES = ("none", "first", "first+prev", "refAveraged")


def content_words(text: str) -> set[str]:
    return set(tokenize(text)) - STOPWORDS


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 0.0
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


@dataclass
class ContextConfig:
    """Weights and threshold for candidate scoring, plus the history mode."""

    h1: float = 0.1  # graph overlap weight
    h2: float = 0.1  # lexical match weight
    h3: float = 0.7  # linker confidence weight
    h4: float = 0.1  # frequency prior weight
    h_cxt: float = 0.25
    f_max: int = 100
    history_mode: str = "none"

    def __post_init__(self) -> None:
        weights = (self.h1, self.h2, self.h3, self.h4)
        for w in weights:
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"feature weights must be in [0,1], got {weights}")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError(f"feature weights must sum to 1, got {sum(weights)}")
        if not 0.0 <= self.h_cxt <= 1.0:
            raise ValueError(f"threshold must be in [0,1], got {self.h_cxt}")
        if self.f_max <= 0:
            raise ValueError(f"fMax must be positive, got {self.f_max}")
        if self.history_mode not in HISTORY_MODES:
            raise ValueError(
                f"history mode must be one of {HISTORY_MODES}, got {self.history_mode!r}")


@dataclass
class ConversationContext:
    """Per-conversation state owned by exactly one session."""

    context_entities: set[EntityRef] = field(default_factory=set)
    utterances: list[str] = field(default_factory=list)
    intent_utterances: list[list[str]] = field(default_factory=list)
    context_questions: list[str] = field(default_factory=list)
    turn: int = 0
    intent_index: int = 0
    conversation_index: int = 0

    def entity_ids(self) -> list[str]:
        return sorted(ref.id for ref in self.context_entities)


@dataclass(frozen=True)
class CandidateScore:
    entity: EntityRef
    overlap: float
    match: float
    ned: float
    prior: float
    cxt: float


class StaticNed:
    """Entity linker backed by an explicit question -> {entityId: confidence} map."""

    name = "static"

    def __init__(self, mapping: dict[str, dict[str, float]]) -> None:
        self.mapping = mapping
        self.miss_count = 0

    def candidates(self, question: str, history: Sequence[str] = (),
                   restrict: set[str] | None = None) -> dict[str, float]:
        hit = self.mapping.get(question)
        if hit is None:
            self.miss_count += 1
            return {}
        if restrict is None:
            return dict(hit)
        return {eid: conf for eid, conf in hit.items() if eid in restrict}


class FileNed(StaticNed):
    """Linker annotations keyed by sha256 of the exact utterance text."""

    def __init__(self, mapping: dict[str, dict[str, float]], name: str = "ned-file") -> None:
        super().__init__(mapping)
        self.name = name

    def candidates(self, question: str, history: Sequence[str] = (),
                   restrict: set[str] | None = None) -> dict[str, float]:
        return super().candidates(text_digest(question), history, restrict)


def load_ned_file(path: str | Path) -> FileNed:
    """Parse ``<sha256>\\t<entityId>|<conf> [<entityId>|<conf> ...]`` lines."""
    path = Path(path)
    mapping: dict[str, dict[str, float]] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected '<digest>\\t<pairs>'")
            digest, pair_text = parts
            pairs: dict[str, float] = {}
            for token in pair_text.split():
                sub = token.rsplit("|", 1)
                if len(sub) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 'entityId|conf', got {token!r}")
                try:
                    conf = float(sub[1])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad confidence {sub[1]!r}") from None
                if not 0.0 <= conf <= 1.0:
                    raise ValueError(f"{path}:{lineno}: confidence outside [0,1]: {conf}")
                pairs[sub[0]] = conf
            mapping[digest] = pairs
    return FileNed(mapping, name=f"ned:{path.name}")


class LexicalNed:
    """Fallback linker: Jaccard of label words vs utterance content words.

    Follow-ups are matched against the concatenation of all prior questions
    plus the current one; candidates below ``min_confidence`` are dropped.
    """

    def __init__(self, kg: KgIndex, min_confidence: float = 0.5) -> None:
        if not 0.0 < min_confidence <= 1.0:
            raise ValueError(f"min_confidence must be in (0,1], got {min_confidence}")
        self.kg = kg
        self.min_confidence = min_confidence
        self.name = "ned-lexical"
        self.miss_count = 0

    def candidates(self, question: str, history: Sequence[str] = (),
                   restrict: set[str] | None = None) -> dict[str, float]:
        text = " ".join((*history, question))
        words = content_words(text)
        if restrict is not None:
            pool: Iterable[str] = sorted(restrict)
        else:
            pool = self.kg.entities.keys()
        out: dict[str, float] = {}
        for eid in pool:
            ref = self.kg.entities.get(eid)
            if ref is None or ref.kind != "entity":
                continue
            score = jaccard(content_words(ref.label), words)
            if score >= self.min_confidence:
                out[eid] = score
        return out


def init_context(first_question: str, kg: KgIndex, ned,
                 conversation_index: int = 0) -> ConversationContext:
    """Seed a fresh context from entity linking on the first question."""
    if not first_question.strip():
        raise ValueError("cannot initialize context from an empty question")
    linked = ned.candidates(first_question, history=())
    entities = set()
    for eid in sorted(linked):
        ref = kg.entities.get(eid)
        if ref is not None and ref.kind == "entity":
            entities.add(ref)
    ctx = ConversationContext(
        context_entities=entities,
        utterances=[first_question],
        intent_utterances=[[first_question]],
        turn=1,
        intent_index=0,
        conversation_index=conversation_index,
    )
    ctx.context_questions = []
    return ctx


def score_candidate(candidate: EntityRef, question: str, ctx: ConversationContext,
                    kg: KgIndex, cfg: ContextConfig, ned=None,
                    neighbor_counts: dict[str, int] | None = None,
                    ned_confidences: dict[str, float] | None = None) -> CandidateScore:
    """Blend the four context features for one 1-hop candidate.

    ``neighbor_counts`` and ``ned_confidences`` are per-turn precomputations;
    they are derived on demand when absent.
    """
    prev_ids = ctx.entity_ids()
    if not prev_ids:
        raise ValueError("candidate scoring needs a non-empty previous context")
    if neighbor_counts is None:
        neighbor_counts = one_hop_neighbors(kg, prev_ids)
    if ned_confidences is None:
        if ned is None:
            ned_confidences = {}
        else:
            ned_confidences = ned.candidates(question, history=ctx.utterances[:-1],
                                             restrict=set(neighbor_counts))
    overlap = neighbor_counts.get(candidate.id, 0) / len(prev_ids)
    match = jaccard(content_words(candidate.label), content_words(question))
    ned_score = float(ned_confidences.get(candidate.id, 0.0))
    prior = kg_prior(kg, candidate.id, cfg.f_max)
    cxt = cfg.h1 * overlap + cfg.h2 * match + cfg.h3 * ned_score + cfg.h4 * prior
    return CandidateScore(candidate, overlap, match, ned_score, prior, cxt)


def _history_prefix_texts(ctx: ConversationContext, cfg: ContextConfig) -> list[str]:
    """Texts whose mean embedding prefixes the policy input, per history mode."""
    mode = cfg.history_mode
    if mode == "none" or not ctx.utterances:
        return []
    if mode == "first":
        return [ctx.utterances[0]]
    if mode == "first+prev":
        prev = ctx.utterances[-2] if len(ctx.utterances) >= 2 else ctx.utterances[0]
        return [ctx.utterances[0], prev]
    # refAveraged: utterances of the first intent plus the previous intent,
    # excluding the current utterance while still inside the first intent.
    texts = list(ctx.intent_utterances[0])
    if ctx.intent_index == 0:
        texts = texts[:-1]
    elif ctx.intent_index - 1 != 0:
        texts.extend(ctx.intent_utterances[ctx.intent_index - 1])
    if not texts:
        return [ctx.utterances[-1]]
    return texts


def update_context(ctx: ConversationContext, question: str, kg: KgIndex, ned,
                   cfg: ContextConfig, new_intent: bool = False) -> ConversationContext:
    """Record a follow-up utterance and admit qualifying neighbors.

    The entity set is monotone: nothing is ever removed here. ``new_intent``
    only influences intent grouping for the refAveraged history mode.
    """
    if ctx.turn < 1:
        raise ValueError("update_context needs an initialized context")
    if not question.strip():
        raise ValueError("cannot update context with an empty question")
    ctx.utterances.append(question)
    if new_intent:
        ctx.intent_utterances.append([question])
        ctx.intent_index += 1
    else:
        ctx.intent_utterances[-1].append(question)
    ctx.turn += 1

    prev_ids = ctx.entity_ids()
    if prev_ids:
        neighbor_counts = one_hop_neighbors(kg, prev_ids)
        ned_confidences = ned.candidates(question, history=ctx.utterances[:-1],
                                         restrict=set(neighbor_counts))
        existing = {ref.id for ref in ctx.context_entities}
        for cand_id in neighbor_counts:
            if cand_id in existing:
                continue
            ref = kg.entities.get(cand_id)
            if ref is None or ref.kind != "entity":
                continue
            scored = score_candidate(ref, question, ctx, kg, cfg,
                                     neighbor_counts=neighbor_counts,
                                     ned_confidences=ned_confidences)
            if scored.cxt > cfg.h_cxt:
                ctx.context_entities.add(ref)
    ctx.context_questions = _history_prefix_texts(ctx, cfg)
    return ctx


def reset_context(ctx: ConversationContext) -> ConversationContext:
    """Drop everything; the next conversation starts from init_context again."""
    return ConversationContext(conversation_index=ctx.conversation_index + 1)


def input_dim_for(cfg: ContextConfig, d: int) -> int:
    return d if cfg.history_mode == "none" else 2 * d


def build_question_input(ctx: ConversationContext, question: str, embedder,
                         cfg: ContextConfig) -> np.ndarray:
    """Policy input vector: [history prefix; question] or just the question.

    The current question is expected to be the last recorded utterance.
    """
    base = embedder.encode(question)
    if cfg.history_mode == "none":
        return np.asarray(base, dtype=np.float64)
    texts = _history_prefix_texts(ctx, cfg)
    if not texts:
        prefix = np.asarray(base, dtype=np.float64)
    else:
        prefix = np.mean([embedder.encode(t) for t in texts], axis=0)
    return np.concatenate([prefix, np.asarray(base, dtype=np.float64)])
