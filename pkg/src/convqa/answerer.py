"""Greedy answering: walk agents from every context entity, aggregate votes.

One agent per context entity takes the policy's top-k actions; landing
nodes become answer candidates. Candidates reached by several agents (or by
several actions of one agent) pool their probability mass. Four ranking
variants order the pooled candidates; all ties fall back to the entity id
so rankings are total and reproducible.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .context import ContextConfig, ConversationContext, build_question_input
from .kg import ActionEdge, EntityRef, KgIndex
from .policy import ActionSet, PolicyParams, StateInput, build_action_set, forward, top_k_actions

__all__ = [
    "RANKING_MODES",
    "RankedAnswer",
    "AgentDetail",
    "answer",
    "rank_variants",
    "path_seed",
]

RANKING_MODES = ("cumulative", "voteThenScore", "scoreThenVote", "maxScore")


@dataclass
class RankedAnswer:
    """score is the pooled probability mass regardless of ranking mode."""

    entity: EntityRef
    score: float
    contributors: list[tuple[EntityRef, ActionEdge, float]] = field(default_factory=list)

    @property
    def vote_count(self) -> int:
        return len(self.contributors)

    @property
    def max_prob(self) -> float:
        return max(p for _, _, p in self.contributors)


@dataclass
class AgentDetail:
    """Per-start-entity internals, for callers that replay served actions."""

    state: StateInput
    actions: ActionSet
    picks: list[tuple[int, float]]


def path_seed(base_seed: int, entity_id: str) -> int:
    """Stable per-entity sampling seed, independent of visit order."""
    digest = hashlib.sha256(f"{base_seed}:{entity_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rank_variants(candidates: list[RankedAnswer], mode: str) -> list[RankedAnswer]:
    """Order pooled candidates; ties always resolve by entity id."""
    if mode == "cumulative":
        key = lambda c: (-c.score, c.entity.id)
    elif mode == "voteThenScore":
        key = lambda c: (-c.vote_count, -c.score, c.entity.id)
    elif mode == "scoreThenVote":
        key = lambda c: (-c.max_prob, -c.vote_count, c.entity.id)
    elif mode == "maxScore":
        key = lambda c: (-c.max_prob, c.entity.id)
    else:
        raise ValueError(f"ranking mode must be one of {RANKING_MODES}, got {mode!r}")
    return sorted(candidates, key=key)


def answer(question: str, ctx: ConversationContext, kg: KgIndex, params: PolicyParams,
           embedder, *, context_cfg: ContextConfig | None = None, top_k: int = 5,
           mode: str = "cumulative", action_cap: int = 1000, seed: int = 0,
           action_cache: dict[str, ActionSet] | None = None,
           details: dict[str, AgentDetail] | None = None) -> list[RankedAnswer]:
    """Rank answer candidates for one question under the frozen policy.

    Start entities are the context entities (entity kind only, iterated in
    id order); entities without outgoing paths contribute nothing. Pass a
    ``details`` dict to capture each agent's state and served picks.
    """
    if top_k <= 0:
        raise ValueError(f"topK must be positive, got {top_k}")
    if mode not in RANKING_MODES:
        raise ValueError(f"ranking mode must be one of {RANKING_MODES}, got {mode!r}")
    cfg = context_cfg if context_cfg is not None else ContextConfig()
    starts = [ref for ref in sorted(ctx.context_entities, key=lambda r: r.id)
              if ref.kind == "entity"]
    if not starts:
        return []
    x = build_question_input(ctx, question, embedder, cfg)
    pooled: dict[str, RankedAnswer] = {}
    for start in starts:
        action_set = None if action_cache is None else action_cache.get(start.id)
        if action_set is None:
            edges = kg.outgoing_paths(start.id, cap=action_cap,
                                      seed=path_seed(seed, start.id))
            if not edges:
                continue
            action_set = build_action_set(edges, embedder)
            if action_cache is not None:
                action_cache[start.id] = action_set
        state = StateInput(x=x, start_entity=start)
        probs = forward(params, state, action_set)
        picks = top_k_actions(probs, top_k)
        if details is not None:
            details[start.id] = AgentDetail(state=state, actions=action_set, picks=picks)
        for idx, prob in picks:
            edge = action_set.edges[idx]
            slot = pooled.get(edge.end.id)
            if slot is None:
                slot = RankedAnswer(entity=edge.end, score=0.0)
                pooled[edge.end.id] = slot
            slot.score += prob
            slot.contributors.append((start, edge, prob))
    return rank_variants(list(pooled.values()), mode)
