"""Evaluation harness with per-intent crediting.

An intent is credited at whichever of its (at most 5) turns first produces
a correct top-1 answer; its best rank is the minimum rank any gold answer
reaches across those turns. Reciprocal rank credits only ranks up to 5 so
the metric chain P@1 <= MRR <= Hit@5 holds intent by intent. Reformulation
counting: turns beyond the first that ran before the first correct top-1,
or every extra turn the user actually spent if the intent was never
answered.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .answerer import RANKING_MODES, answer
from .context import ContextConfig, init_context, update_context
from .kg import KgIndex
from .policy import AdamState, PolicyParams
from .user_sim import Dataset, IntentScript, UserSession, is_correct

__all__ = [
    "IntentOutcome",
    "MetricsSlice",
    "MetricsReport",
    "evaluate",
    "context_entity_prf",
    "ref_pred_prf",
    "report_tsv",
]

HIT_CUTOFF = 5
REF_BUCKETS = 5  # Ref=0 .. Ref=4


@dataclass
class IntentOutcome:
    conversation_id: str
    domain: str
    intent_id: str
    turns_taken: int = 0
    answered_at_turn: int | None = None
    best_rank: int | None = None

    @property
    def p1(self) -> int:
        return 1 if self.answered_at_turn is not None else 0

    @property
    def hit5(self) -> int:
        return 1 if self.best_rank is not None and self.best_rank <= HIT_CUTOFF else 0

    @property
    def reciprocal_rank(self) -> float:
        if self.best_rank is None or self.best_rank > HIT_CUTOFF:
            return 0.0
        return 1.0 / self.best_rank

    @property
    def reformulations_used(self) -> int:
        if self.answered_at_turn is not None:
            return self.answered_at_turn - 1
        return self.turns_taken - 1


@dataclass
class MetricsSlice:
    p1: float = 0.0
    hit5: float = 0.0
    mrr: float = 0.0
    ref_triggers: int = 0
    ref_histogram: list[int] = field(default_factory=lambda: [0] * REF_BUCKETS)
    intents: int = 0


@dataclass
class MetricsReport:
    overall: MetricsSlice
    per_domain: dict[str, MetricsSlice]
    outcomes: list[IntentOutcome]


def _summarize(outcomes: list[IntentOutcome]) -> MetricsSlice:
    s = MetricsSlice(intents=len(outcomes))
    if not outcomes:
        return s
    s.p1 = sum(o.p1 for o in outcomes) / len(outcomes)
    s.hit5 = sum(o.hit5 for o in outcomes) / len(outcomes)
    s.mrr = sum(o.reciprocal_rank for o in outcomes) / len(outcomes)
    s.ref_triggers = sum(o.reformulations_used for o in outcomes)
    for o in outcomes:
        if o.answered_at_turn is not None:
            s.ref_histogram[o.reformulations_used] += 1
    return s


def _gold_rank(ranked, intent: IntentScript) -> int | None:
    for pos, cand in enumerate(ranked, start=1):
        if is_correct(cand.entity, intent):
            return pos
    return None


def evaluate(dataset: Dataset, kg: KgIndex, params: PolicyParams, embedder, ned,
             context_cfg: ContextConfig, user_kind: str = "ideal", top_k: int = 5,
             mode: str = "cumulative", action_cap: int = 1000, seed: int = 0,
             online: bool = False, predictor=None, train_cfg=None,
             adam: AdamState | None = None) -> MetricsReport:
    """Replay the dataset under a frozen policy and credit each intent.

    With ``online=True`` (needs ``predictor`` and ``train_cfg``) the policy
    keeps learning between turns exactly as in training; off by default so
    evaluation is read-only.
    """
    if mode not in RANKING_MODES:
        raise ValueError(f"ranking mode must be one of {RANKING_MODES}, got {mode!r}")
    trainer_bits = None
    if online:
        if predictor is None or train_cfg is None:
            raise ValueError("online evaluation needs a predictor and a train config")
        from . import trainer as trainer_mod
        import numpy as np
        if adam is None:
            adam = AdamState.for_params(params)
        trainer_bits = (trainer_mod, trainer_mod.ExperienceQueue(),
                        np.random.default_rng(train_cfg.seed))

    action_cache: dict = {}
    outcomes: list[IntentOutcome] = []
    for conv_index, conv in enumerate(dataset.conversations):
        session = UserSession(kind=user_kind, script=conv)
        utterance, new_intent, done = session.start()
        ctx = init_context(utterance, kg, ned, conversation_index=conv_index)
        outcome = IntentOutcome(conversation_id=conv.conversation_id,
                                domain=conv.domain,
                                intent_id=session.current_intent.intent_id)
        while not done:
            intent = session.current_intent
            if trainer_bits is not None:
                trainer_mod, queue, rng = trainer_bits
                result = trainer_mod.rollout_question(
                    utterance, ctx, kg, params, session, predictor, embedder,
                    train_cfg, context_cfg, rng, action_cache)
                queue.extend(result.experiences)
                while len(queue) >= train_cfg.batch_size:
                    trainer_mod.batch_update(queue, params, adam, train_cfg)
            # the cache holds label embeddings only, so it stays valid even
            # while online updates move the policy
            ranked = answer(utterance, ctx, kg, params, embedder,
                            context_cfg=context_cfg, top_k=top_k, mode=mode,
                            action_cap=action_cap, seed=seed,
                            action_cache=action_cache)
            rank = _gold_rank(ranked, intent)
            correct = bool(ranked) and is_correct(ranked[0].entity, intent)
            outcome.turns_taken += 1
            if rank is not None and (outcome.best_rank is None or rank < outcome.best_rank):
                outcome.best_rank = rank
            if correct and outcome.answered_at_turn is None:
                outcome.answered_at_turn = outcome.turns_taken
            utterance, new_intent, done = session.next(correct)
            if done or new_intent:
                outcomes.append(outcome)
                if not done:
                    outcome = IntentOutcome(conversation_id=conv.conversation_id,
                                            domain=conv.domain,
                                            intent_id=session.current_intent.intent_id)
            if not done:
                update_context(ctx, utterance, kg, ned, context_cfg,
                               new_intent=new_intent)
    per_domain: dict[str, list[IntentOutcome]] = {}
    for o in outcomes:
        per_domain.setdefault(o.domain, []).append(o)
    return MetricsReport(
        overall=_summarize(outcomes),
        per_domain={dom: _summarize(outs) for dom, outs in sorted(per_domain.items())},
        outcomes=outcomes,
    )


def context_entity_prf(predicted: set[str], gold: set[str]) -> tuple[float, float, float]:
    """Set precision/recall/F1; both empty counts as a perfect match."""
    if not predicted and not gold:
        return 1.0, 1.0, 1.0
    tp = len(predicted & gold)
    precision = tp / len(predicted) if predicted else 0.0
    recall = tp / len(gold) if gold else 0.0
    f1 = 0.0
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def ref_pred_prf(predictions: list[bool], labels: list[bool]) -> dict[str, tuple[float, float, float]]:
    """Per-class precision/recall/F1 for the two-way reformulation decision.

    True stands for "reformulation". Lengths must match.
    """
    if len(predictions) != len(labels):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(labels)} labels")
    out: dict[str, tuple[float, float, float]] = {}
    for class_name, positive in (("reformulation", True), ("new_intent", False)):
        tp = sum(1 for p, l in zip(predictions, labels) if p == positive and l == positive)
        fp = sum(1 for p, l in zip(predictions, labels) if p == positive and l != positive)
        fn = sum(1 for p, l in zip(predictions, labels) if p != positive and l == positive)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out[class_name] = (precision, recall, f1)
    return out


def report_tsv(report: MetricsReport) -> str:
    """Tabular summary: one row overall plus one per domain."""
    header = ["scope", "P@1", "Hit@5", "MRR", "RefTriggers"] + \
        [f"Ref={k}" for k in range(REF_BUCKETS)] + ["Intents"]
    lines = ["\t".join(header)]

    def row(scope: str, s: MetricsSlice) -> str:
        cells = [scope, f"{s.p1:.4f}", f"{s.hit5:.4f}", f"{s.mrr:.4f}",
                 str(s.ref_triggers)] + [str(c) for c in s.ref_histogram] + [str(s.intents)]
        return "\t".join(cells)

    lines.append(row("all", report.overall))
    for domain, s in report.per_domain.items():
        lines.append(row(domain, s))
    return "\n".join(lines) + "\n"
