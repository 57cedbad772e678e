"""Policy-gradient training from simulated reformulation feedback.

For every question the trainer samples walk rollouts from each context
entity, asks the scripted user what it would say after seeing each sampled
endpoint, and turns the reformulation predictor's verdict on that follow-up
into a +/-1 reward. Experiences queue up FIFO; once a batch is full the
rewards are normalized (mean/std over the batch), gradients of
R* * log pi + beta * entropy are recomputed under the current parameters,
accumulated, and applied as one Adam ascent step. The conversation itself
advances on the greedy top-1 answer, mirroring what a live user would see.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .answerer import answer, path_seed
from .context import (ContextConfig, ConversationContext, build_question_input,
                      init_context, update_context)
from .kg import KgIndex
from .policy import (ActionSet, AdamState, PolicyParams, StateInput, adam_ascent_step,
                     build_action_set, entropy, forward, sample_action, softmax)
from .ref_predictor import reward_from_prediction
from .user_sim import Dataset, UserSession, is_correct

__all__ = [
    "TrainConfig",
    "Experience",
    "ExperienceQueue",
    "RolloutResult",
    "TrainResult",
    "rollout_question",
    "batch_update",
    "train_epochs",
]


@dataclass
class TrainConfig:
    alpha: float = 0.001
    rollouts: int = 20
    batch_size: int = 1000
    beta: float = 0.1
    epochs: int = 10
    action_cap: int = 1000
    top_k: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.rollouts <= 0 or self.batch_size <= 0 or self.epochs <= 0:
            raise ValueError("rollouts, batchSize and epochs must be positive")
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")
        if self.action_cap <= 0 or self.top_k <= 0:
            raise ValueError("actionCap and topK must be positive")


@dataclass(frozen=True)
class Experience:
    """One sampled action with its observed reward."""

    state: StateInput
    actions: ActionSet
    chosen_index: int
    reward: int
    next_utterance: str | None

    def __post_init__(self) -> None:
        if self.reward not in (-1, 1):
            raise ValueError(f"reward must be -1 or +1, got {self.reward}")
        if not 0 <= self.chosen_index < len(self.actions):
            raise IndexError(f"chosen index {self.chosen_index} outside action set")


class ExperienceQueue:
    """FIFO buffer with conservation counters (enqueued = dequeued + pending)."""

    def __init__(self) -> None:
        self._items: deque[Experience] = deque()
        self.enqueued = 0
        self.dequeued = 0

    def __len__(self) -> int:
        return len(self._items)

    def enqueue(self, exp: Experience) -> None:
        self._items.append(exp)
        self.enqueued += 1

    def extend(self, exps: list[Experience]) -> None:
        for exp in exps:
            self.enqueue(exp)

    def dequeue(self, n: int) -> list[Experience]:
        if n > len(self._items):
            raise ValueError(f"cannot dequeue {n} from a queue of {len(self._items)}")
        out = [self._items.popleft() for _ in range(n)]
        self.dequeued += len(out)
        return out


@dataclass
class RolloutResult:
    experiences: list[Experience]
    skipped_starts: int = 0


@dataclass
class TrainResult:
    params: PolicyParams
    adam: AdamState
    epoch_stats: list[dict]
    log_lines: list[str]
    skipped_starts: int = 0
    queue: ExperienceQueue | None = None


def _action_set_for(kg: KgIndex, entity_id: str, cfg: TrainConfig, embedder,
                    cache: dict[str, ActionSet] | None) -> ActionSet | None:
    if cache is not None and entity_id in cache:
        return cache[entity_id]
    edges = kg.outgoing_paths(entity_id, cap=cfg.action_cap,
                              seed=path_seed(cfg.seed, entity_id))
    if not edges:
        return None
    action_set = build_action_set(edges, embedder)
    if cache is not None:
        cache[entity_id] = action_set
    return action_set


def rollout_question(question: str, ctx: ConversationContext, kg: KgIndex,
                     params: PolicyParams, session: UserSession, predictor,
                     embedder, cfg: TrainConfig, context_cfg: ContextConfig,
                     rng: np.random.Generator,
                     action_cache: dict[str, ActionSet] | None = None) -> RolloutResult:
    """Sample ``rollouts`` actions per context entity and attach rewards.

    Each sampled endpoint is judged by peeking at what the user would say
    next; the cursor never moves here. A conversation that would simply end
    counts as a new intent (+1), since moving on is the satisfied signal.
    """
    experiences: list[Experience] = []
    skipped = 0
    x = build_question_input(ctx, question, embedder, context_cfg)
    starts = [ref for ref in sorted(ctx.context_entities, key=lambda r: r.id)
              if ref.kind == "entity"]
    intent = session.current_intent
    for start in starts:
        action_set = _action_set_for(kg, start.id, cfg, embedder, action_cache)
        if action_set is None:
            skipped += 1
            continue
        state = StateInput(x=x, start_entity=start)
        probs = forward(params, state, action_set)
        for _ in range(cfg.rollouts):
            idx = sample_action(probs, rng)
            endpoint = action_set.edges[idx].end
            correct = is_correct(endpoint, intent)
            follow, _, _ = session.peek(correct)
            if follow is None:
                reward = 1
            else:
                reward = reward_from_prediction(predictor.predict(question, follow))
            experiences.append(Experience(state=state, actions=action_set,
                                          chosen_index=idx, reward=reward,
                                          next_utterance=follow))
    return RolloutResult(experiences=experiences, skipped_starts=skipped)


def accumulate_batch_gradients(batch: list[Experience], params: PolicyParams,
                               beta: float) -> tuple[np.ndarray, np.ndarray, dict]:
    """Summed gradient of R* * log pi + beta * entropy over the batch.

    Rewards are normalized over exactly this batch (population std; a
    degenerate std below 1e-8 falls back to 1). Heavy lifting is batched
    into matrix products; per-experience work stays on the small action
    sets.
    """
    n = len(batch)
    rewards = np.array([e.reward for e in batch], dtype=np.float64)
    r_mean = float(rewards.mean())
    r_std = float(rewards.std())
    if r_std < 1e-8:
        r_std = 1.0
    r_star = (rewards - r_mean) / r_std

    x_mat = np.stack([e.state.x for e in batch])             # (n, inputDim)
    hidden_pre = x_mat @ params.w1.T                          # (n, hidden)
    hidden = np.maximum(hidden_pre, 0.0)
    z_mat = hidden @ params.w2.T                              # (n, d)

    upstream = np.empty((n, params.d))
    entropies = np.empty(n)
    for i, exp in enumerate(batch):
        logits = exp.actions.matrix @ z_mat[i]
        probs = softmax(logits)
        ent = entropy(probs)
        entropies[i] = ent
        logit_grad = -probs.copy()
        logit_grad[exp.chosen_index] += 1.0
        logit_grad *= r_star[i]
        if beta != 0.0:
            log_p = np.where(probs > 0, np.log(np.where(probs > 0, probs, 1.0)), 0.0)
            logit_grad += beta * (-probs * (log_p + ent))
        upstream[i] = exp.actions.matrix.T @ logit_grad
    g_w2 = upstream.T @ hidden                                # (d, hidden)
    g_hidden = upstream @ params.w2                           # (n, hidden)
    g_hidden = np.where(hidden_pre > 0, g_hidden, 0.0)
    g_w1 = g_hidden.T @ x_mat                                 # (hidden, inputDim)
    stats = {
        "mean_reward": r_mean,
        "entropy_mean": float(entropies.mean()),
        "r_star_mean": float(r_star.mean()),
        "r_star_std": float(r_star.std()),
    }
    return g_w1, g_w2, stats


def batch_update(queue: ExperienceQueue, params: PolicyParams, adam: AdamState,
                 cfg: TrainConfig, batch_size: int | None = None) -> dict:
    """Dequeue one batch, take one Adam ascent step, report batch stats."""
    n = cfg.batch_size if batch_size is None else batch_size
    if n <= 0:
        raise ValueError(f"batch size must be positive, got {n}")
    if len(queue) < n:
        raise ValueError(f"queue holds {len(queue)} experiences, need {n}")
    batch = queue.dequeue(n)
    g_w1, g_w2, stats = accumulate_batch_gradients(batch, params, cfg.beta)
    adam_ascent_step(params, adam, (g_w1, g_w2), cfg.alpha)
    stats["batch_size"] = n
    stats["queue_len"] = len(queue)
    return stats


def train_epochs(dataset: Dataset, kg: KgIndex, params: PolicyParams, embedder,
                 ned, predictor, cfg: TrainConfig, context_cfg: ContextConfig,
                 user_kind: str = "ideal", adam: AdamState | None = None,
                 ranking_mode: str = "cumulative") -> TrainResult:
    """Run the full training loop over the dataset.

    Per epoch: simulate every conversation, enqueue rollout experiences,
    update whenever a full batch is queued, and flush the remainder at the
    end of the epoch so no experience crosses an epoch boundary.
    """
    if adam is None:
        adam = AdamState.for_params(params)
    queue = ExperienceQueue()
    rng = np.random.default_rng(cfg.seed)
    action_cache: dict[str, ActionSet] = {}
    log_lines: list[str] = []
    epoch_stats: list[dict] = []
    skipped_total = 0
    conversation_counter = 0

    def log_update(epoch: int, batch_idx: int, stats: dict) -> None:
        log_lines.append(
            f"{epoch}\t{batch_idx}\t{stats['mean_reward']:.6f}"
            f"\t{stats['entropy_mean']:.6f}\t{stats['queue_len']}")

    for epoch in range(cfg.epochs):
        batch_idx = 0
        epoch_rewards: list[float] = []
        epoch_correct = 0
        epoch_turns = 0
        for conv in dataset.conversations:
            session = UserSession(kind=user_kind, script=conv)
            utterance, new_intent, done = session.start()
            ctx = init_context(utterance, kg, ned,
                               conversation_index=conversation_counter)
            conversation_counter += 1
            while not done:
                result = rollout_question(utterance, ctx, kg, params, session,
                                          predictor, embedder, cfg, context_cfg,
                                          rng, action_cache)
                skipped_total += result.skipped_starts
                queue.extend(result.experiences)
                epoch_rewards.extend(e.reward for e in result.experiences)
                while len(queue) >= cfg.batch_size:
                    stats = batch_update(queue, params, adam, cfg)
                    log_update(epoch, batch_idx, stats)
                    batch_idx += 1
                ranked = answer(utterance, ctx, kg, params, embedder,
                                context_cfg=context_cfg, top_k=cfg.top_k,
                                mode=ranking_mode, action_cap=cfg.action_cap,
                                seed=cfg.seed, action_cache=action_cache)
                top1 = ranked[0].entity if ranked else None
                correct = is_correct(top1, session.current_intent)
                epoch_turns += 1
                epoch_correct += int(correct)
                utterance, new_intent, done = session.next(correct)
                if not done:
                    update_context(ctx, utterance, kg, ned, context_cfg,
                                   new_intent=new_intent)
        if len(queue) > 0:
            stats = batch_update(queue, params, adam, cfg, batch_size=len(queue))
            log_update(epoch, batch_idx, stats)
        epoch_stats.append({
            "epoch": epoch,
            "mean_reward": float(np.mean(epoch_rewards)) if epoch_rewards else 0.0,
            "experiences": len(epoch_rewards),
            "greedy_accuracy": epoch_correct / epoch_turns if epoch_turns else 0.0,
        })
    return TrainResult(params=params, adam=adam, epoch_stats=epoch_stats,
                       log_lines=log_lines, skipped_starts=skipped_total, queue=queue)
