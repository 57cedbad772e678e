"""Reformulation detection over consecutive question pairs.

A prediction says whether the follow-up rephrases the previous question
(likelihood >= 0.5) or opens a new information need. Rewards derive
directly from it: reformulation -> -1, new intent -> +1. Ties at exactly
0.5 count as reformulations so an uncertain follow-up never mints a
spurious positive reward.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .user_sim import Dataset

__all__ = [
    "RefPrediction",
    "reward_from_prediction",
    "OracleRefPredictor",
    "LexicalRefPredictor",
    "ScoreFileRefPredictor",
    "FlipNoisePredictor",
    "pair_digest",
    "load_score_file",
    "generate_training_pairs",
    "write_pairs_tsv",
    "calibrate_threshold",
]

PREDICTOR_KINDS = ("oracle", "lexical", "scorefile")


@dataclass(frozen=True)
class RefPrediction:
    is_reformulation: bool
    likelihood: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.likelihood <= 1.0:
            raise ValueError(f"likelihood outside [0,1]: {self.likelihood}")
        if self.is_reformulation != (self.likelihood >= 0.5):
            raise ValueError("is_reformulation must agree with likelihood >= 0.5")


def _prediction(likelihood: float) -> RefPrediction:
    likelihood = min(1.0, max(0.0, float(likelihood)))
    return RefPrediction(is_reformulation=likelihood >= 0.5, likelihood=likelihood)


def reward_from_prediction(prediction: RefPrediction) -> int:
    """Implicit feedback: a rephrasing means the last answer failed."""
    return -1 if prediction.is_reformulation else 1


def pair_digest(prev_question: str, follow_question: str) -> str:
    """sha256 over prev + NUL + follow; the score-file lookup key."""
    payload = prev_question.encode("utf-8") + b"\x00" + follow_question.encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


class OracleRefPredictor:
    """Script-derived labels: same intent -> reformulation.

    Built as a text -> {(conversation, intent)} map so predict stays a pure
    function of the pair. Texts unknown to the dataset count as new intents.
    """

    name = "oracle"

    def __init__(self, dataset: Dataset) -> None:
        self._keys: dict[str, set[tuple[str, str]]] = {}
        for conv in dataset.conversations:
            for intent in conv.intents:
                for utterance in intent.utterances:
                    self._keys.setdefault(utterance, set()).add(
                        (conv.conversation_id, intent.intent_id))

    def predict(self, prev_question: str, follow_question: str) -> RefPrediction:
        a = self._keys.get(prev_question, set())
        b = self._keys.get(follow_question, set())
        return _prediction(1.0 if a & b else 0.0)


class LexicalRefPredictor:
    """Embedding-cosine similarity mapped through a calibrated threshold.

    The cosine-to-likelihood map is piecewise linear with the threshold tau
    landing exactly on 0.5, so the decision rule is cosine >= tau.
    """

    name = "lexical"

    def __init__(self, embedder, tau: float = 0.8) -> None:
        if not -1.0 < tau < 1.0:
            raise ValueError(f"tau must be inside (-1,1), got {tau}")
        self.embedder = embedder
        self.tau = tau

    def predict(self, prev_question: str, follow_question: str) -> RefPrediction:
        a = self.embedder.encode(prev_question)
        b = self.embedder.encode(follow_question)
        denom = float(np.linalg.norm(a) * np.linalg.norm(b))
        cosine = float(a @ b) / denom if denom > 0 else 0.0
        cosine = min(1.0, max(-1.0, cosine))
        if cosine >= self.tau:
            likelihood = 0.5 + 0.5 * (cosine - self.tau) / (1.0 - self.tau)
        else:
            likelihood = 0.5 * (cosine + 1.0) / (self.tau + 1.0)
        return _prediction(likelihood)


class ScoreFileRefPredictor:
    """Precomputed likelihoods keyed by pair digest; a missing pair is an error."""

    name = "scorefile"

    def __init__(self, scores: dict[str, float], source: str = "<memory>") -> None:
        self.scores = scores
        self.source = source

    def predict(self, prev_question: str, follow_question: str) -> RefPrediction:
        digest = pair_digest(prev_question, follow_question)
        if digest not in self.scores:
            raise KeyError(
                f"{self.source}: no likelihood for pair digest {digest} "
                f"(prev={prev_question!r}, follow={follow_question!r})")
        return _prediction(self.scores[digest])


class FlipNoisePredictor:
    """Wraps a predictor and flips each label with a fixed probability.

    The flip decision is a pure function of (seed, pair), so runs stay
    reproducible and repeated queries agree.
    """

    def __init__(self, inner, flip_prob: float, seed: int = 0) -> None:
        if not 0.0 <= flip_prob <= 1.0:
            raise ValueError(f"flip probability outside [0,1]: {flip_prob}")
        self.inner = inner
        self.flip_prob = flip_prob
        self.seed = seed
        self.name = f"flip({getattr(inner, 'name', 'inner')},p={flip_prob})"

    def predict(self, prev_question: str, follow_question: str) -> RefPrediction:
        base = self.inner.predict(prev_question, follow_question)
        material = f"{self.seed}:".encode("utf-8") + \
            prev_question.encode("utf-8") + b"\x00" + follow_question.encode("utf-8")
        digest = hashlib.sha256(material).digest()
        u = int.from_bytes(digest[:8], "little") / 2.0 ** 64
        if u < self.flip_prob:
            return _prediction(1.0 - base.likelihood)
        return base


def load_score_file(path: str | Path) -> ScoreFileRefPredictor:
    path = Path(path)
    scores: dict[str, float] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected '<digest>\\t<likelihood>'")
            try:
                value = float(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad likelihood {parts[1]!r}") from None
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{path}:{lineno}: likelihood outside [0,1]: {value}")
            scores[parts[0]] = value
    return ScoreFileRefPredictor(scores, source=str(path))


def generate_training_pairs(dataset: Dataset, seed: int = 0) -> list[tuple[str, str, int]]:
    """Labeled pairs for training a detector.

    Positives (label 1) are all within-intent pairs; negatives (label 0)
    are cross-intent pairs from the same conversation, downsampled per
    conversation to the conversation's positive count.
    """
    rng = np.random.default_rng(seed)
    out: list[tuple[str, str, int]] = []
    for conv in dataset.conversations:
        positives: list[tuple[str, str, int]] = []
        for intent in conv.intents:
            us = intent.utterances
            for i in range(len(us)):
                for j in range(i + 1, len(us)):
                    positives.append((us[i], us[j], 1))
        negatives: list[tuple[str, str, int]] = []
        for ia in range(len(conv.intents)):
            for ib in range(ia + 1, len(conv.intents)):
                for qa in conv.intents[ia].utterances:
                    for qb in conv.intents[ib].utterances:
                        negatives.append((qa, qb, 0))
        if len(negatives) > len(positives):
            picked = rng.choice(len(negatives), size=len(positives), replace=False)
            negatives = [negatives[i] for i in sorted(picked.tolist())]
        out.extend(positives)
        out.extend(negatives)
    return out


def write_pairs_tsv(pairs: list[tuple[str, str, int]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for a, b, label in pairs:
            fh.write(f"{a}\t{b}\t{label}\n")


def calibrate_threshold(pairs: list[tuple[str, str, int]], embedder,
                        grid: np.ndarray | None = None) -> float:
    """Sweep tau over labeled pairs and return the best-F1 threshold.

    Deterministic: ties resolve to the lowest tau on the grid.
    """
    if grid is None:
        grid = np.linspace(-0.95, 0.95, 39)
    best_tau, best_f1 = float(grid[0]), -1.0
    for tau in grid:
        predictor = LexicalRefPredictor(embedder, tau=float(tau))
        tp = fp = fn = 0
        for a, b, label in pairs:
            pred = predictor.predict(a, b).is_reformulation
            if pred and label == 1:
                tp += 1
            elif pred and label == 0:
                fp += 1
            elif not pred and label == 1:
                fn += 1
        denom = 2 * tp + fp + fn
        f1 = 2 * tp / denom if denom else 0.0
        if f1 > best_f1 + 1e-12:
            best_tau, best_f1 = float(tau), f1
    return best_tau
