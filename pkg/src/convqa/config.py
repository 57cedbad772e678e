"""Engine configuration: one JSON document, strictly validated.

Unknown keys are rejected anywhere in the document, numeric ranges are
checked, and every referenced file must exist when the config is loaded.
Relative paths resolve against the config file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .answerer import RANKING_MODES
from .context import ContextConfig
from .ref_predictor import PREDICTOR_KINDS
from .trainer import TrainConfig
from .user_sim import USER_KINDS

__all__ = ["EngineConfig", "load_engine_config", "parse_engine_config"]

_CONTEXT_KEYS = {"h1", "h2", "h3", "h4", "hCxt", "fMax", "historyMode"}
_TRAIN_KEYS = {"alpha", "rollouts", "batchSize", "beta", "epochs", "actionCap",
               "topK", "seed"}
_TOP_KEYS = {"kgPath", "datasetPath", "embeddingsPath", "nedPath", "scorePath",
             "checkpointPath", "embeddingDim", "hiddenDim", "hashSeed",
             "lexicalTau", "context", "train", "userModel", "predictor",
             "rankingMode", "interactiveBatchSize"}


@dataclass
class EngineConfig:
    kg_path: Path
    dataset_path: Path
    embeddings_path: Path | None = None
    ned_path: Path | None = None
    score_path: Path | None = None
    checkpoint_path: Path | None = None
    embedding_dim: int = 768
    hidden_dim: int | None = None
    hash_seed: int = 0
    lexical_tau: float = 0.8
    context: ContextConfig = field(default_factory=ContextConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    user_model: str = "ideal"
    predictor: str = "oracle"
    ranking_mode: str = "cumulative"
    interactive_batch_size: int = 10

    def __post_init__(self) -> None:
        if self.embedding_dim <= 0:
            raise ValueError(f"embeddingDim must be positive, got {self.embedding_dim}")
        if self.hidden_dim is not None and self.hidden_dim <= 0:
            raise ValueError(f"hiddenDim must be positive, got {self.hidden_dim}")
        if self.user_model not in USER_KINDS:
            raise ValueError(f"userModel must be one of {USER_KINDS}, got {self.user_model!r}")
        if self.predictor not in PREDICTOR_KINDS:
            raise ValueError(
                f"predictor must be one of {PREDICTOR_KINDS}, got {self.predictor!r}")
        if self.ranking_mode not in RANKING_MODES:
            raise ValueError(
                f"rankingMode must be one of {RANKING_MODES}, got {self.ranking_mode!r}")
        if self.interactive_batch_size <= 0:
            raise ValueError(
                f"interactiveBatchSize must be positive, got {self.interactive_batch_size}")


def _reject_unknown(doc: dict, allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")


def _path_field(doc: dict, key: str, base: Path, required: bool = False,
                must_exist: bool = True) -> Path | None:
    raw = doc.get(key)
    if raw is None:
        if required:
            raise ValueError(f"config: missing required key {key!r}")
        return None
    path = Path(raw)
    if not path.is_absolute():
        path = base / path
    if must_exist and not path.exists():
        raise ValueError(f"config: {key} points to a missing file: {path}")
    return path


def parse_engine_config(doc: dict, base: Path) -> EngineConfig:
    if not isinstance(doc, dict):
        raise ValueError("config: top level must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "config")

    context_doc = doc.get("context", {})
    _reject_unknown(context_doc, _CONTEXT_KEYS, "config.context")
    context = ContextConfig(
        h1=context_doc.get("h1", 0.1),
        h2=context_doc.get("h2", 0.1),
        h3=context_doc.get("h3", 0.7),
        h4=context_doc.get("h4", 0.1),
        h_cxt=context_doc.get("hCxt", 0.25),
        f_max=context_doc.get("fMax", 100),
        history_mode=context_doc.get("historyMode", "none"),
    )
    train_doc = doc.get("train", {})
    _reject_unknown(train_doc, _TRAIN_KEYS, "config.train")
    train = TrainConfig(
        alpha=train_doc.get("alpha", 0.001),
        rollouts=train_doc.get("rollouts", 20),
        batch_size=train_doc.get("batchSize", 1000),
        beta=train_doc.get("beta", 0.1),
        epochs=train_doc.get("epochs", 10),
        action_cap=train_doc.get("actionCap", 1000),
        top_k=train_doc.get("topK", 5),
        seed=train_doc.get("seed", 0),
    )
    return EngineConfig(
        kg_path=_path_field(doc, "kgPath", base, required=True),
        dataset_path=_path_field(doc, "datasetPath", base, required=True),
        embeddings_path=_path_field(doc, "embeddingsPath", base),
        ned_path=_path_field(doc, "nedPath", base),
        score_path=_path_field(doc, "scorePath", base),
        checkpoint_path=_path_field(doc, "checkpointPath", base, must_exist=False),
        embedding_dim=doc.get("embeddingDim", 768),
        hidden_dim=doc.get("hiddenDim"),
        hash_seed=doc.get("hashSeed", 0),
        lexical_tau=doc.get("lexicalTau", 0.8),
        context=context,
        train=train,
        user_model=doc.get("userModel", "ideal"),
        predictor=doc.get("predictor", "oracle"),
        ranking_mode=doc.get("rankingMode", "cumulative"),
        interactive_batch_size=doc.get("interactiveBatchSize", 10),
    )


def load_engine_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    return parse_engine_config(doc, base=path.parent.resolve())
