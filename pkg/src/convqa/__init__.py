"""Conversational question answering over knowledge graphs with policy learning."""

from .answerer import RankedAnswer, answer
from .config import EngineConfig, load_engine_config
from .context import ContextConfig, ConversationContext, init_context, update_context
from .engine import EngineBundle, build_bundle
from .evaluation import MetricsReport, evaluate, report_tsv
from .kg import ActionEdge, EntityRef, KgIndex, NaryFact, load_kg
from .policy import PolicyParams, init_params, load_checkpoint, save_checkpoint
from .trainer import TrainConfig, TrainResult, train_epochs
from .user_sim import Dataset, UserSession, load_dataset

__version__ = "0.1.0"

__all__ = [
    "ActionEdge",
    "ContextConfig",
    "ConversationContext",
    "Dataset",
    "EngineBundle",
    "EngineConfig",
    "EntityRef",
    "KgIndex",
    "MetricsReport",
    "NaryFact",
    "PolicyParams",
    "RankedAnswer",
    "TrainConfig",
    "TrainResult",
    "UserSession",
    "answer",
    "build_bundle",
    "evaluate",
    "init_context",
    "init_params",
    "load_checkpoint",
    "load_dataset",
    "load_engine_config",
    "load_kg",
    "report_tsv",
    "save_checkpoint",
    "train_epochs",
    "update_context",
    "__version__",
]
