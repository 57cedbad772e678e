"""Wiring: turn a validated config into live components.

The CLI and the HTTP service both assemble the same bundle: graph index,
dataset, embedding provider, entity linker, reformulation predictor, and
policy parameters (fresh or from a checkpoint).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .config import EngineConfig
from .context import FileNed, LexicalNed, input_dim_for, load_ned_file
from .embeddings import HashEmbeddingProvider, load_embedding_file
from .kg import KgIndex, load_kg
from .policy import AdamState, PolicyParams, init_params, load_checkpoint
from .ref_predictor import (LexicalRefPredictor, OracleRefPredictor,
                            ScoreFileRefPredictor, load_score_file)
from .user_sim import Dataset, load_dataset

__all__ = ["Providers", "EngineBundle", "build_bundle"]


@dataclass
class Providers:
    embedder: object
    ned: object
    predictor: object


@dataclass
class EngineBundle:
    cfg: EngineConfig
    kg: KgIndex
    dataset: Dataset
    providers: Providers
    params: PolicyParams
    adam: AdamState

    def miss_counts(self) -> dict[str, int]:
        counts = {}
        for name, provider in (("embeddings", self.providers.embedder),
                               ("ned", self.providers.ned)):
            miss = getattr(provider, "miss_count", None)
            if miss is not None:
                counts[name] = miss
        return counts


def build_predictor(cfg: EngineConfig, dataset: Dataset, embedder) -> object:
    if cfg.predictor == "oracle":
        return OracleRefPredictor(dataset)
    if cfg.predictor == "lexical":
        return LexicalRefPredictor(embedder, tau=cfg.lexical_tau)
    if cfg.score_path is None:
        raise ValueError("config: predictor 'scorefile' needs scorePath")
    return load_score_file(cfg.score_path)


def build_bundle(cfg: EngineConfig, *, seed: int | None = None,
                 user_model: str | None = None, predictor: str | None = None,
                 load_checkpoint_from: str | Path | None = None) -> EngineBundle:
    """Load everything the engine needs; CLI flags override config fields.

    ``load_checkpoint_from`` names a checkpoint that must exist; without it
    the policy starts from a fresh seeded init.
    """
    if seed is not None:
        cfg.train.seed = seed
    if user_model is not None:
        cfg.user_model = user_model
    if predictor is not None:
        cfg.predictor = predictor

    kg = load_kg(cfg.kg_path)
    dataset = load_dataset(cfg.dataset_path)
    if cfg.embeddings_path is not None:
        embedder = load_embedding_file(cfg.embeddings_path, expected_dim=cfg.embedding_dim,
                                       fallback_seed=cfg.hash_seed)
    else:
        embedder = HashEmbeddingProvider(cfg.embedding_dim, seed=cfg.hash_seed)
    ned: FileNed | LexicalNed
    if cfg.ned_path is not None:
        ned = load_ned_file(cfg.ned_path)
    else:
        ned = LexicalNed(kg)
    pred = build_predictor(cfg, dataset, embedder)

    input_dim = input_dim_for(cfg.context, cfg.embedding_dim)
    hidden = cfg.hidden_dim if cfg.hidden_dim is not None else cfg.embedding_dim
    adam = None
    if load_checkpoint_from is not None:
        if not Path(load_checkpoint_from).exists():
            raise ValueError(f"checkpoint not found: {load_checkpoint_from}")
        params, adam = load_checkpoint(load_checkpoint_from)
        if params.d != cfg.embedding_dim or params.input_dim != input_dim:
            raise ValueError(
                f"checkpoint dimensions (d={params.d}, inputDim={params.input_dim}) do not "
                f"match config (d={cfg.embedding_dim}, inputDim={input_dim})")
        if params.hidden != hidden:
            raise ValueError(
                f"checkpoint hidden width {params.hidden} does not match config {hidden}")
    else:
        params = init_params(input_dim, seed=cfg.train.seed, d=cfg.embedding_dim,
                             hidden=hidden)
    if adam is None:
        adam = AdamState.for_params(params)
    return EngineBundle(cfg=cfg, kg=kg, dataset=dataset,
                        providers=Providers(embedder=embedder, ned=ned, predictor=pred),
                        params=params, adam=adam)
