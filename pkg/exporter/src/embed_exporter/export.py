"""Encodes texts with a pretrained transformer into keyed embedding files.

The vector for a text is the mean over every hidden layer (the embedding
layer's output included) of the mean over every real token (special tokens
included, padding excluded). Files are keyed by the sha256 of the exact
UTF-8 text and store values at float32 precision, one ``dim=<d>`` header
line first.
"""

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

__all__ = ["ExportJob", "encode_texts", "export", "load_encoder", "write_embedding_file"]


@dataclass(frozen=True)
class ExportJob:
    texts_path: Path
    out_path: Path
    model_name: str = "bert-base-uncased"
    d: int | None = None  # when set, must equal the encoder's hidden size


def load_encoder(model_name: str):
    """Tokenizer and encoder for a pinned model name; load failures are fatal."""
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_name)
        model = AutoModel.from_pretrained(model_name)
    except Exception as exc:
        raise RuntimeError(f"failed to load encoder {model_name!r}: {exc}") from exc
    return tokenizer, model


def encode_texts(texts: list[str], tokenizer, model, batch_size: int = 32) -> np.ndarray:
    """(len(texts), hidden) float32 matrix of layer-then-token averages."""
    model.eval()
    max_length = int(model.config.max_position_embeddings)
    rows = []
    with torch.no_grad():
        for start in range(0, len(texts), batch_size):
            batch = texts[start:start + batch_size]
            enc = tokenizer(batch, return_tensors="pt", padding=True,
                            truncation=True, max_length=max_length)
            out = model(**enc, output_hidden_states=True)
            stacked = torch.stack(out.hidden_states)  # (layers+1, B, T, H)
            per_token = stacked.mean(dim=0)
            mask = enc["attention_mask"].unsqueeze(-1).to(per_token.dtype)
            summed = (per_token * mask).sum(dim=1)
            counts = mask.sum(dim=1)
            rows.append((summed / counts).cpu().numpy())
    if not rows:
        return np.zeros((0, int(model.config.hidden_size)), dtype=np.float32)
    return np.concatenate(rows, axis=0).astype(np.float32)


def write_embedding_file(path: str | Path, texts: list[str], vectors: np.ndarray) -> Path:
    """Writes ``dim=<d>`` then one ``<sha256>\\t<values>`` line per text."""
    if len(texts) != vectors.shape[0]:
        raise ValueError(f"{len(texts)} texts but {vectors.shape[0]} vectors")
    path = Path(path)
    d = int(vectors.shape[1])
    lines = [f"dim={d}"]
    seen: set[str] = set()
    for text, vec in zip(texts, vectors):
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        if digest in seen:
            raise ValueError(f"duplicate text: {text!r}")
        seen.add(digest)
        values = " ".join(str(v) for v in vec.astype(np.float32))
        lines.append(f"{digest}\t{values}")
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def export(job: ExportJob, encoder=None) -> Path:
    """Reads the texts file, encodes unique lines, writes the embedding file."""
    raw = Path(job.texts_path).read_text(encoding="utf-8")
    seen: dict[str, None] = {}
    for line in raw.splitlines():
        if line:
            seen.setdefault(line, None)
    texts = list(seen)
    tokenizer, model = encoder if encoder is not None else load_encoder(job.model_name)
    hidden = int(model.config.hidden_size)
    if job.d is not None and job.d != hidden:
        raise ValueError(f"dimension mismatch: encoder yields d={hidden}, requested d={job.d}")
    vectors = encode_texts(texts, tokenizer, model)
    return write_embedding_file(job.out_path, texts, vectors)
