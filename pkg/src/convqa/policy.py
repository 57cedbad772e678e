"""Softmax walk policy over labeled graph edges.

Two bias-free layers with a ReLU between them project the question input
into the action-embedding space; action scores are dot products against the
action-label embeddings and a stable softmax turns them into a distribution.
Gradients are computed analytically (no autograd) and applied with Adam
ascent steps.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kg import ActionEdge, EntityRef

__all__ = [
    "PolicyParams",
    "ActionSet",
    "StateInput",
    "AdamState",
    "softmax",
    "forward",
    "sample_action",
    "top_k_actions",
    "entropy",
    "grad_log_pi",
    "grad_entropy",
    "adam_ascent_step",
    "init_params",
    "build_action_set",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_MAGIC",
]

CHECKPOINT_MAGIC = b"CNQ1"
CHECKPOINT_VERSION = 1


@dataclass
class PolicyParams:
    """w1: (hidden, inputDim), w2: (d, hidden); both bias-free, float64."""

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self) -> None:
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ValueError("policy weights must be 2-d matrices")
        if self.w2.shape[1] != self.w1.shape[0]:
            raise ValueError(
                f"shape mismatch: w2 {self.w2.shape} cannot consume w1 output {self.w1.shape}")

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def d(self) -> int:
        return self.w2.shape[0]


@dataclass(frozen=True)
class ActionSet:
    """Candidate edges plus their stacked label embeddings, rows aligned."""

    edges: tuple[ActionEdge, ...]
    matrix: np.ndarray  # (len(edges), d)

    def __post_init__(self) -> None:
        if len(self.edges) == 0:
            raise ValueError("an action set must contain at least one edge")
        if self.matrix.shape[0] != len(self.edges):
            raise ValueError("action matrix rows must align with edges")

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class StateInput:
    x: np.ndarray
    start_entity: EntityRef


@dataclass
class AdamState:
    m_w1: np.ndarray
    v_w1: np.ndarray
    m_w2: np.ndarray
    v_w2: np.ndarray
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: PolicyParams) -> "AdamState":
        return cls(
            m_w1=np.zeros_like(params.w1),
            v_w1=np.zeros_like(params.w1),
            m_w2=np.zeros_like(params.w2),
            v_w2=np.zeros_like(params.w2),
        )


def softmax(logits: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax; finite for any finite logits."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - np.max(logits)
    exps = np.exp(shifted)
    return exps / np.sum(exps)


def _forward_parts(params: PolicyParams, state: StateInput, actions: ActionSet):
    x = np.asarray(state.x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise ValueError(f"state dimension {x.shape} does not match inputDim {params.input_dim}")
    if actions.matrix.shape[1] != params.d:
        raise ValueError(
            f"action embedding dim {actions.matrix.shape[1]} does not match d {params.d}")
    hidden_pre = params.w1 @ x
    hidden = np.maximum(hidden_pre, 0.0)
    z = params.w2 @ hidden
    logits = actions.matrix @ z
    return x, hidden_pre, hidden, z, logits


def forward(params: PolicyParams, state: StateInput, actions: ActionSet) -> np.ndarray:
    """Action distribution for one state; probabilities sum to 1."""
    _, _, _, _, logits = _forward_parts(params, state, actions)
    return softmax(logits)


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Draw one action index from the distribution."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size == 0:
        raise ValueError("probabilities must be a non-empty vector")
    if np.any(np.isnan(probs)) or np.any(probs < 0):
        raise ValueError("probabilities must be non-negative and finite")
    total = float(np.sum(probs))
    if total <= 0:
        raise ValueError("probabilities must have positive mass")
    cum = np.cumsum(probs)
    draw = rng.random() * total
    return int(min(np.searchsorted(cum, draw, side="right"), probs.size - 1))


def top_k_actions(probs: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Top-k (index, prob) pairs, ties broken toward the lower index."""
    if k <= 0:
        raise ValueError(f"k must be positive, got {k}")
    probs = np.asarray(probs, dtype=np.float64)
    order = np.lexsort((np.arange(probs.size), -probs))
    return [(int(i), float(probs[i])) for i in order[: min(k, probs.size)]]


def entropy(probs: np.ndarray) -> float:
    """Natural-log entropy with the 0*log(0) = 0 convention."""
    probs = np.asarray(probs, dtype=np.float64)
    nz = probs[probs > 0]
    return float(-np.sum(nz * np.log(nz)))


def _backprop_logit_grad(params: PolicyParams, x: np.ndarray, hidden_pre: np.ndarray,
                         hidden: np.ndarray, actions: ActionSet,
                         logit_grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Push a gradient at the logits back onto (w1, w2)."""
    upstream = actions.matrix.T @ logit_grad  # d/dz
    g_w2 = np.outer(upstream, hidden)
    g_hidden = params.w2.T @ upstream
    g_hidden = np.where(hidden_pre > 0, g_hidden, 0.0)  # ReLU subgradient 0 at 0
    g_w1 = np.outer(g_hidden, x)
    return g_w1, g_w2


def grad_log_pi(params: PolicyParams, state: StateInput, actions: ActionSet,
                chosen_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of log pi(chosen | state) w.r.t. (w1, w2)."""
    if not 0 <= chosen_index < len(actions):
        raise IndexError(f"chosen index {chosen_index} outside action set of {len(actions)}")
    x, hidden_pre, hidden, _, logits = _forward_parts(params, state, actions)
    probs = softmax(logits)
    logit_grad = -probs
    logit_grad[chosen_index] += 1.0
    return _backprop_logit_grad(params, x, hidden_pre, hidden, actions, logit_grad)


def grad_entropy(params: PolicyParams, state: StateInput,
                 actions: ActionSet) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the policy entropy at this state w.r.t. (w1, w2)."""
    x, hidden_pre, hidden, _, logits = _forward_parts(params, state, actions)
    probs = softmax(logits)
    ent = entropy(probs)
    with np.errstate(divide="ignore"):
        log_p = np.where(probs > 0, np.log(np.where(probs > 0, probs, 1.0)), 0.0)
    logit_grad = -probs * (log_p + ent)
    return _backprop_logit_grad(params, x, hidden_pre, hidden, actions, logit_grad)


def adam_ascent_step(params: PolicyParams, adam: AdamState,
                     grads: tuple[np.ndarray, np.ndarray], alpha: float) -> PolicyParams:
    """One bias-corrected Adam step in the ascent direction. Mutates in place."""
    if alpha <= 0:
        raise ValueError(f"learning rate must be positive, got {alpha}")
    g_w1, g_w2 = grads
    if g_w1.shape != params.w1.shape or g_w2.shape != params.w2.shape:
        raise ValueError("gradient shapes must match parameter shapes")
    adam.step_count += 1
    t = adam.step_count
    for w, m, v, g in ((params.w1, adam.m_w1, adam.v_w1, g_w1),
                       (params.w2, adam.m_w2, adam.v_w2, g_w2)):
        m *= adam.beta1
        m += (1.0 - adam.beta1) * g
        v *= adam.beta2
        v += (1.0 - adam.beta2) * np.square(g)
        m_hat = m / (1.0 - adam.beta1 ** t)
        v_hat = v / (1.0 - adam.beta2 ** t)
        w += alpha * m_hat / (np.sqrt(v_hat) + adam.eps)
    return params


def init_params(input_dim: int, seed: int = 0, *, d: int | None = None,
                hidden: int | None = None) -> PolicyParams:
    """Glorot-uniform init: r = sqrt(6 / (fanIn + fanOut)) per matrix.

    ``d`` defaults to ``input_dim`` (the no-history input layout) and
    ``hidden`` defaults to ``d``.
    """
    if input_dim <= 0:
        raise ValueError(f"inputDim must be positive, got {input_dim}")
    if d is None:
        d = input_dim
    if hidden is None:
        hidden = d
    if d <= 0 or hidden <= 0:
        raise ValueError(f"d and hidden must be positive, got d={d} hidden={hidden}")
    rng = np.random.default_rng(seed)
    r1 = np.sqrt(6.0 / (input_dim + hidden))
    r2 = np.sqrt(6.0 / (hidden + d))
    w1 = rng.uniform(-r1, r1, size=(hidden, input_dim))
    w2 = rng.uniform(-r2, r2, size=(d, hidden))
    return PolicyParams(w1=w1, w2=w2)


def build_action_set(edges: list[ActionEdge], embedder) -> ActionSet:
    """Embed each edge's path label; row i belongs to edges[i]."""
    if not edges:
        raise ValueError("cannot build an action set from zero edges")
    matrix = np.stack([embedder.encode(e.path_label) for e in edges])
    return ActionSet(edges=tuple(edges), matrix=matrix)


# --- checkpoint serialization -------------------------------------------------
# Layout (little-endian): magic "CNQ1", u32 version, u32 d, u32 inputDim,
# u32 hidden, w1 float32 row-major, w2 float32 row-major, u8 hasAdam, then
# (if hasAdam) mW1, vW1, mW2, vW2 float32 row-major and u64 stepCount.


def _write_matrix(buf: bytearray, mat: np.ndarray) -> None:
    buf += np.ascontiguousarray(mat, dtype="<f4").tobytes()


def save_checkpoint(path: str | Path, params: PolicyParams,
                    adam: AdamState | None = None) -> None:
    buf = bytearray()
    buf += CHECKPOINT_MAGIC
    buf += struct.pack("<IIII", CHECKPOINT_VERSION, params.d, params.input_dim,
                       params.hidden)
    _write_matrix(buf, params.w1)
    _write_matrix(buf, params.w2)
    if adam is None:
        buf += struct.pack("<B", 0)
    else:
        buf += struct.pack("<B", 1)
        for mat in (adam.m_w1, adam.v_w1, adam.m_w2, adam.v_w2):
            _write_matrix(buf, mat)
        buf += struct.pack("<Q", adam.step_count)
    Path(path).write_bytes(bytes(buf))


def _read_matrix(data: bytes, offset: int, rows: int, cols: int) -> tuple[np.ndarray, int]:
    n = rows * cols * 4
    if offset + n > len(data):
        raise ValueError("checkpoint truncated inside a matrix block")
    mat = np.frombuffer(data[offset:offset + n], dtype="<f4").astype(np.float64)
    return mat.reshape(rows, cols), offset + n


def load_checkpoint(path: str | Path) -> tuple[PolicyParams, AdamState | None]:
    """Parse a checkpoint; truncation, bad magic, or bad version raise ValueError."""
    data = Path(path).read_bytes()
    if len(data) < 4 + 16 + 1:
        raise ValueError(f"{path}: checkpoint too short")
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad magic {data[:4]!r}")
    version, d, input_dim, hidden = struct.unpack_from("<IIII", data, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    if min(d, input_dim, hidden) <= 0:
        raise ValueError(f"{path}: non-positive dimensions in header")
    offset = 20
    w1, offset = _read_matrix(data, offset, hidden, input_dim)
    w2, offset = _read_matrix(data, offset, d, hidden)
    if offset + 1 > len(data):
        raise ValueError(f"{path}: checkpoint truncated before Adam flag")
    has_adam = data[offset]
    offset += 1
    params = PolicyParams(w1=w1, w2=w2)
    if has_adam == 0:
        if offset != len(data):
            raise ValueError(f"{path}: trailing bytes after weights")
        return params, None
    if has_adam != 1:
        raise ValueError(f"{path}: bad Adam flag {has_adam}")
    m_w1, offset = _read_matrix(data, offset, hidden, input_dim)
    v_w1, offset = _read_matrix(data, offset, hidden, input_dim)
    m_w2, offset = _read_matrix(data, offset, d, hidden)
    v_w2, offset = _read_matrix(data, offset, d, hidden)
    if offset + 8 != len(data):
        raise ValueError(f"{path}: checkpoint truncated in Adam block")
    (step_count,) = struct.unpack_from("<Q", data, offset)
    adam = AdamState(m_w1=m_w1, v_w1=v_w1, m_w2=m_w2, v_w2=v_w2, step_count=step_count)
    return params, adam
