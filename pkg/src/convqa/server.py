"""HTTP service: chat sessions over the engine with online learning.

Each utterance first settles the previous turn: the reformulation predictor
compares the two texts and its verdict becomes the reward for the actions
served last turn. Rewarded experiences feed the shared queue; once it holds
an interactive batch the policy takes one update step and the model version
ticks up. A process-wide lock serializes learning so concurrent sessions
stay consistent; within a session requests are processed in arrival order.
"""

from __future__ import annotations

import threading
import uuid
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .answerer import AgentDetail, answer
from .context import ConversationContext, init_context, reset_context, update_context
from .engine import EngineBundle
from .ref_predictor import reward_from_prediction
from .trainer import Experience, ExperienceQueue, batch_update

__all__ = ["LearningService", "create_app"]


@dataclass
class _PendingAction:
    detail: AgentDetail
    action_index: int


@dataclass
class _Session:
    session_id: str
    ctx: ConversationContext | None = None
    next_conv_index: int = 0
    prev_question: str | None = None
    pending: list[_PendingAction] = field(default_factory=list)
    turns: int = 0


class UtteranceRequest(BaseModel):
    text: str
    newConversation: bool = False


class LearningService:
    """Stateful wrapper owning sessions, the policy, and the experience queue."""

    def __init__(self, bundle: EngineBundle) -> None:
        self.bundle = bundle
        self.sessions: dict[str, _Session] = {}
        self.queue = ExperienceQueue()
        self.model_version = 0
        self.updates_applied = 0
        self.recent_rewards: deque[int] = deque(maxlen=100)
        self.lock = threading.Lock()

    def create_session(self) -> str:
        with self.lock:
            session_id = uuid.uuid4().hex
            self.sessions[session_id] = _Session(session_id=session_id)
            return session_id

    def _settle_previous_turn(self, session: _Session, text: str) -> int | None:
        """Reward last turn's served actions from the predictor's verdict."""
        if session.prev_question is None or not session.pending:
            session.pending = []
            return None
        try:
            prediction = self.bundle.providers.predictor.predict(session.prev_question, text)
        except KeyError as exc:
            # Score-file misses must not masquerade as unknown-session 404s.
            raise ValueError(str(exc)) from exc
        reward = reward_from_prediction(prediction)
        for pending in session.pending:
            self.queue.enqueue(Experience(
                state=pending.detail.state,
                actions=pending.detail.actions,
                chosen_index=pending.action_index,
                reward=reward,
                next_utterance=text,
            ))
        self.recent_rewards.append(reward)
        session.pending = []
        cfg = self.bundle.cfg
        while len(self.queue) >= cfg.interactive_batch_size:
            batch_update(self.queue, self.bundle.params, self.bundle.adam,
                         cfg.train, batch_size=cfg.interactive_batch_size)
            self.updates_applied += 1
            self.model_version += 1
        return reward

    def handle_utterance(self, session_id: str, text: str,
                         new_conversation: bool = False) -> dict:
        if not text or not text.strip():
            raise ValueError("utterance text must be non-empty")
        with self.lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise KeyError(session_id)
            cfg = self.bundle.cfg
            reward_applied = self._settle_previous_turn(session, text)
            is_new_intent = reward_applied is None or reward_applied > 0
            if new_conversation and session.ctx is not None:
                session.next_conv_index = reset_context(session.ctx).conversation_index
                session.ctx = None
            if session.ctx is None:
                session.ctx = init_context(text, self.bundle.kg, self.bundle.providers.ned,
                                           conversation_index=session.next_conv_index)
            else:
                update_context(session.ctx, text, self.bundle.kg,
                               self.bundle.providers.ned, cfg.context,
                               new_intent=is_new_intent)
            details: dict[str, AgentDetail] = {}
            ranked = answer(text, session.ctx, self.bundle.kg, self.bundle.params,
                            self.bundle.providers.embedder, context_cfg=cfg.context,
                            top_k=cfg.train.top_k, mode=cfg.ranking_mode,
                            action_cap=cfg.train.action_cap, seed=cfg.train.seed,
                            details=details)
            session.pending = [
                _PendingAction(detail=detail, action_index=idx)
                for detail in details.values()
                for idx, _ in detail.picks
            ]
            session.prev_question = text
            session.turns += 1
            top = ranked[0] if ranked else None
            return {
                "answer": None if top is None else {
                    "id": top.entity.id, "label": top.entity.label, "score": top.score},
                "candidates": [
                    {"id": c.entity.id, "label": c.entity.label, "score": c.score}
                    for c in ranked[:5]
                ],
                "contextEntities": [
                    {"id": ref.id, "label": ref.label}
                    for ref in sorted(session.ctx.context_entities, key=lambda r: r.id)
                ],
                "modelVersion": self.model_version,
                "rewardAppliedToPrevTurn": reward_applied,
            }

    def reset_session(self, session_id: str) -> None:
        with self.lock:
            session = self.sessions.get(session_id)
            if session is None:
                raise KeyError(session_id)
            if session.ctx is not None:
                session.next_conv_index = reset_context(session.ctx).conversation_index
                session.ctx = None
            session.prev_question = None
            session.pending = []

    def policy_stats(self) -> dict:
        with self.lock:
            mean_recent = (sum(self.recent_rewards) / len(self.recent_rewards)
                           if self.recent_rewards else 0.0)
            return {
                "modelVersion": self.model_version,
                "updatesApplied": self.updates_applied,
                "queueLen": len(self.queue),
                "meanRecentReward": mean_recent,
                "missCounts": self.bundle.miss_counts(),
            }

    def service_stats(self) -> dict:
        with self.lock:
            return {"sessions": len(self.sessions)}


def create_app(service: LearningService, frontend_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="convqa", version="0.1.0")

    @app.post("/session")
    def create_session() -> dict:
        return {"sessionId": service.create_session()}

    @app.post("/session/{session_id}/utterance")
    def utterance(session_id: str, req: UtteranceRequest) -> dict:
        try:
            return service.handle_utterance(session_id, req.text, req.newConversation)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session") from None
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None

    @app.post("/session/{session_id}/reset")
    def reset(session_id: str) -> dict:
        try:
            service.reset_session(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session") from None
        return {"ok": True}

    @app.get("/policy/stats")
    def policy_stats() -> dict:
        return service.policy_stats()

    @app.get("/stats")
    def stats() -> dict:
        return service.service_stats()

    if frontend_dir is not None:
        frontend_dir = Path(frontend_dir)
        index = frontend_dir / "index.html"
        if index.exists():
            @app.get("/", include_in_schema=False)
            def root() -> FileResponse:
                return FileResponse(index)
            app.mount("/ui", StaticFiles(directory=frontend_dir), name="ui")
    return app
