"""Scripted user simulation over conversation datasets.

A dataset is a JSON document of conversations; each conversation holds
ordered intents and each intent an ordered utterance list (first question,
then reformulations) plus gold answers. Two deterministic user models drive
runs:

  - ideal: reformulates while answers are wrong, looping back to the
    intent's first utterance when the scripted list runs out, and abandons
    an intent only at the 5-turn cap;
  - noisy: identical except it moves on to the next intent after the last
    scripted reformulation regardless of correctness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .kg import EntityRef

__all__ = [
    "MAX_TURNS_PER_INTENT",
    "GoldAnswer",
    "IntentScript",
    "ConversationScript",
    "Dataset",
    "load_dataset",
    "load_dataset_obj",
    "is_correct",
    "UserSession",
]

MAX_TURNS_PER_INTENT = 5
USER_KINDS = ("ideal", "noisy")


@dataclass(frozen=True)
class GoldAnswer:
    label: str
    id: str | None = None


@dataclass(frozen=True)
class IntentScript:
    intent_id: str
    utterances: tuple[str, ...]
    gold_answers: tuple[GoldAnswer, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.utterances) <= MAX_TURNS_PER_INTENT:
            raise ValueError(
                f"intent {self.intent_id!r} must script 1..{MAX_TURNS_PER_INTENT} "
                f"utterances, got {len(self.utterances)}")
        if any(not u.strip() for u in self.utterances):
            raise ValueError(f"intent {self.intent_id!r} has an empty utterance")
        if not self.gold_answers:
            raise ValueError(f"intent {self.intent_id!r} has no gold answers")


@dataclass(frozen=True)
class ConversationScript:
    conversation_id: str
    domain: str
    intents: tuple[IntentScript, ...]

    def __post_init__(self) -> None:
        if not self.intents:
            raise ValueError(f"conversation {self.conversation_id!r} has no intents")


@dataclass(frozen=True)
class Dataset:
    conversations: tuple[ConversationScript, ...]


def load_dataset_obj(doc: dict, source: str = "<memory>") -> Dataset:
    if not isinstance(doc, dict) or "conversations" not in doc:
        raise ValueError(f"{source}: expected an object with a 'conversations' list")
    conversations = []
    for ci, conv in enumerate(doc["conversations"]):
        intents = []
        for ii, intent in enumerate(conv.get("intents", [])):
            golds = tuple(
                GoldAnswer(label=str(g["label"]), id=g.get("id"))
                for g in intent.get("goldAnswers", [])
            )
            intents.append(IntentScript(
                intent_id=str(intent.get("id", f"intent-{ci}-{ii}")),
                utterances=tuple(str(q) for q in intent.get("questions", [])),
                gold_answers=golds,
            ))
        conversations.append(ConversationScript(
            conversation_id=str(conv.get("id", f"conv-{ci}")),
            domain=str(conv.get("domain", "unknown")),
            intents=tuple(intents),
        ))
    if not conversations:
        raise ValueError(f"{source}: dataset has no conversations")
    return Dataset(conversations=tuple(conversations))


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
    return load_dataset_obj(doc, source=str(path))


def _norm_label(label: str) -> str:
    return label.strip().casefold()


def is_correct(answer: EntityRef | None, intent: IntentScript) -> bool:
    """True iff the id matches a gold id, or lexical forms match for literals
    and id-less golds (trimmed, case-folded)."""
    if answer is None:
        return False
    for gold in intent.gold_answers:
        if gold.id is not None and answer.id == gold.id:
            return True
        if (answer.kind == "literal" or gold.id is None) and \
                _norm_label(answer.label) == _norm_label(gold.label):
            return True
    return False


@dataclass
class _Cursor:
    intent_index: int = 0
    position: int = 0        # index into the scripted utterance list
    turns_taken: int = 0     # utterances emitted for the current intent
    started: bool = False
    done: bool = False


@dataclass
class UserSession:
    """One scripted user working through one conversation.

    ``start`` emits the first utterance; ``next(correct)`` advances on the
    correctness of the answer to the last emitted utterance; ``peek(correct)``
    answers "what would come next" without moving the cursor.
    Every emission is (utterance | None, is_new_intent, done).
    """

    kind: str
    script: ConversationScript
    cursor: _Cursor = field(default_factory=_Cursor)

    def __post_init__(self) -> None:
        if self.kind not in USER_KINDS:
            raise ValueError(f"user kind must be one of {USER_KINDS}, got {self.kind!r}")

    @property
    def current_intent(self) -> IntentScript:
        return self.script.intents[min(self.cursor.intent_index, len(self.script.intents) - 1)]

    @property
    def done(self) -> bool:
        return self.cursor.done

    def start(self) -> tuple[str | None, bool, bool]:
        if self.cursor.started:
            raise RuntimeError("session already started")
        self.cursor.started = True
        self.cursor.turns_taken = 1
        return self.script.intents[0].utterances[0], True, False

    def _transition(self, cursor: _Cursor, correct: bool) -> tuple[str | None, bool, bool, _Cursor]:
        if not cursor.started or cursor.done:
            raise RuntimeError("session is not active")
        cur = _Cursor(**vars(cursor))
        intent = self.script.intents[cur.intent_index]
        move_on = correct or cur.turns_taken >= MAX_TURNS_PER_INTENT
        if not move_on:
            next_pos = cur.position + 1
            if next_pos >= len(intent.utterances):
                if self.kind == "noisy":
                    # gives up: a new information need arrives after the
                    # last scripted reformulation even on a wrong answer
                    move_on = True
                else:
                    next_pos = 0  # ideal: loop the scripted utterances
            if not move_on:
                cur.position = next_pos
                cur.turns_taken += 1
                return intent.utterances[next_pos], False, False, cur
        cur.intent_index += 1
        cur.position = 0
        cur.turns_taken = 1
        if cur.intent_index >= len(self.script.intents):
            cur.done = True
            return None, True, True, cur
        return self.script.intents[cur.intent_index].utterances[0], True, False, cur

    def peek(self, correct: bool) -> tuple[str | None, bool, bool]:
        """Hypothetical next emission given this correctness; cursor unchanged."""
        utterance, new_intent, done, _ = self._transition(self.cursor, correct)
        return utterance, new_intent, done

    def next(self, correct: bool) -> tuple[str | None, bool, bool]:
        """Advance on the actual answer's correctness."""
        utterance, new_intent, done, cursor = self._transition(self.cursor, correct)
        self.cursor = cursor
        return utterance, new_intent, done
