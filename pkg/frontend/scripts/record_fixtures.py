"""Capture live service responses for the frontend contract tests.

Run from the repo root with the engine package installed:

    python3 frontend/scripts/record_fixtures.py

Rewrites frontend/test/fixtures/recorded_session.json with one scripted
exchange driven purely over the HTTP API: ask, rephrase (previous turn
rewarded -1), topic change (+1), then a new-conversation turn, with policy
stats captured before and after.
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from convqa.config import EngineConfig
from convqa.engine import build_bundle
from convqa.server import LearningService, create_app
from convqa.toydata import build_toy_world, write_toy_world
from convqa.trainer import TrainConfig

FIXTURE = Path(__file__).resolve().parents[1] / "test" / "fixtures" / "recorded_session.json"


def pick_questions(dataset_doc: dict) -> tuple[str, str, str, str]:
    """First rephrasable intent, its follow-up, the next intent, next conversation."""
    convs = dataset_doc["conversations"]
    for conv_index, conv in enumerate(convs):
        intents = conv["intents"]
        for intent_index, intent in enumerate(intents):
            if len(intent["questions"]) >= 2 and intent_index + 1 < len(intents):
                other_conv = convs[(conv_index + 1) % len(convs)]
                return (
                    intent["questions"][0],
                    intent["questions"][1],
                    intents[intent_index + 1]["questions"][0],
                    other_conv["intents"][0]["questions"][0],
                )
    raise SystemExit("toy dataset has no rephrasable intent")


def main() -> None:
    world = build_toy_world(seed=11, conversations=6)
    paths = write_toy_world(world, Path(tempfile.mkdtemp()))
    cfg = EngineConfig(kg_path=paths["kg"], dataset_path=paths["dataset"],
                       ned_path=paths["ned"], embedding_dim=32,
                       interactive_batch_size=5,
                       train=TrainConfig(alpha=0.01, batch_size=50, beta=0.05, seed=0))
    client = TestClient(create_app(LearningService(build_bundle(cfg))))

    dataset_doc = json.loads(paths["dataset"].read_text(encoding="utf-8"))
    q_first, q_rephrase, q_next_intent, q_other_conv = pick_questions(dataset_doc)

    session_id = client.post("/session").json()["sessionId"]
    stats_fresh = client.get("/policy/stats").json()

    turns = []
    script = [
        (q_first, False),
        (q_rephrase, False),
        (q_next_intent, False),
        (q_other_conv, True),
    ]
    for text, new_conversation in script:
        resp = client.post(f"/session/{session_id}/utterance",
                           json={"text": text, "newConversation": new_conversation})
        resp.raise_for_status()
        turns.append({"request": {"text": text, "newConversation": new_conversation},
                      "response": resp.json()})

    stats_after = client.get("/policy/stats").json()

    record = {
        "sessionId": session_id,
        "statsFresh": stats_fresh,
        "turns": turns,
        "statsAfter": stats_after,
    }
    FIXTURE.parent.mkdir(parents=True, exist_ok=True)
    FIXTURE.write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
    rewards = [t["response"]["rewardAppliedToPrevTurn"] for t in turns]
    print(f"recorded {len(turns)} turns, rewards {rewards}, "
          f"updatesApplied {stats_after['updatesApplied']} -> {FIXTURE}")


if __name__ == "__main__":
    main()
