"""Deterministic synthetic fixture: a small film-style graph plus scripted
conversations that are answerable from it.

Each conversation circles one hub entity. Four intents ask about plain
facts of the hub (one of them with a literal answer) and a fifth asks for
an answer that is only reachable through a qualifier edge. Hubs also carry
distractor facts so the untrained policy has no free lunch, and background
facts give the graph realistic degree and subject frequencies. Every
question mentions its hub, and a linker annotation file maps each
conversation opener to its hub, so the context tracker has a clean seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["ToyWorld", "build_toy_world", "write_toy_world"]

_SYLLABLES = [c + v for c in "bdfgklmnprstvz" for v in "aeiou"]

_PREDICATES = [
    ("p.director", "movie director"),
    ("p.writer", "script writer"),
    ("p.composer", "score composer"),
    ("p.location", "filming location"),
    ("p.performer", "lead performer"),
    ("p.producer", "film producer"),
    ("p.studio", "production studio"),
    ("p.genre", "story genre"),
    ("p.budget", "budget figure"),
    ("p.award", "award received"),
    ("p.language", "spoken language"),
]
_SERIES_PRED = ("p.series", "series membership")
_QUAL_FOLLOW = ("q.follow", "followed by")
_QUAL_ORDINAL = ("q.ordinal", "sequence number")

_DOMAINS = ("films", "albums", "novels", "teams", "shows")

_PLAIN_TEMPLATES = (
    "what is the {pred} of {hub}",
    "tell me the {pred} for {hub}",
    "give the {pred} behind {hub}",
)
_QUALIFIER_TEMPLATES = (
    "which movie followed {hub} in the series",
    "what followed {hub} in that series",
    "say which movie followed {hub} in its series run",
)


@dataclass
class ToyWorld:
    kg_lines: list[str]
    dataset: dict
    ned_lines: list[str]
    hub_by_conversation: dict[str, str]

    def kg_text(self) -> str:
        return "\n".join(self.kg_lines) + "\n"

    def ned_text(self) -> str:
        return "\n".join(self.ned_lines) + "\n"


class _Names:
    """Unique pseudo-word labels, deterministic for a fixed rng."""

    def __init__(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self.used: set[str] = set()

    def word(self) -> str:
        while True:
            n = int(self.rng.integers(2, 4))
            w = "".join(self.rng.choice(_SYLLABLES) for _ in range(n))
            if w not in self.used:
                self.used.add(w)
                return w

    def label(self) -> str:
        return f"{self.word().capitalize()} {self.word().capitalize()}"


def _fact_line(fact_id: str, subj: tuple[str, str], pred: tuple[str, str],
               obj: tuple[str, str], quals: list[tuple[str, str, str, str]] = ()) -> str:
    fields = [fact_id, f"{subj[0]}|{subj[1]}", f"{pred[0]}|{pred[1]}", f"{obj[0]}|{obj[1]}"]
    for qp_id, qp_label, qo_id, qo_label in quals:
        fields.append(f"{qp_id}|{qp_label}|{qo_id}|{qo_label}")
    return "\t".join(fields)


def build_toy_world(seed: int = 11, conversations: int = 20,
                    noise_entities: int = 30, background_facts: int = 25) -> ToyWorld:
    """Build the synthetic graph and scripts. Fully determined by the seed."""
    from .embeddings import text_digest  # local import keeps this module standalone-readable

    rng = np.random.default_rng(seed)
    names = _Names(rng)
    kg_lines: list[str] = ["# synthetic film graph"]
    ned_lines: list[str] = []
    convs = []
    hub_by_conversation: dict[str, str] = {}
    fact_counter = 0

    def next_fact_id() -> str:
        nonlocal fact_counter
        fact_counter += 1
        return f"f{fact_counter:04d}"

    noise = [(f"n.{k}", names.label()) for k in range(noise_entities)]

    for c in range(conversations):
        conv_id = f"conv{c:02d}"
        hub = (f"hub.{c}", names.label())
        hub_by_conversation[conv_id] = hub[0]
        pred_idx = rng.choice(len(_PREDICATES), size=8, replace=False).tolist()
        intent_preds = [_PREDICATES[i] for i in pred_idx[:4]]
        distractor_preds = [_PREDICATES[i] for i in pred_idx[4:]]
        intents = []

        # four plain intents; the last of them answers with a literal
        for i, pred in enumerate(intent_preds):
            if i == 3:
                target = (f"lit:y{c:02d}", str(1931 + 3 * c))
            else:
                target = (f"t.{c}.{i}", names.label())
            kg_lines.append(_fact_line(next_fact_id(), hub, pred, target))
            questions = [t.format(pred=pred[1], hub=hub[1]) for t in _PLAIN_TEMPLATES]
            intents.append({
                "id": f"{conv_id}-i{i}",
                "questions": questions,
                "goldAnswers": [{"id": target[0], "label": target[1]}],
            })

        # qualifier intent: the gold answer hangs off the series fact's qualifier
        series = (f"s.{c}", names.label())
        follow = (f"next.{c}", names.label())
        ordinal = (f"lit:ord{c:02d}", str(c + 2))
        kg_lines.append(_fact_line(
            next_fact_id(), hub, _SERIES_PRED, series,
            quals=[(_QUAL_FOLLOW[0], _QUAL_FOLLOW[1], follow[0], follow[1]),
                   (_QUAL_ORDINAL[0], _QUAL_ORDINAL[1], ordinal[0], ordinal[1])]))
        questions = [t.format(hub=hub[1]) for t in _QUALIFIER_TEMPLATES]
        intents.append({
            "id": f"{conv_id}-i4",
            "questions": questions,
            "goldAnswers": [{"id": follow[0], "label": follow[1]}],
        })

        # distractor facts keep the hub's action set honest
        for pred in distractor_preds:
            obj = noise[int(rng.integers(0, len(noise)))]
            kg_lines.append(_fact_line(next_fact_id(), hub, pred, obj))

        first_question = intents[0]["questions"][0]
        ned_lines.append(f"{text_digest(first_question)}\t{hub[0]}|1.0")
        convs.append({
            "id": conv_id,
            "domain": _DOMAINS[c % len(_DOMAINS)],
            "intents": intents,
        })

    # background facts among noise entities, most carrying qualifiers so the
    # graph has a healthy share of n-ary structure
    for b in range(background_facts):
        subj = noise[int(rng.integers(0, len(noise)))]
        pred = _PREDICATES[int(rng.integers(0, len(_PREDICATES)))]
        obj = noise[int(rng.integers(0, len(noise)))]
        quals = []
        if b < 20:
            qo = noise[int(rng.integers(0, len(noise)))]
            quals.append((_QUAL_FOLLOW[0], _QUAL_FOLLOW[1], qo[0], qo[1]))
            if b % 2 == 0:
                qo2 = noise[int(rng.integers(0, len(noise)))]
                quals.append((_QUAL_ORDINAL[0], _QUAL_ORDINAL[1], qo2[0], qo2[1]))
        kg_lines.append(_fact_line(next_fact_id(), subj, pred, obj, quals))

    dataset = {"conversations": convs}
    return ToyWorld(kg_lines=kg_lines, dataset=dataset, ned_lines=ned_lines,
                    hub_by_conversation=hub_by_conversation)


def write_toy_world(world: ToyWorld, directory: str | Path) -> dict[str, Path]:
    """Write kg.tsv, dataset.json, and ned.tsv under ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "kg": directory / "kg.tsv",
        "dataset": directory / "dataset.json",
        "ned": directory / "ned.tsv",
    }
    paths["kg"].write_text(world.kg_text(), encoding="utf-8")
    paths["dataset"].write_text(json.dumps(world.dataset, indent=2) + "\n", encoding="utf-8")
    paths["ned"].write_text(world.ned_text(), encoding="utf-8")
    return paths


def main() -> None:
    import argparse

    parser = argparse.ArgumentParser(description="write the synthetic demo fixture")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--conversations", type=int, default=20)
    args = parser.parse_args()
    world = build_toy_world(seed=args.seed, conversations=args.conversations)
    paths = write_toy_world(world, args.out)
    for name, path in paths.items():
        print(f"{name}: {path}")


if __name__ == "__main__":
    main()
