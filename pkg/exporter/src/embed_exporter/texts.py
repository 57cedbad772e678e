"""Collects every text the engine will embed: edge labels and questions.

The engine composes one label per walkable edge from each fact (main edge,
endpoint-to-qualifier edges, qualifier-pair edges) and embeds those labels
verbatim, so the collector regenerates the exact same strings from the fact
file. Reversed edges reuse the forward label and add no new text.
"""

import json
from pathlib import Path

__all__ = ["collect_texts", "fact_labels", "write_texts"]


def _split_pair(field_text: str, where: str) -> tuple[str, str]:
    parts = field_text.split("|")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise ValueError(f"{where}: expected 'id|label', got {field_text!r}")
    return parts[0], parts[1]


def fact_labels(line: str, lineno: int = 0) -> list[str]:
    """Edge label texts of one fact line, in edge order, duplicates included.

    Composition per fact (predicate P, subject S, object O, qualifiers
    (qp_k, qo_k)):
      - main edge: ``P`` or, with qualifiers, ``P # qp1 qo1 # qp2 qo2 ...``
      - S or O to qo_k: ``P <other-main-endpoint-label> # qp_k``
      - qualifier pair i<j: ``P <O-label> # qp_j``
    """
    where = f"line {lineno}"
    fields = line.rstrip("\n").split("\t")
    if len(fields) < 4:
        raise ValueError(f"{where}: expected at least 4 TAB-separated fields, got {len(fields)}")
    _, subj_label = _split_pair(fields[1], where)
    _, pred_label = _split_pair(fields[2], where)
    _, obj_label = _split_pair(fields[3], where)
    qualifiers = []
    for qfield in fields[4:]:
        parts = qfield.split("|")
        if len(parts) != 4 or not all(parts):
            raise ValueError(f"{where}: expected 'qpId|qpLabel|qoId|qoLabel', got {qfield!r}")
        qualifiers.append((parts[1], parts[3]))

    labels = []
    if qualifiers:
        tail = " # ".join(f"{qp} {qo}" for qp, qo in qualifiers)
        labels.append(f"{pred_label} # {tail}")
    else:
        labels.append(pred_label)
    for qp, _ in qualifiers:
        labels.append(f"{pred_label} {obj_label} # {qp}")
        labels.append(f"{pred_label} {subj_label} # {qp}")
    for i in range(len(qualifiers)):
        for j in range(i + 1, len(qualifiers)):
            labels.append(f"{pred_label} {obj_label} # {qualifiers[j][0]}")
    return labels


def collect_texts(kg_file: str | Path, dataset_file: str | Path) -> list[str]:
    """Union of all edge labels and all dataset questions, first-seen order."""
    seen: dict[str, None] = {}
    with Path(kg_file).open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            # blank and comment lines are ignored, as in the fact-file reader
            if not raw.strip() or raw.lstrip().startswith("#"):
                continue
            for label in fact_labels(raw, lineno):
                seen.setdefault(label, None)
    doc = json.loads(Path(dataset_file).read_text(encoding="utf-8"))
    for conv in doc["conversations"]:
        for intent in conv["intents"]:
            for question in intent["questions"]:
                seen.setdefault(question, None)
    return list(seen)


def write_texts(texts: list[str], path: str | Path) -> Path:
    """One text per line; texts must be newline-free to survive the format."""
    path = Path(path)
    for text in texts:
        if "\n" in text or "\r" in text:
            raise ValueError(f"text contains a line break: {text!r}")
    path.write_text("".join(t + "\n" for t in texts), encoding="utf-8")
    return path
