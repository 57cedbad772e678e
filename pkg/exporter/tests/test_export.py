"""Encoding recipe, file format, determinism, and the CLI wrapper."""

import hashlib
import importlib

import numpy as np
import pytest
import torch

from embed_exporter import ExportJob, encode_texts, export, write_embedding_file
from embed_exporter.cli import main

# the package re-exports a function named "export", so fetch the module itself
export_module = importlib.import_module("embed_exporter.export")

TEXTS = [
    "who directed the movie",
    "cast member # character role",
    "part of the series # series ordinal 1",
]


def _parse(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    entries = {}
    for line in lines[1:]:
        digest, values = line.split("\t")
        entries[digest] = np.array(values.split(), dtype=np.float32)
    return lines[0], entries


class TestEncodeTexts:
    """Mean over all hidden layers, then over all real tokens."""

    def test_matches_hand_averaging_for_a_single_text(self, tiny_encoder):
        tokenizer, model = tiny_encoder
        enc = tokenizer([TEXTS[0]], return_tensors="pt")
        with torch.no_grad():
            out = model(**enc, output_hidden_states=True)
        per_token = torch.stack(out.hidden_states).mean(dim=0)[0]
        expected = per_token.mean(dim=0).numpy()
        got = encode_texts([TEXTS[0]], tokenizer, model)
        assert got.shape == (1, 16)
        np.testing.assert_allclose(got[0], expected, rtol=1e-5, atol=1e-6)

    def test_embedding_layer_output_is_part_of_the_average(self, tiny_encoder):
        tokenizer, model = tiny_encoder
        enc = tokenizer([TEXTS[0]], return_tensors="pt")
        with torch.no_grad():
            out = model(**enc, output_hidden_states=True)
        # layers + 1 states: the embedding output plus each encoder layer
        assert len(out.hidden_states) == model.config.num_hidden_layers + 1
        last_only = out.hidden_states[-1][0].mean(dim=0).numpy()
        got = encode_texts([TEXTS[0]], tokenizer, model)[0]
        assert not np.allclose(got, last_only, rtol=1e-3)

    def test_special_tokens_count_toward_the_token_mean(self, tiny_encoder):
        tokenizer, model = tiny_encoder
        enc = tokenizer([TEXTS[0]], return_tensors="pt")
        with torch.no_grad():
            out = model(**enc, output_hidden_states=True)
        per_token = torch.stack(out.hidden_states).mean(dim=0)[0]
        interior_only = per_token[1:-1].mean(dim=0).numpy()
        got = encode_texts([TEXTS[0]], tokenizer, model)[0]
        assert not np.allclose(got, interior_only, rtol=1e-3)

    def test_padding_does_not_leak_into_shorter_texts(self, tiny_encoder):
        tokenizer, model = tiny_encoder
        short = "capital"
        alone = encode_texts([short], tokenizer, model)[0]
        padded = encode_texts([short, TEXTS[2]], tokenizer, model, batch_size=2)[0]
        np.testing.assert_allclose(padded, alone, rtol=1e-4, atol=1e-6)

    def test_batch_boundaries_do_not_change_shapes(self, tiny_encoder):
        tokenizer, model = tiny_encoder
        got = encode_texts(TEXTS + ["capital of", "built by"], tokenizer, model,
                           batch_size=2)
        assert got.shape == (5, 16)
        assert got.dtype == np.float32

    def test_no_texts_yield_an_empty_matrix(self, tiny_encoder):
        tokenizer, model = tiny_encoder
        got = encode_texts([], tokenizer, model)
        assert got.shape == (0, 16)


class TestWriteEmbeddingFile:
    """dim= header plus one sha256-keyed float32 row per text."""

    def test_rows_are_keyed_by_the_exact_text_digest(self, tmp_path):
        vecs = np.arange(6, dtype=np.float32).reshape(2, 3)
        path = write_embedding_file(tmp_path / "e.tsv", ["a b", "c # d"], vecs)
        header, entries = _parse(path)
        assert header == "dim=3"
        for text, vec in zip(["a b", "c # d"], vecs):
            digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
            np.testing.assert_array_equal(entries[digest], vec)

    def test_duplicate_texts_are_rejected(self, tmp_path):
        vecs = np.zeros((2, 3), dtype=np.float32)
        with pytest.raises(ValueError, match="duplicate text"):
            write_embedding_file(tmp_path / "e.tsv", ["same", "same"], vecs)

    def test_row_count_mismatch_is_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="2 texts but 1 vectors"):
            write_embedding_file(tmp_path / "e.tsv", ["a", "b"],
                                 np.zeros((1, 3), dtype=np.float32))


class TestExport:
    """End-to-end jobs over a texts file."""

    def _job(self, tmp_path, lines, **kwargs):
        texts_path = tmp_path / "texts.txt"
        texts_path.write_text("".join(ln + "\n" for ln in lines), encoding="utf-8")
        return ExportJob(texts_path=texts_path, out_path=tmp_path / "emb.tsv", **kwargs)

    def test_three_unique_texts_yield_three_entries(self, tiny_encoder, tmp_path):
        out = export(self._job(tmp_path, TEXTS), encoder=tiny_encoder)
        header, entries = _parse(out)
        assert header == "dim=16"
        assert len(entries) == 3

    def test_duplicate_lines_are_deduplicated(self, tiny_encoder, tmp_path):
        out = export(self._job(tmp_path, [TEXTS[0], TEXTS[0], TEXTS[1]]),
                     encoder=tiny_encoder)
        _, entries = _parse(out)
        assert len(entries) == 2

    def test_reexport_is_byte_identical(self, tiny_encoder, tmp_path):
        job = self._job(tmp_path, TEXTS)
        first = export(job, encoder=tiny_encoder).read_bytes()
        second = export(job, encoder=tiny_encoder).read_bytes()
        assert first == second

    def test_written_values_round_trip_at_file_precision(self, tiny_encoder, tmp_path):
        tokenizer, model = tiny_encoder
        out = export(self._job(tmp_path, TEXTS), encoder=tiny_encoder)
        _, entries = _parse(out)
        vecs = encode_texts(TEXTS, tokenizer, model)
        for text, vec in zip(TEXTS, vecs):
            digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
            np.testing.assert_array_equal(entries[digest], vec.astype(np.float32))

    def test_dimension_mismatch_is_rejected(self, tiny_encoder, tmp_path):
        with pytest.raises(ValueError, match="dimension mismatch"):
            export(self._job(tmp_path, TEXTS, d=768), encoder=tiny_encoder)

    def test_matching_dimension_pin_passes(self, tiny_encoder, tmp_path):
        out = export(self._job(tmp_path, TEXTS, d=16), encoder=tiny_encoder)
        assert out.read_text(encoding="utf-8").startswith("dim=16\n")


class TestCli:
    """Subcommands print summaries and exit nonzero on errors."""

    def test_collect_writes_the_texts_file(self, tmp_path, capsys):
        kg = tmp_path / "kg.tsv"
        kg.write_text("f1\te:a|A\tp:x|built by\te:b|B\n", encoding="utf-8")
        ds = tmp_path / "d.json"
        ds.write_text('{"conversations": []}', encoding="utf-8")
        out = tmp_path / "texts.txt"
        assert main(["collect", "--kg", str(kg), "--dataset", str(ds),
                     "--out", str(out)]) == 0
        assert "wrote 1 texts" in capsys.readouterr().out
        assert out.read_text(encoding="utf-8") == "built by\n"

    def test_export_reports_count_and_dim(self, tiny_encoder, tmp_path,
                                          monkeypatch, capsys):
        monkeypatch.setattr(export_module, "load_encoder",
                            lambda name: tiny_encoder)
        texts = tmp_path / "texts.txt"
        texts.write_text("".join(t + "\n" for t in TEXTS), encoding="utf-8")
        out = tmp_path / "emb.tsv"
        assert main(["export", "--texts", str(texts), "--out", str(out)]) == 0
        assert "wrote 3 embeddings (dim=16)" in capsys.readouterr().out

    def test_export_dimension_mismatch_exits_nonzero(self, tiny_encoder, tmp_path,
                                                     monkeypatch, capsys):
        monkeypatch.setattr(export_module, "load_encoder",
                            lambda name: tiny_encoder)
        texts = tmp_path / "texts.txt"
        texts.write_text("capital\n", encoding="utf-8")
        rc = main(["export", "--texts", str(texts), "--out", str(tmp_path / "e.tsv"),
                   "--dim", "768"])
        assert rc == 1
        assert "dimension mismatch" in capsys.readouterr().err

    def test_collect_parse_error_exits_nonzero(self, tmp_path, capsys):
        kg = tmp_path / "kg.tsv"
        kg.write_text("too\tfew\tfields\n", encoding="utf-8")
        ds = tmp_path / "d.json"
        ds.write_text('{"conversations": []}', encoding="utf-8")
        rc = main(["collect", "--kg", str(kg), "--dataset", str(ds),
                   "--out", str(tmp_path / "t.txt")])
        assert rc == 1
        assert "error (collect)" in capsys.readouterr().err
