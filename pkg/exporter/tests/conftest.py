"""Shared fixture: a tiny locally built encoder, nothing downloaded."""

import pytest

torch = pytest.importorskip("torch")
transformers = pytest.importorskip("transformers")

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "the", "a", "what", "is", "of", "who", "for", "#",
    "capital", "built", "by", "directed", "cast", "member", "part",
    "series", "ordinal", "followed", "character", "role", "movie",
]


@pytest.fixture(scope="session")
def tiny_encoder(tmp_path_factory):
    """16-wide, 2-layer encoder with a seeded init and a handmade vocab."""
    vocab = tmp_path_factory.mktemp("vocab") / "vocab.txt"
    vocab.write_text("".join(tok + "\n" for tok in VOCAB), encoding="utf-8")
    tokenizer = transformers.BertTokenizer(str(vocab), do_lower_case=True)
    config = transformers.BertConfig(
        vocab_size=len(VOCAB), hidden_size=16, num_hidden_layers=2,
        num_attention_heads=2, intermediate_size=32,
        max_position_embeddings=64)
    torch.manual_seed(0)
    model = transformers.BertModel(config)
    model.eval()
    return tokenizer, model
