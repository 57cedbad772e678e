"""Offline embedding export: collect engine texts, encode, write keyed files."""

from .export import ExportJob, encode_texts, export, write_embedding_file
from .texts import collect_texts, fact_labels, write_texts

__all__ = [
    "ExportJob",
    "collect_texts",
    "encode_texts",
    "export",
    "fact_labels",
    "write_embedding_file",
    "write_texts",
]
