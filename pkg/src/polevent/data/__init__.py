"""Bundled sample data: a 15-headline health-politics news corpus with a
matching gold set and mock script, wired together so the full pipeline can
run (and score 1.0) without any remote endpoint.
"""

from importlib import resources
from pathlib import Path


def _path(name: str) -> Path:
    return Path(resources.files(__package__) / name)


def sample_corpus_path() -> Path:
    return _path("sample_corpus.jsonl")


def sample_gold_path() -> Path:
    return _path("sample_gold.json")


def sample_mock_script_path() -> Path:
    return _path("sample_mock_script.json")
