"""Application configuration: a JSON file mirroring the runtime settings.

Secrets never live in the file; the API key is read from the environment
(POLEVENT_API_KEY) and a config that tries to smuggle one in is rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Union

from .corpus import ChunkPolicy, CorpusConfig, CorpusFilter, DEFAULT_FIELD_MAP
from .embed import EmbedderConfig
from .errors import ConfigError
from .llm import LlmConfig
from .prompt import PromptTemplate, load_template

_SECRET_KEYS = {"api_key", "apikey", "token", "secret", "password", "authorization"}


@dataclass
class AppConfig:
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    llm: LlmConfig | None = None
    k: int = 5
    budget_chars: int = 12000
    attribution: bool = True
    index_dir: str | None = None
    gold_path: str | None = None
    template: PromptTemplate = field(default_factory=PromptTemplate)


def _reject_secrets(section: dict, where: str) -> None:
    for key in section:
        if key.lower() in _SECRET_KEYS:
            raise ConfigError(
                f"{where}.{key}: secrets are read from the environment, not the config file"
            )


def _parse_corpus(section: dict) -> CorpusConfig:
    _reject_secrets(section, "corpus")
    field_map = dict(DEFAULT_FIELD_MAP)
    field_map.update(section.get("field_map", {}))
    filt = section.get("filter", {})
    try:
        corpus_filter = CorpusFilter(
            date_from=date.fromisoformat(filt["date_from"]) if "date_from" in filt else CorpusFilter.date_from,
            date_to=date.fromisoformat(filt["date_to"]) if "date_to" in filt else CorpusFilter.date_to,
            categories=frozenset(filt["categories"]) if "categories" in filt else CorpusFilter.categories,
        )
        chunk = ChunkPolicy(max_chars=int(section.get("chunk", {}).get("max_chars", 512)))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"corpus section: {exc}") from exc
    return CorpusConfig(field_map=field_map, filter=corpus_filter, chunk=chunk)


def _parse_embedder(section: dict) -> EmbedderConfig:
    _reject_secrets(section, "embedder")
    try:
        return EmbedderConfig(
            kind=section.get("kind", "local"),
            dim=int(section.get("dim", EmbedderConfig.dim)),
            endpoint=section.get("endpoint"),
            model=section.get("model"),
            timeout=float(section.get("timeout", EmbedderConfig.timeout)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"embedder section: {exc}") from exc


def _parse_llm(section: dict) -> LlmConfig | None:
    if not section:
        return None
    _reject_secrets(section, "llm")
    if "endpoint" not in section or "model" not in section:
        raise ConfigError("llm section needs endpoint and model")
    try:
        return LlmConfig(
            endpoint=section["endpoint"],
            model=section["model"],
            temperature=float(section.get("temperature", 0.0)),
            max_tokens=int(section.get("max_tokens", 1024)),
            timeout=float(section.get("timeout", 30.0)),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"llm section: {exc}") from exc


def load_config(path: Union[str, Path, None]) -> AppConfig:
    """Build an AppConfig from a JSON file, defaults filling the gaps."""
    if path is None:
        return AppConfig()
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError("config file must hold a JSON object")

    engine_section = payload.get("engine", {})
    paths = payload.get("paths", {})
    prompts = payload.get("prompts", {})
    try:
        template = load_template(prompts.get("system_file"), prompts.get("wrapper_file"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"prompts section: {exc}") from exc

    try:
        return AppConfig(
            corpus=_parse_corpus(payload.get("corpus", {})),
            embedder=_parse_embedder(payload.get("embedder", {})),
            llm=_parse_llm(payload.get("llm", {})),
            k=int(engine_section.get("k", 5)),
            budget_chars=int(engine_section.get("budget_chars", 12000)),
            attribution=bool(engine_section.get("attribution", True)),
            index_dir=paths.get("index_dir"),
            gold_path=paths.get("gold"),
            template=template,
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def config_to_json(config: AppConfig) -> dict:
    """Effective configuration as a JSON-ready dict (secrets excluded)."""
    return {
        "corpus": {
            "field_map": config.corpus.field_map,
            "filter": {
                "date_from": config.corpus.filter.date_from.isoformat(),
                "date_to": config.corpus.filter.date_to.isoformat(),
                "categories": sorted(config.corpus.filter.categories),
            },
            "chunk": {"max_chars": config.corpus.chunk.max_chars},
        },
        "embedder": {
            "kind": config.embedder.kind,
            "dim": config.embedder.dim,
            "endpoint": config.embedder.endpoint,
            "model": config.embedder.model,
        },
        "llm": None
        if config.llm is None
        else {
            "endpoint": config.llm.endpoint,
            "model": config.llm.model,
            "temperature": config.llm.temperature,
            "max_tokens": config.llm.max_tokens,
            "timeout": config.llm.timeout,
        },
        "engine": {
            "k": config.k,
            "budget_chars": config.budget_chars,
            "attribution": config.attribution,
        },
        "paths": {"index_dir": config.index_dir, "gold": config.gold_path},
    }
