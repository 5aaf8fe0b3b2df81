"""Service configuration file (JSON, same strict reader as the KB).

Example::

    {
      "kb_path": "security_kb.json",
      "stopwords_path": null,
      "engine": {"min_score": 0.34, "max_results": 3, "cache_capacity": 1024,
                 "cache_ttl_seconds": 86400, "fallback_text": "..."},
      "adapter": {"api_base_url": "https://api.telegram.org",
                  "poll_timeout_seconds": 30, "retry_backoff_seconds": [1, 2, 4, 8, 16, 30]},
      "metrics_interval_seconds": 60
    }

Relative paths resolve against the config file's directory. The bot token
is read from the ``CBS_TELEGRAM_TOKEN`` environment variable only.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from cbs.engine import DEFAULT_FALLBACK_TEXT, EngineConfig
from cbs.kb_store import ERROR, Diagnostic, KBError, SchemaReader, load_json_document, sort_diagnostics
from cbs.matcher import DEFAULT_MAX_RESULTS, DEFAULT_MIN_SCORE, MatchConfig
from cbs.reply_cache import DEFAULT_CAPACITY, DEFAULT_TTL
from cbs.telegram.client import DEFAULT_API_BASE_URL, DEFAULT_BACKOFF, AdapterConfig

TOKEN_ENV_VAR = "CBS_TELEGRAM_TOKEN"
DEFAULT_METRICS_INTERVAL = 60.0

_ENGINE_KEYS = {"min_score", "max_results", "cache_capacity", "cache_ttl_seconds", "fallback_text"}
_ADAPTER_KEYS = {"api_base_url", "poll_timeout_seconds", "retry_backoff_seconds"}


class ConfigError(KBError):
    pass


class MissingTokenError(Exception):
    pass


@dataclass(frozen=True)
class AppConfig:
    kb_path: Path
    stopwords_path: Path | None
    engine: EngineConfig
    adapter: AdapterConfig
    metrics_interval: float = DEFAULT_METRICS_INTERVAL

    def to_dict(self) -> dict[str, Any]:
        return {
            "kb_path": str(self.kb_path),
            "stopwords_path": str(self.stopwords_path) if self.stopwords_path else None,
            "engine": {
                "min_score": self.engine.match.min_score,
                "max_results": self.engine.match.max_results,
                "cache_capacity": self.engine.cache_capacity,
                "cache_ttl_seconds": self.engine.cache_ttl,
                "fallback_text": self.engine.fallback_text,
            },
            "adapter": self.adapter.to_dict(),
            "metrics_interval_seconds": self.metrics_interval,
        }


def load_app_config(path: str | Path, environ: Mapping[str, str]) -> AppConfig:
    """Read and check a config file; raise ConfigError or MissingTokenError."""
    path = Path(path)
    data = load_json_document(path.read_bytes())
    reader = SchemaReader()
    if isinstance(data, dict):
        _reject_secrets(reader, data, "$")
    root = reader.obj(
        data, "$", {"kb_path"}, {"stopwords_path", "engine", "adapter", "metrics_interval_seconds"}
    ) or {}
    base = path.parent

    kb_path = _path(reader, root.get("kb_path"), "$.kb_path", base)
    stopwords_path = None
    if root.get("stopwords_path") is not None:
        stopwords_path = _path(reader, root["stopwords_path"], "$.stopwords_path", base)

    eng = reader.obj(root.get("engine", {}), "$.engine", set(), _ENGINE_KEYS) or {}
    min_score = _number(reader, eng, "min_score", "$.engine", DEFAULT_MIN_SCORE)
    max_results = _number(reader, eng, "max_results", "$.engine", DEFAULT_MAX_RESULTS, integer=True)
    capacity = _number(reader, eng, "cache_capacity", "$.engine", DEFAULT_CAPACITY, integer=True)
    ttl = _number(reader, eng, "cache_ttl_seconds", "$.engine", DEFAULT_TTL)
    fallback = eng.get("fallback_text", DEFAULT_FALLBACK_TEXT)
    if reader.typed(fallback, "$.engine.fallback_text", str, "string") is not None and not fallback:
        reader.error("$.engine.fallback_text", "fallback_text must be non-empty")

    ad = reader.obj(root.get("adapter", {}), "$.adapter", set(), _ADAPTER_KEYS) or {}
    base_url = ad.get("api_base_url", DEFAULT_API_BASE_URL)
    reader.typed(base_url, "$.adapter.api_base_url", str, "string")
    poll_timeout = _number(reader, ad, "poll_timeout_seconds", "$.adapter", 30.0)
    backoff = ad.get("retry_backoff_seconds", list(DEFAULT_BACKOFF))
    if reader.typed(backoff, "$.adapter.retry_backoff_seconds", list, "array") is not None:
        if not backoff:
            reader.error("$.adapter.retry_backoff_seconds", "needs at least one delay")
        for k, delay in enumerate(backoff):
            if reader.typed(delay, f"$.adapter.retry_backoff_seconds[{k}]", (int, float), "number") is not None and delay < 0:
                reader.error(f"$.adapter.retry_backoff_seconds[{k}]", "delay must be >= 0")
    metrics_interval = _number(reader, root, "metrics_interval_seconds", "$", DEFAULT_METRICS_INTERVAL)

    engine_cfg = adapter_cfg = None
    if not reader.diagnostics:
        try:
            engine_cfg = EngineConfig(
                match=MatchConfig(min_score=float(min_score), max_results=int(max_results)),
                cache_capacity=int(capacity),
                cache_ttl=float(ttl),
                fallback_text=fallback,
            )
        except ValueError as exc:
            reader.error("$.engine", str(exc))
        if capacity < 1:
            reader.error("$.engine.cache_capacity", "cache_capacity must be >= 1")
        if poll_timeout < 0:
            reader.error("$.adapter.poll_timeout_seconds", "must be >= 0")
        if metrics_interval <= 0:
            reader.error("$.metrics_interval_seconds", "must be > 0")
    if reader.diagnostics:
        raise ConfigError(sort_diagnostics(reader.diagnostics))

    token = environ.get(TOKEN_ENV_VAR, "")
    if not token:
        raise MissingTokenError(f"set the {TOKEN_ENV_VAR} environment variable to the bot token")
    adapter_cfg = AdapterConfig(
        token=token,
        api_base_url=base_url,
        poll_timeout=float(poll_timeout),
        retry_backoff=tuple(float(d) for d in backoff),
    )
    return AppConfig(kb_path, stopwords_path, engine_cfg, adapter_cfg, float(metrics_interval))


def _reject_secrets(reader: SchemaReader, obj: Any, path: str) -> None:
    if isinstance(obj, dict):
        for key, value in obj.items():
            if key.lower() in ("token", "bot_token"):
                reader.diagnostics.append(
                    Diagnostic(ERROR, f"{path}.{key}", f"secrets are not read from the config file; use {TOKEN_ENV_VAR}")
                )
            else:
                _reject_secrets(reader, value, f"{path}.{key}")


def _path(reader: SchemaReader, value: Any, where: str, base: Path) -> Path | None:
    if reader.typed(value, where, str, "string") is None:
        return None
    p = Path(value)
    p = p if p.is_absolute() else base / p
    if not p.is_file():
        reader.error(where, f"file not found: {value}")
    return p


def _number(reader: SchemaReader, obj: dict, key: str, where: str, default: float, integer: bool = False) -> float:
    value = obj.get(key, default)
    expected = int if integer else (int, float)
    checked = reader.typed(value, f"{where}.{key}", expected, "integer" if integer else "number")
    return default if checked is None else checked
