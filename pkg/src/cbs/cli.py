"""Command line: ``cbs kb validate``, ``cbs query``, ``cbs chat``, ``cbs serve``.

Exit status is 0 on success, 1 for domain errors (invalid knowledge base,
fatal API error) and 2 for usage or environment errors.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
import os
import signal
import sys
import threading
from dataclasses import asdict
from pathlib import Path

import click

from cbs import __version__
from cbs.config import ConfigError, MissingTokenError, load_app_config
from cbs.engine import Engine, EngineConfig
from cbs.kb_store import ERROR, KBError, KnowledgeBase, read_kb, validate_kb
from cbs.matcher import DEFAULT_MAX_RESULTS, DEFAULT_MIN_SCORE, MatchConfig, search
from cbs.telegram.adapter import TelegramChannel, run_loop
from cbs.telegram.client import AuthError, TelegramClient
from cbs.text_pipeline import StopwordList, keywords_from_utterance

logger = logging.getLogger("cbs")

_RECORD_FIELDS = set(vars(logging.makeLogRecord({}))) | {"message", "asctime"}


class JsonLineFormatter(logging.Formatter):
    """One JSON object per line; ``extra=`` fields become top-level keys."""

    def format(self, record: logging.LogRecord) -> str:
        out = {
            "ts": dt.datetime.fromtimestamp(record.created, dt.timezone.utc).isoformat(timespec="milliseconds"),
            "level": record.levelname.lower(),
            "logger": record.name,
            "msg": record.getMessage(),
        }
        for key, value in vars(record).items():
            if key not in _RECORD_FIELDS and not key.startswith("_"):
                out[key] = value
        return json.dumps(out, ensure_ascii=False, default=str)


def setup_logging(level: str = "INFO") -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonLineFormatter())
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level.upper())


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        _fail(f"cannot read {path}: {exc.strerror or exc}", 2)
        raise  # unreachable


def _load_valid_kb(path: str) -> KnowledgeBase:
    data = _read_bytes(path)
    try:
        kb = read_kb(data)
    except KBError as exc:
        for diag in exc.diagnostics:
            click.echo(str(diag), err=True)
        sys.exit(1)
    diags = validate_kb(kb)
    if any(d.severity == ERROR for d in diags):
        for diag in diags:
            click.echo(str(diag), err=True)
        sys.exit(1)
    return kb


def _load_stopwords(path: str | None) -> StopwordList:
    if path is None:
        return StopwordList.default()
    try:
        return StopwordList.from_file(path)
    except OSError as exc:
        _fail(f"cannot read {path}: {exc.strerror or exc}", 2)
    except ValueError as exc:
        _fail(str(exc), 2)
    raise AssertionError("unreachable")


_min_score_opt = click.option(
    "--min-score",
    type=click.FloatRange(0.0, 1.0, min_open=True),
    default=DEFAULT_MIN_SCORE,
    show_default=True,
    help="Lowest coverage score that counts as a match.",
)
_max_results_opt = click.option(
    "--max-results", type=click.IntRange(min=1), default=DEFAULT_MAX_RESULTS, show_default=True
)
_stopwords_opt = click.option(
    "--stopwords", "stopwords_path", type=click.Path(dir_okay=False), help="Stopword file (one word per line)."
)


@click.group()
@click.version_option(__version__, prog_name="cbs")
def main() -> None:
    """Information-security advice chatbot."""


@main.group("kb")
def kb_group() -> None:
    """Knowledge-base tools."""


@kb_group.command("validate")
@click.argument("path")
def kb_validate(path: str) -> None:
    """Check a knowledge-base file and list every problem found."""
    data = _read_bytes(path)
    try:
        kb = read_kb(data)
    except KBError as exc:
        for diag in exc.diagnostics:
            click.echo(str(diag))
        sys.exit(1)
    diags = validate_kb(kb)
    for diag in diags:
        click.echo(str(diag))
    errors = sum(d.severity == ERROR for d in diags)
    if errors:
        sys.exit(1)
    summary = f"OK: {len(kb.topics)} topics, {kb.entry_count} entries"
    warnings = len(diags)
    if warnings:
        summary += f" ({warnings} warning{'s' if warnings > 1 else ''})"
    click.echo(summary)


@main.command("query")
@click.argument("path")
@click.argument("utterance")
@_min_score_opt
@_max_results_opt
@click.option("--show-score", is_flag=True, help="Also list which trigger keywords each match hit.")
@_stopwords_opt
def query_cmd(
    path: str,
    utterance: str,
    min_score: float,
    max_results: int,
    show_score: bool,
    stopwords_path: str | None,
) -> None:
    """Answer one question and show how the answer was chosen."""
    kb = _load_valid_kb(path)
    stops = _load_stopwords(stopwords_path)
    cfg = EngineConfig(match=MatchConfig(min_score, max_results), cache_enabled=False)
    engine = Engine(kb, stops, cfg)

    query = keywords_from_utterance(utterance, stops)
    matches = search(engine.index, kb, query, cfg.match)
    click.echo(f"keywords: {' '.join(query.keywords) or '(none)'}")
    if matches:
        click.echo("matches:")
        for rank, m in enumerate(matches, 1):
            click.echo(f"  {rank}. {m.entry_id} [{m.topic_name}] {m.score:.3f}")
            if show_score:
                entry = kb.entry(m.entry_id)
                hit = [w for w in entry.keywords if w in query.keywords]
                missed = [w for w in entry.keywords if w not in query.keywords]
                click.echo(f"     hit: {' '.join(hit)}; missed: {' '.join(missed) or '-'}")
    else:
        click.echo("matches: (none)")
    click.echo("")
    click.echo(engine.handle_request(utterance).text)


def _print_stats(engine: Engine) -> None:
    m = engine.metrics()
    click.echo(f"requests: {m.requests}")
    click.echo(f"cache_hits: {m.cache_hits}")
    click.echo(f"searches: {m.searches}")
    click.echo(f"entries_scored: {m.entries_scored}")
    click.echo(f"fallbacks: {m.fallbacks}")
    cs = engine.cache_stats()
    if cs is not None:
        click.echo(
            f"cache: hits={cs.hits} misses={cs.misses} evictions={cs.evictions} "
            f"size={cs.size} capacity={cs.capacity}"
        )


@main.command("chat")
@click.argument("path")
@_min_score_opt
@_max_results_opt
@_stopwords_opt
def chat_cmd(path: str, min_score: float, max_results: int, stopwords_path: str | None) -> None:
    """Chat with the bot in the terminal. ':stats' shows counters, ':quit' leaves."""
    kb = _load_valid_kb(path)
    engine = Engine(kb, _load_stopwords(stopwords_path), EngineConfig(match=MatchConfig(min_score, max_results)))
    stdin = click.get_text_stream("stdin")
    interactive = stdin.isatty()
    if interactive:
        click.echo(f"CBS security adviser. Topics: {', '.join(engine.topic_names())}. ':quit' to leave.")
    while True:
        if interactive:
            click.echo("> ", nl=False)
        line = stdin.readline()
        if not line:
            break
        line = line.strip()
        if not line:
            continue
        if line == ":quit":
            break
        if line == ":stats":
            _print_stats(engine)
            continue
        click.echo(engine.handle_request(line).text)
        click.echo("")


def _metrics_reporter(engine: Engine, interval: float, stop: threading.Event) -> None:
    while not stop.wait(interval):
        cs = engine.cache_stats()
        logger.info(
            "metrics",
            extra={
                "metrics": asdict(engine.metrics()),
                "cache_stats": asdict(cs) if cs is not None else None,
            },
        )


@main.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False))
@click.option("--log-level", default="INFO", show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False))
def serve_cmd(config_path: str, log_level: str) -> None:
    """Run the Telegram bot. The token comes from CBS_TELEGRAM_TOKEN."""
    setup_logging(log_level)
    try:
        cfg = load_app_config(config_path, os.environ)
    except OSError as exc:
        _fail(f"cannot read {config_path}: {exc.strerror or exc}", 2)
    except ConfigError as exc:
        for diag in exc.diagnostics:
            click.echo(str(diag), err=True)
        sys.exit(2)
    except MissingTokenError as exc:
        _fail(str(exc), 2)

    kb = _load_valid_kb(str(cfg.kb_path))
    engine = Engine(kb, _load_stopwords(str(cfg.stopwords_path) if cfg.stopwords_path else None), cfg.engine)

    stop = threading.Event()

    def on_signal(signum: int, _frame: object) -> None:
        logger.info("shutdown requested", extra={"signal": signal.Signals(signum).name})
        stop.set()

    signal.signal(signal.SIGINT, on_signal)
    signal.signal(signal.SIGTERM, on_signal)

    client = TelegramClient(cfg.adapter)
    reporter = threading.Thread(
        target=_metrics_reporter, args=(engine, cfg.metrics_interval, stop), daemon=True
    )
    reporter.start()
    logger.info("serving", extra={"config": cfg.to_dict(), "topics": engine.topic_names()})
    try:
        run_loop(engine, TelegramChannel(client, stop), stop)
    except AuthError as exc:
        logger.error("fatal: %s", exc)
        sys.exit(1)
    finally:
        stop.set()
        client.close()
    logger.info("stopped", extra={"metrics": asdict(engine.metrics())})


if __name__ == "__main__":
    main()
