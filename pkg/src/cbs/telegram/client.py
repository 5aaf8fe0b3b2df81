"""Minimal Telegram Bot API client: getUpdates long polling and sendMessage."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import requests

logger = logging.getLogger(__name__)

DEFAULT_API_BASE_URL = "https://api.telegram.org"
MAX_MESSAGE_LENGTH = 4096
DEFAULT_BACKOFF = (1.0, 2.0, 4.0, 8.0, 16.0, 30.0)
MAX_RATE_LIMIT_RETRIES = 10

# Loggers that print request URLs, which carry the bot token.
_URL_LOGGERS = ("urllib3.connectionpool", "urllib3.util.retry", "urllib3.poolmanager", "requests")


class TelegramError(Exception):
    pass


class AuthError(TelegramError):
    """The API rejected the bot token. Fatal."""


class TransportError(TelegramError):
    """Network failure or 5xx reply; safe to retry."""


class RateLimited(TelegramError):
    def __init__(self, message: str, retry_after: float) -> None:
        super().__init__(message)
        self.retry_after = retry_after


class ChatNotFound(TelegramError):
    pass


class MalformedResponse(TelegramError):
    pass


class APIError(TelegramError):
    def __init__(self, message: str, error_code: int) -> None:
        super().__init__(message)
        self.error_code = error_code


@dataclass(frozen=True)
class AdapterConfig:
    token: str = field(repr=False)
    api_base_url: str = DEFAULT_API_BASE_URL
    poll_timeout: float = 30.0
    retry_backoff: tuple[float, ...] = DEFAULT_BACKOFF

    def __post_init__(self) -> None:
        if not self.retry_backoff:
            raise ValueError("retry_backoff needs at least one delay")
        if self.poll_timeout < 0:
            raise ValueError("poll_timeout must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        # The token is deliberately left out.
        return {
            "api_base_url": self.api_base_url,
            "poll_timeout_seconds": self.poll_timeout,
            "retry_backoff_seconds": list(self.retry_backoff),
        }

    def backoff(self, attempt: int) -> float:
        return self.retry_backoff[min(attempt, len(self.retry_backoff) - 1)]


@dataclass(frozen=True)
class BotUpdate:
    update_id: int
    chat_id: int | None
    text: str | None
    sender_id: int | None = None
    message_id: int | None = None


def utf16_len(text: str) -> int:
    return len(text.encode("utf-16-le")) // 2


@dataclass(frozen=True)
class OutboundMessage:
    chat_id: int
    text: str
    reply_to: int | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("message text must be non-empty")
        if utf16_len(self.text) > MAX_MESSAGE_LENGTH:
            raise ValueError("message text exceeds the 4096-character limit; use chunk_text")


def chunk_text(text: str, limit: int = MAX_MESSAGE_LENGTH) -> list[str]:
    """Split ``text`` into pieces of at most ``limit`` UTF-16 units.

    Splits happen at newlines (which are dropped); a single line longer than
    the limit is cut at character boundaries. Blank pieces are skipped.
    """
    chunks: list[str] = []
    current: list[str] = []
    size = 0
    for line in text.split("\n"):
        width = utf16_len(line)
        if current and size + 1 + width <= limit:
            current.append(line)
            size += 1 + width
            continue
        if current:
            chunks.append("\n".join(current))
            current, size = [], 0
        if width <= limit:
            current, size = [line], width
            continue
        piece, piece_size = [], 0
        for ch in line:
            w = 2 if ord(ch) > 0xFFFF else 1
            if piece_size + w > limit:
                chunks.append("".join(piece))
                piece, piece_size = [], 0
            piece.append(ch)
            piece_size += w
        current, size = ["".join(piece)], piece_size
    if current:
        chunks.append("\n".join(current))
    return [c for c in chunks if c.strip()]


def outbound_messages(chat_id: int, text: str, reply_to: int | None = None) -> list[OutboundMessage]:
    chunks = chunk_text(text)
    return [OutboundMessage(chat_id, c, reply_to if i == 0 else None) for i, c in enumerate(chunks)]


class _Redactor(logging.Filter):
    def __init__(self, secret: str) -> None:
        super().__init__()
        self.secret = secret

    def filter(self, record: logging.LogRecord) -> bool:
        msg = record.getMessage()
        if self.secret in msg:
            record.msg = msg.replace(self.secret, "***")
            record.args = None
        return True


class TelegramClient:
    """One HTTP call per :meth:`call`; retry policy lives in the module functions."""

    def __init__(
        self,
        config: AdapterConfig,
        session: requests.Session | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if not config.token:
            raise AuthError("empty bot token")
        self.config = config
        self.session = session or requests.Session()
        self.sleep = sleep
        self._redactor = _Redactor(config.token)
        for name in _URL_LOGGERS:
            logging.getLogger(name).addFilter(self._redactor)

    def close(self) -> None:
        for name in _URL_LOGGERS:
            logging.getLogger(name).removeFilter(self._redactor)
        self.session.close()

    def redact(self, text: str) -> str:
        return text.replace(self.config.token, "***")

    def call(self, method: str, params: dict[str, Any], timeout: float = 30.0) -> Any:
        url = f"{self.config.api_base_url.rstrip('/')}/bot{self.config.token}/{method}"
        try:
            if method == "getUpdates":
                resp = self.session.get(url, params=params, timeout=timeout)
            else:
                resp = self.session.post(url, json=params, timeout=timeout)
        except requests.RequestException as exc:
            raise TransportError(f"{method}: {self.redact(str(exc))}") from None

        try:
            body = resp.json()
        except ValueError:
            if resp.status_code >= 500:
                raise TransportError(f"{method}: HTTP {resp.status_code}") from None
            raise MalformedResponse(f"{method}: response is not JSON (HTTP {resp.status_code})") from None
        if not isinstance(body, dict) or not isinstance(body.get("ok"), bool):
            raise MalformedResponse(f"{method}: response lacks the ok envelope")
        if body["ok"]:
            if "result" not in body:
                raise MalformedResponse(f"{method}: ok response without result")
            return body["result"]

        code = body.get("error_code", resp.status_code)
        description = self.redact(str(body.get("description", "")))
        message = f"{method}: {code} {description}".strip()
        if code in (401, 404):
            raise AuthError(f"{message} (check the bot token in CBS_TELEGRAM_TOKEN)")
        if code == 429:
            params_ = body.get("parameters") or {}
            retry_after = params_.get("retry_after", 1) if isinstance(params_, dict) else 1
            raise RateLimited(message, float(retry_after))
        if code == 400 and "chat not found" in description.lower():
            raise ChatNotFound(message)
        if isinstance(code, int) and code >= 500:
            raise TransportError(message)
        raise APIError(message, code if isinstance(code, int) else resp.status_code)


def parse_update(raw: Any) -> BotUpdate:
    if not isinstance(raw, dict) or type(raw.get("update_id")) is not int:
        raise MalformedResponse("update without integer update_id")
    message = raw.get("message")
    if message is None:
        return BotUpdate(raw["update_id"], None, None)
    try:
        chat_id = message["chat"]["id"]
        sender = message.get("from") or {}
        sender_id = sender.get("id", chat_id)
        text = message.get("text")
        message_id = message.get("message_id")
    except (TypeError, KeyError, AttributeError):
        raise MalformedResponse("message without chat id") from None
    if type(chat_id) is not int:
        raise MalformedResponse("non-integer chat id")
    return BotUpdate(
        raw["update_id"],
        chat_id,
        text if isinstance(text, str) else None,
        sender_id if type(sender_id) is int else None,
        message_id if type(message_id) is int else None,
    )


def poll_updates(
    client: TelegramClient,
    offset: int,
    timeout: float,
    stop: threading.Event | None = None,
) -> list[BotUpdate]:
    """Long-poll for updates with ``update_id >= offset``, ascending.

    Transport failures and rate limits are retried with backoff until they
    succeed or ``stop`` is set. A malformed reply discards the whole batch;
    the caller keeps its offset so the updates come back on the next poll.
    """
    attempt = 0
    while True:
        try:
            result = client.call(
                "getUpdates", {"offset": offset, "timeout": int(timeout)}, timeout=timeout + 10
            )
            if not isinstance(result, list):
                raise MalformedResponse("getUpdates result is not an array")
            updates = [parse_update(raw) for raw in result]
        except (TransportError, RateLimited) as exc:
            delay = exc.retry_after if isinstance(exc, RateLimited) else client.config.backoff(attempt)
            attempt += 1
            logger.warning("getUpdates failed (%s); retrying in %.1fs", exc, delay)
            if _wait(client, delay, stop):
                return []
            continue
        except (MalformedResponse, APIError) as exc:
            logger.error("discarding getUpdates batch: %s", exc)
            _wait(client, client.config.backoff(0), stop)
            return []
        return sorted((u for u in updates if u.update_id >= offset), key=lambda u: u.update_id)


def _wait(client: TelegramClient, delay: float, stop: threading.Event | None) -> bool:
    """Sleep ``delay`` seconds; True if ``stop`` fired meanwhile."""
    if stop is None:
        client.sleep(delay)
        return False
    return stop.wait(delay)


def send_message(client: TelegramClient, msg: OutboundMessage) -> int | None:
    """Deliver one message and return its id, or None if the chat is gone.

    429 replies are retried after the server's ``retry_after``. Transport
    errors are retried once per backoff step, then raised.
    """
    params: dict[str, Any] = {"chat_id": msg.chat_id, "text": msg.text}
    if msg.reply_to is not None:
        params["reply_to_message_id"] = msg.reply_to
    attempt = 0
    rate_limited = 0
    while True:
        try:
            result = client.call("sendMessage", params)
        except RateLimited as exc:
            rate_limited += 1
            if rate_limited > MAX_RATE_LIMIT_RETRIES:
                raise
            logger.warning("sendMessage rate-limited; retrying in %.1fs", exc.retry_after)
            client.sleep(exc.retry_after)
            continue
        except ChatNotFound:
            logger.warning("dropping reply: chat %s not found", msg.chat_id)
            return None
        except TransportError as exc:
            if attempt >= len(client.config.retry_backoff):
                raise
            delay = client.config.backoff(attempt)
            attempt += 1
            logger.warning("sendMessage failed (%s); retrying in %.1fs", exc, delay)
            client.sleep(delay)
            continue
        if not isinstance(result, dict) or type(result.get("message_id")) is not int:
            raise MalformedResponse("sendMessage result lacks message_id")
        return result["message_id"]
