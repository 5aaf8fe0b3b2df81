"""Chat-channel boundary and the receive -> answer -> send service loop."""

from __future__ import annotations

import logging
import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from typing import Protocol

from cbs.engine import Engine
from cbs.telegram.client import (
    AuthError,
    BotUpdate,
    TelegramClient,
    TelegramError,
    outbound_messages,
    poll_updates,
    send_message,
)

logger = logging.getLogger(__name__)

NON_TEXT_NOTICE = "I only understand text. Please type your question."


class ChatChannel(Protocol):
    """What the service loop needs from a messaging platform."""

    def receive_batch(self) -> list[BotUpdate]: ...

    def acknowledge(self, update_id: int) -> None: ...

    def send_text(self, chat_id: int, text: str, reply_to: int | None = None) -> None: ...

    def close(self) -> None: ...


class TelegramChannel:
    """Long-polling Telegram channel that owns the update offset."""

    def __init__(self, client: TelegramClient, stop: threading.Event | None = None) -> None:
        self.client = client
        self.stop = stop or threading.Event()
        self.offset = 0
        self._confirmed = 0

    def receive_batch(self) -> list[BotUpdate]:
        updates = poll_updates(self.client, self.offset, self.client.config.poll_timeout, self.stop)
        self._confirmed = self.offset
        return updates

    def acknowledge(self, update_id: int) -> None:
        self.offset = max(self.offset, update_id + 1)

    def send_text(self, chat_id: int, text: str, reply_to: int | None = None) -> None:
        for msg in outbound_messages(chat_id, text, reply_to):
            send_message(self.client, msg)

    def close(self) -> None:
        # Telegram only forgets updates once a later getUpdates carries the
        # new offset; without this a restart would answer the last batch twice.
        if self.offset > self._confirmed:
            try:
                self.client.call("getUpdates", {"offset": self.offset, "timeout": 0}, timeout=10)
                self._confirmed = self.offset
            except TelegramError as exc:
                logger.warning("could not confirm offset %d: %s", self.offset, exc)


def greeting(engine: Engine) -> str:
    topics = ", ".join(engine.topic_names())
    return (
        "Hello! I give information-security advice. "
        f"Ask me a question in plain words. Topics I know about: {topics}."
    )


def _is_start_command(text: str) -> bool:
    words = text.split()
    return bool(words) and words[0].split("@", 1)[0] in ("/start", "/help")


def reply_text_for(engine: Engine, update: BotUpdate) -> str:
    if update.text is None:
        return NON_TEXT_NOTICE
    if _is_start_command(update.text):
        return greeting(engine)
    outcome = engine.process(update.text)
    logger.info(
        "reply",
        extra={
            "chat_id": update.chat_id,
            "keywords": list(outcome.keywords.keywords),
            "cache": "hit" if outcome.cache_hit else "miss",
            "kind": outcome.reply.kind.value,
        },
    )
    return outcome.reply.text


def _answer_chat(engine: Engine, channel: ChatChannel, updates: list[BotUpdate]) -> None:
    for update in updates:
        text = reply_text_for(engine, update)
        try:
            channel.send_text(update.chat_id, text, update.message_id)
        except AuthError:
            raise
        except TelegramError as exc:
            logger.error("reply to chat %s lost: %s", update.chat_id, exc)


def dispatch_batch(engine: Engine, channel: ChatChannel, updates: list[BotUpdate], pool: ThreadPoolExecutor) -> None:
    """Answer one batch: chats in parallel, each chat's messages in order."""
    by_chat: OrderedDict[int, list[BotUpdate]] = OrderedDict()
    for update in updates:
        if update.chat_id is not None:
            by_chat.setdefault(update.chat_id, []).append(update)
    futures = [pool.submit(_answer_chat, engine, channel, items) for items in by_chat.values()]
    for future in futures:
        future.result()


def run_loop(
    engine: Engine,
    channel: ChatChannel,
    stop: threading.Event | None = None,
    max_workers: int = 4,
) -> None:
    """Serve until ``stop`` is set. The batch in flight is always finished.

    The offset moves past a batch only after every reply in it was handed
    to the channel. :class:`AuthError` propagates to the caller.
    """
    stop = stop or threading.Event()
    with ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="cbs-chat") as pool:
        try:
            while not stop.is_set():
                updates = channel.receive_batch()
                if not updates:
                    continue
                dispatch_batch(engine, channel, updates, pool)
                channel.acknowledge(max(u.update_id for u in updates))
        finally:
            channel.close()
