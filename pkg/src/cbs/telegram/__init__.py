"""Telegram deployment: Bot API client, service loop and a local mock server."""

from cbs.telegram.adapter import ChatChannel, TelegramChannel, run_loop
from cbs.telegram.client import (
    AdapterConfig,
    AuthError,
    BotUpdate,
    OutboundMessage,
    TelegramClient,
    chunk_text,
    poll_updates,
    send_message,
)

__all__ = [
    "AdapterConfig",
    "AuthError",
    "BotUpdate",
    "ChatChannel",
    "OutboundMessage",
    "TelegramChannel",
    "TelegramClient",
    "chunk_text",
    "poll_updates",
    "run_loop",
    "send_message",
]
