"""Local stand-in for the Telegram Bot API (getUpdates and sendMessage only).

Used by the conformance tests and for offline demos::

    with MockTelegramServer(token="123:abc") as server:
        server.push_text(chat_id=42, text="how do I pick a password")
        ...  # point AdapterConfig.api_base_url at server.base_url
        server.wait_for_sent(1)

Faults can be queued per method with :meth:`MockTelegramServer.inject`.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any
from urllib.parse import parse_qs, urlsplit

from cbs.telegram.client import MAX_MESSAGE_LENGTH, utf16_len


@dataclass(frozen=True)
class Fault:
    """A scripted misbehaviour, consumed by the next call of one method."""

    kind: str
    retry_after: int = 1
    status: int = 500
    description: str = "Internal Server Error"

    @classmethod
    def rate_limit(cls, retry_after: int = 1) -> "Fault":
        return cls("rate_limit", retry_after=retry_after)

    @classmethod
    def error(cls, status: int, description: str) -> "Fault":
        return cls("error", status=status, description=description)

    @classmethod
    def malformed(cls) -> "Fault":
        return cls("malformed")

    @classmethod
    def disconnect(cls) -> "Fault":
        return cls("disconnect")


@dataclass(frozen=True)
class SentMessage:
    message_id: int
    chat_id: int
    text: str
    reply_to_message_id: int | None
    at: float


@dataclass(frozen=True)
class PollRecord:
    offset: int
    timeout: int
    returned: tuple[int, ...]
    at: float


class MockTelegramServer:
    def __init__(self, token: str, host: str = "127.0.0.1", port: int = 0) -> None:
        self.token = token
        self._cond = threading.Condition()
        self._pending: list[dict[str, Any]] = []
        self._next_update_id = 1
        self._next_message_id = 1
        self._faults: dict[str, deque[Fault]] = {}
        self.sent: list[SentMessage] = []
        self.polls: list[PollRecord] = []
        self.send_attempts: list[float] = []
        self.missing_chats: set[int] = set()
        self._closing = False
        self._httpd = ThreadingHTTPServer((host, port), _make_handler(self))
        self._httpd.daemon_threads = True
        self._thread: threading.Thread | None = None

    # -- lifecycle --

    @property
    def base_url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockTelegramServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        with self._cond:
            self._closing = True
            self._cond.notify_all()
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self) -> "MockTelegramServer":
        return self.start()

    def __exit__(self, *exc: object) -> None:
        self.stop()

    # -- scripting --

    def push_update(self, update: dict[str, Any]) -> int:
        with self._cond:
            if "update_id" not in update:
                update = {"update_id": self._next_update_id, **update}
            self._next_update_id = max(self._next_update_id, update["update_id"] + 1)
            self._pending.append(update)
            self._pending.sort(key=lambda u: u["update_id"])
            self._cond.notify_all()
            return update["update_id"]

    def push_text(self, chat_id: int, text: str, sender_id: int | None = None) -> int:
        return self.push_update({"message": self._message(chat_id, sender_id, text=text)})

    def push_sticker(self, chat_id: int) -> int:
        return self.push_update({"message": self._message(chat_id, None, sticker={"file_id": "stk"})})

    def _message(self, chat_id: int, sender_id: int | None, **content: Any) -> dict[str, Any]:
        with self._cond:
            mid = self._next_message_id
            self._next_message_id += 1
        sender = sender_id if sender_id is not None else chat_id
        return {
            "message_id": mid,
            "date": int(time.time()),
            "chat": {"id": chat_id, "type": "private"},
            "from": {"id": sender, "is_bot": False, "first_name": "user"},
            **content,
        }

    def inject(self, method: str, *faults: Fault) -> None:
        with self._cond:
            self._faults.setdefault(method, deque()).extend(faults)

    def pending_ids(self) -> list[int]:
        with self._cond:
            return [u["update_id"] for u in self._pending]

    def wait_for_sent(self, count: int, timeout: float = 10.0) -> list[SentMessage]:
        deadline = time.monotonic() + timeout
        with self._cond:
            while len(self.sent) < count:
                left = deadline - time.monotonic()
                if left <= 0:
                    raise TimeoutError(f"only {len(self.sent)} of {count} messages sent")
                self._cond.wait(left)
            return list(self.sent)

    def wait_for_polls(self, count: int, timeout: float = 10.0) -> list[PollRecord]:
        deadline = time.monotonic() + timeout
        with self._cond:
            while len(self.polls) < count:
                left = deadline - time.monotonic()
                if left <= 0:
                    raise TimeoutError(f"only {len(self.polls)} of {count} polls seen")
                self._cond.wait(left)
            return list(self.polls)

    # -- request handling --

    def _take_fault(self, method: str) -> Fault | None:
        with self._cond:
            queue = self._faults.get(method)
            return queue.popleft() if queue else None

    def handle(self, method: str, params: dict[str, Any]) -> tuple[int, Any]:
        """Return (HTTP status, JSON body); body None means drop the connection."""
        if method == "sendMessage":
            with self._cond:
                self.send_attempts.append(time.monotonic())
        fault = self._take_fault(method)
        if fault is not None:
            if fault.kind == "rate_limit":
                return 429, {
                    "ok": False,
                    "error_code": 429,
                    "description": f"Too Many Requests: retry after {fault.retry_after}",
                    "parameters": {"retry_after": fault.retry_after},
                }
            if fault.kind == "error":
                return fault.status, {"ok": False, "error_code": fault.status, "description": fault.description}
            if fault.kind == "malformed":
                return 200, "<html>bad gateway</html>"
            return 0, None
        if method == "getUpdates":
            return self._get_updates(params)
        if method == "sendMessage":
            return self._send_message(params)
        return 404, {"ok": False, "error_code": 404, "description": "Not Found"}

    def _get_updates(self, params: dict[str, Any]) -> tuple[int, Any]:
        try:
            offset = int(params.get("offset", 0))
            timeout = int(params.get("timeout", 0))
        except (TypeError, ValueError):
            return 400, {"ok": False, "error_code": 400, "description": "Bad Request: wrong parameter"}
        deadline = time.monotonic() + max(timeout, 0)
        with self._cond:
            if offset > 0:
                self._pending = [u for u in self._pending if u["update_id"] >= offset]
            while not self._closing:
                ready = [u for u in self._pending if u["update_id"] >= offset]
                left = deadline - time.monotonic()
                if ready or left <= 0:
                    break
                self._cond.wait(left)
            ready = [u for u in self._pending if u["update_id"] >= offset][:100]
            self.polls.append(PollRecord(offset, timeout, tuple(u["update_id"] for u in ready), time.monotonic()))
            self._cond.notify_all()
        return 200, {"ok": True, "result": ready}

    def _send_message(self, params: dict[str, Any]) -> tuple[int, Any]:
        def bad(description: str) -> tuple[int, Any]:
            return 400, {"ok": False, "error_code": 400, "description": f"Bad Request: {description}"}

        try:
            chat_id = int(params["chat_id"])
        except (KeyError, TypeError, ValueError):
            return bad("chat_id is empty")
        text = params.get("text")
        if not isinstance(text, str) or not text.strip():
            return bad("message text is empty")
        if utf16_len(text) > MAX_MESSAGE_LENGTH:
            return bad("message is too long")
        if chat_id in self.missing_chats:
            return bad("chat not found")
        reply_to = params.get("reply_to_message_id")
        with self._cond:
            mid = self._next_message_id
            self._next_message_id += 1
            msg = SentMessage(mid, chat_id, text, int(reply_to) if reply_to is not None else None, time.monotonic())
            self.sent.append(msg)
            self._cond.notify_all()
        return 200, {
            "ok": True,
            "result": {
                "message_id": mid,
                "date": int(time.time()),
                "chat": {"id": chat_id, "type": "private"},
                "text": text,
            },
        }


def _make_handler(server: MockTelegramServer) -> type[BaseHTTPRequestHandler]:
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, format: str, *args: Any) -> None:
            pass  # request lines contain the token

        def do_GET(self) -> None:
            self._dispatch()

        def do_POST(self) -> None:
            self._dispatch()

        def _dispatch(self) -> None:
            parts = urlsplit(self.path)
            params: dict[str, Any] = {k: v[-1] for k, v in parse_qs(parts.query).items()}
            length = int(self.headers.get("Content-Length") or 0)
            raw = self.rfile.read(length) if length else b""
            if raw:
                ctype = self.headers.get("Content-Type", "")
                try:
                    if ctype.startswith("application/json"):
                        body = json.loads(raw)
                        if isinstance(body, dict):
                            params.update(body)
                    else:
                        params.update({k: v[-1] for k, v in parse_qs(raw.decode()).items()})
                except ValueError:
                    self._reply(400, {"ok": False, "error_code": 400, "description": "Bad Request: can't parse body"})
                    return

            segments = parts.path.strip("/").split("/")
            if len(segments) != 2 or not segments[0].startswith("bot"):
                self._reply(404, {"ok": False, "error_code": 404, "description": "Not Found"})
                return
            if segments[0][3:] != server.token:
                self._reply(401, {"ok": False, "error_code": 401, "description": "Unauthorized"})
                return
            status, body = server.handle(segments[1], params)
            if body is None:
                self.close_connection = True
                self.connection.shutdown(2)
                return
            self._reply(status, body)

        def _reply(self, status: int, body: Any) -> None:
            if isinstance(body, str):
                data, ctype = body.encode(), "text/html"
            else:
                data, ctype = json.dumps(body).encode(), "application/json"
            self.send_response(status)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    return Handler
