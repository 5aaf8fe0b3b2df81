"""CBS: an information-security advice chatbot.

Utterances are reduced to keyword sets, matched against a JSON knowledge base
of topic-grouped advice, and answered through a reply cache. The bot runs as
a local REPL or as a Telegram long-polling service.
"""

from importlib import resources

from cbs.engine import Engine, EngineConfig, Reply, ReplyKind
from cbs.kb_store import KnowledgeBase, parse_kb
from cbs.matcher import MatchConfig
from cbs.text_pipeline import StopwordList

__all__ = [
    "Engine",
    "EngineConfig",
    "KnowledgeBase",
    "MatchConfig",
    "Reply",
    "ReplyKind",
    "StopwordList",
    "default_kb_bytes",
    "parse_kb",
]

__version__ = "0.1.0"


def default_kb_bytes() -> bytes:
    """The bundled desk-scale knowledge base (3 topics, 12 entries)."""
    return resources.files("cbs.data").joinpath("security_kb.json").read_bytes()
