"""Prompt assembly, the three-step valuation conversation, and reply parsing."""

from .strategies import STRATEGIES, PromptStrategy, get_strategy, strategy_names
from .reports import MarketReport, load_report_library, select_report
from .serialize import build_conversation, serialize_property
from .parsers import ParsedInterval, parse_features, parse_interval, parse_price
from .conversation import ConversationOutcome, run_conversation

__all__ = [
    "STRATEGIES",
    "PromptStrategy",
    "get_strategy",
    "strategy_names",
    "MarketReport",
    "load_report_library",
    "select_report",
    "build_conversation",
    "serialize_property",
    "ParsedInterval",
    "parse_features",
    "parse_interval",
    "parse_price",
    "ConversationOutcome",
    "run_conversation",
]
