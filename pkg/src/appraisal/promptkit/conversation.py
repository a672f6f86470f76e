"""Drive the three-step valuation conversation and collect the parsed outcome.

The driver sends the prepared prompt turns, keeps the full history across
steps, parses each reply, and re-prompts once with a terse format reminder
when step 1 or step 2 comes back unparseable. Step 3 is never re-prompted.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from .parsers import parse_features, parse_interval, parse_price

PRICE_MAX_TOKENS = 100
INTERVAL_MAX_TOKENS = 100
FEATURES_MAX_TOKENS = 200


class CompleteFn(Protocol):
    def __call__(self, turns: list[dict], max_tokens: int | None = None) -> tuple[str, dict]:
        ...


@dataclass
class ConversationOutcome:
    """Parsed three-step result: point price, 90% interval, top-5 features.

    ``interval_flagged`` marks a parseable interval that does not contain the
    step-1 point price; metric code excludes those with a count, it never
    repairs them. Invalid parses stay None with the raw reply retained in
    ``raw_turns``.
    """

    point_price: float | None
    interval: tuple[float, float] | None
    interval_flagged: bool
    interval_swapped: bool
    features: list[str] | None
    raw_turns: list[dict]
    token_counts: dict[str, int]
    reprompts: int = 0

    @property
    def interval_valid(self) -> bool:
        return self.interval is not None and not self.interval_flagged


def _merge_usage(total: dict[str, int], usage: dict) -> None:
    for key in ("prompt_tokens", "completion_tokens"):
        total[key] = total.get(key, 0) + int(usage.get(key, 0) or 0)


def run_conversation(
    prompt_turns: Sequence[dict],
    complete: CompleteFn,
    *,
    currency: str,
    schema_names: list[str],
    allow_reprompt: bool = True,
) -> ConversationOutcome:
    """Run the prepared turns against a model and parse the replies.

    ``prompt_turns`` is the four-turn script from build_conversation: system,
    price request, interval request, feature request.
    """
    system, price_request, interval_request, feature_request = prompt_turns
    history: list[dict] = [dict(system), dict(price_request)]
    usage_total: dict[str, int] = {"prompt_tokens": 0, "completion_tokens": 0}
    reprompts = 0

    def ask(max_tokens: int) -> str:
        text, usage = complete(list(history), max_tokens=max_tokens)
        history.append({"role": "assistant", "content": text})
        _merge_usage(usage_total, usage)
        return text

    reply = ask(PRICE_MAX_TOKENS)
    price = parse_price(reply, currency)
    if price is None and allow_reprompt:
        history.append(
            {
                "role": "user",
                "content": f"Please answer with the price only, using the format 'price {currency}'.",
            }
        )
        reprompts += 1
        price = parse_price(ask(PRICE_MAX_TOKENS), currency)

    history.append(dict(interval_request))
    interval_reply = ask(INTERVAL_MAX_TOKENS)
    parsed_interval = parse_interval(interval_reply, currency)
    if parsed_interval is None and allow_reprompt:
        history.append(
            {
                "role": "user",
                "content": "Please answer with the interval only, using the format 'min_price - max_price'.",
            }
        )
        reprompts += 1
        parsed_interval = parse_interval(ask(INTERVAL_MAX_TOKENS), currency)

    history.append(dict(feature_request))
    features = parse_features(ask(FEATURES_MAX_TOKENS), schema_names)

    interval = None
    flagged = False
    swapped = False
    if parsed_interval is not None:
        interval = (parsed_interval.lo, parsed_interval.hi)
        swapped = parsed_interval.swapped
        flagged = price is None or not (parsed_interval.lo <= price <= parsed_interval.hi)

    return ConversationOutcome(
        point_price=price,
        interval=interval,
        interval_flagged=flagged,
        interval_swapped=swapped,
        features=features,
        raw_turns=history,
        token_counts=usage_total,
        reprompts=reprompts,
    )
