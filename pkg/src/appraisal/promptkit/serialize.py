"""Render properties as prose and assemble the valuation conversation turns.

Output is deterministic byte-for-byte for identical inputs: response caching
keys on the exact turn text. Feature values carry no thousand separators and
prices are written in whole currency units.
"""
from __future__ import annotations

from typing import Mapping, Sequence

from ..dataset import PropertyRecord, TrainStats
from ..geospatial import GeocodeEntry
from .reports import MarketReport
from .strategies import PromptStrategy

SYSTEM_PROMPT = "You are a real estate expert."

ORDINALS = (
    "first", "second", "third", "fourth", "fifth",
    "sixth", "seventh", "eighth", "ninth", "tenth",
)


def format_number(value: float) -> str:
    """Plain decimal rendering: no separators, no exponent, trimmed zeros."""
    if value == int(value):
        return str(int(value))
    return f"{value:.6f}".rstrip("0").rstrip(".")


def format_price(value: float) -> str:
    """Whole-unit price text; fractional cents kept only when present."""
    return format_number(round(value, 2))


def serialize_property(
    rec: PropertyRecord,
    geocode: GeocodeEntry | None = None,
    include_price: bool = False,
) -> str:
    """One property as a sentence: location, variables, date, optional price.

    The returned text completes the phrase "... located at {text}". A missing
    or empty geocoded address drops the address clause; the coordinates are
    always present.
    """
    address = ""
    if geocode is not None and geocode.address:
        address = geocode.address
    elif rec.address:
        address = rec.address

    location = f"coordinates ({format_number(rec.lat)}, {format_number(rec.lon)})"
    if address:
        location = f"{address}, at {location}"

    parts = []
    for name, value in rec.features.items():
        if value is None:
            continue
        parts.append(f"{name}: {format_number(value)}")
    for name, label in rec.categoricals.items():
        parts.append(f"{name}: {label}")
    variables = "; ".join(parts) if parts else "no recorded variables"

    text = f"{location}, with the following variables: {variables}."
    if include_price:
        if rec.price is None:
            raise ValueError("cannot serialize a price for a record without one")
        text += (
            f" The transaction date is {rec.date.isoformat()} and the transaction "
            f"price is {format_price(rec.price)} {rec.currency}."
        )
    else:
        text += f" The transaction date is {rec.date.isoformat()}."
    return text


def _examples_block(
    examples: Sequence[PropertyRecord],
    geocode_entries: Mapping[str, GeocodeEntry] | None,
) -> str:
    sentences = []
    for i, rec in enumerate(examples):
        ordinal = ORDINALS[i] if i < len(ORDINALS) else f"{i + 1}th"
        entry = geocode_entries.get(rec.id) if geocode_entries else None
        sentences.append(
            f"The {ordinal} property is located at "
            f"{serialize_property(rec, entry, include_price=True)}"
        )
    return (
        "Here are some examples of relevant properties and their prices: "
        + " ".join(sentences)
    )


def build_conversation(
    target: PropertyRecord,
    strategy: PromptStrategy,
    examples: Sequence[PropertyRecord],
    report: MarketReport | None,
    stats: TrainStats,
    *,
    region: str,
    currency: str,
    variables: Sequence[str],
    geocode_entries: Mapping[str, GeocodeEntry] | None = None,
) -> list[dict]:
    """The four prompt turns of the three-step valuation conversation.

    Returned turns: system line, the price-prediction request (task
    definition, optional report, optional examples, property details), the
    interval request, and the feature-importance request. Model replies are
    interleaved by the conversation driver, which maintains history.
    """
    if strategy.selection is None and examples:
        raise ValueError(f"strategy {strategy.name!r} takes no examples, got {len(examples)}")
    if strategy.selection is not None and len(examples) != strategy.selection.count:
        raise ValueError(
            f"strategy {strategy.name!r} needs {strategy.selection.count} examples, "
            f"got {len(examples)}"
        )
    if strategy.use_report and report is None:
        raise ValueError(f"strategy {strategy.name!r} requires a market report")
    if not strategy.use_report and report is not None:
        raise ValueError(f"strategy {strategy.name!r} does not take a market report")

    blocks = [
        f"Your task is to value properties in {region}. Properties will be described "
        f"by a number of variables. Please use this information to predict the price "
        f"in {currency}. Please answer with the price only and use the format "
        f"'price {currency}'."
    ]
    if report is not None:
        blocks.append(
            "The following report provides context on the housing market at the time "
            f"of the transaction: {report.body}"
        )
    if examples:
        blocks.append(_examples_block(examples, geocode_entries))

    target_entry = geocode_entries.get(target.id) if geocode_entries else None
    blocks.append(
        "Estimate the price, following the format, of a property located at "
        f"{serialize_property(target, target_entry, include_price=False)} "
        f"The training data includes houses with prices ranging from "
        f"{format_price(stats.price_min)} {currency} to {format_price(stats.price_max)} "
        f"{currency}, with a median price of {format_price(stats.price_median)} {currency}."
    )

    interval_request = (
        "Please provide a price interval with 90% coverage around your estimated "
        "price for this property in the format 'min_price - max_price'."
    )
    feature_request = (
        "Please provide the top 5 features that you deemed most important for your "
        "previous predictions. Answer with a comma-separated list of features, using "
        f"the feature names: {', '.join(variables)}."
    )
    return [
        {"role": "system", "content": SYSTEM_PROMPT},
        {"role": "user", "content": "\n\n".join(blocks)},
        {"role": "user", "content": interval_request},
        {"role": "user", "content": feature_request},
    ]
