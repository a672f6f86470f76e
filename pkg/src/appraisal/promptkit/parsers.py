"""Extract prices, intervals, and feature lists from free-form model replies.

Numbers are read under a per-currency locale rule (EUR writes 1.250.000,
USD/CNY write 1,250,000; spaces group thousands everywhere). The parsers are
deliberately conservative: a price needs an adjacent currency code or symbol,
an interval needs two well-formed numbers around a dash/"to"/"between..and",
and anything resembling percentages, dates, or digit chains is skipped.
Returning invalid is always preferred over guessing.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

CURRENCY_SYMBOLS: dict[str, tuple[str, ...]] = {
    "USD": ("$",),
    "EUR": ("€",),
    "CNY": ("¥", "￥", "元"),
    "GBP": ("£",),
    "JPY": ("¥", "￥"),
}

_SPACES = "    "  # space, nbsp, thin space, narrow nbsp


@dataclass(frozen=True)
class LocaleRule:
    thousands: str  # separator characters valid between 3-digit groups
    decimal: str


def locale_for(currency: str) -> LocaleRule:
    if currency.upper() == "EUR":
        return LocaleRule(thousands="." + _SPACES, decimal=",")
    return LocaleRule(thousands="," + _SPACES, decimal=".")


def _number_pattern(rule: LocaleRule) -> str:
    sep = re.escape(rule.thousands)
    dec = re.escape(rule.decimal)
    grouped = rf"[1-9]\d{{0,2}}(?:[{sep}]\d{{3}})+"
    plain = r"(?:0|[1-9]\d*)"
    decimal = rf"(?:{dec}\d{{1,2}}(?!\d))?"
    return rf"(?:{grouped}|{plain}){decimal}"


def _to_value(text: str, rule: LocaleRule) -> float:
    for ch in rule.thousands:
        text = text.replace(ch, "")
    if rule.decimal != ".":
        text = text.replace(rule.decimal, ".")
    return float(text)


def _currency_alternation(currency: str) -> str:
    # letter lookarounds, not \b: digits are word characters, so "420USD"
    # must still expose the code while "USED" must not
    code = rf"(?<![A-Za-z]){re.escape(currency)}(?![A-Za-z])"
    tokens = [code] + [re.escape(s) for s in CURRENCY_SYMBOLS.get(currency.upper(), ())]
    return "(?:" + "|".join(tokens) + ")"


def parse_price(reply: str, currency: str) -> float | None:
    """First positive number adjacent to the currency code/symbol, or None.

    Accepts locale thousand separators and up to two decimals; rejects zero,
    negatives, and replies with no currency-adjacent number at all.
    """
    num = _number_pattern(locale_for(currency))
    cur = _currency_alternation(currency)
    pattern = re.compile(
        rf"(?:(?P<sign_a>[-−])?(?P<num_a>{num})\s*{cur})|(?:{cur}\s*(?P<sign_b>[-−])?(?P<num_b>{num}))",
        re.IGNORECASE,
    )
    match = pattern.search(reply)
    if not match:
        return None
    if match.group("sign_a") or match.group("sign_b"):
        return None
    text = match.group("num_a") or match.group("num_b")
    value = _to_value(text, locale_for(currency))
    return value if value > 0 else None


@dataclass(frozen=True)
class ParsedInterval:
    lo: float
    hi: float
    swapped: bool = False


_PERCENTY = r"\s*(?:%|percent\b|per\s+cent\b)"


def _is_suspicious(reply: str, match: re.Match) -> bool:
    """Skip ranges that are really percentages, dates, or digit chains."""
    if re.match(r"-\d", reply[match.end():]):
        return True
    head = reply[: match.start()]
    if head.endswith("-") or head.endswith("−"):
        return True
    for group in ("num_a", "num_b"):
        if re.match(_PERCENTY, reply[match.end(group):], re.IGNORECASE):
            return True
    return False


def _implausible_without_currency(lo: float, hi: float, match: re.Match, cur: str) -> bool:
    """Currencyless ranges that read as years or tiny counts, not prices."""
    if re.search(cur, match.group(0), re.IGNORECASE):
        return False
    if lo < 100 and hi < 100:
        return True
    year_like = (
        lo == int(lo)
        and hi == int(hi)
        and 1000 <= lo <= 2999
        and 1000 <= hi <= 2999
        and abs(hi - lo) <= 50
    )
    return year_like


def parse_interval(reply: str, currency: str = "USD") -> ParsedInterval | None:
    """Two numbers around a dash/en-dash/"to" (or "between .. and ..").

    Inverted bounds are swapped and flagged; a non-positive lower bound or
    fewer than two well-formed numbers is invalid.
    """
    rule = locale_for(currency)
    num = _number_pattern(rule)
    cur = _currency_alternation(currency)
    label = r"(?:(?:min|max|low|high|from)(?:[_ ]?price)?\s*[:=]?\s*)?"
    bound_a = rf"{label}(?:{cur}\s*)?(?P<num_a>{num})(?:\s*{cur})?"
    bound_b = rf"{label}(?:{cur}\s*)?(?P<num_b>{num})(?:\s*{cur})?"
    patterns = [
        re.compile(rf"{bound_a}\s*[-–—]\s*{bound_b}", re.IGNORECASE),
        re.compile(rf"{bound_a}\s+to\s+{bound_b}", re.IGNORECASE),
        re.compile(rf"between\s+{bound_a}\s+and\s+{bound_b}", re.IGNORECASE),
    ]
    candidates = sorted(
        (m for p in patterns for m in p.finditer(reply)), key=lambda m: m.start()
    )
    for match in candidates:
        if _is_suspicious(reply, match):
            continue
        lo = _to_value(match.group("num_a"), rule)
        hi = _to_value(match.group("num_b"), rule)
        if _implausible_without_currency(lo, hi, match, cur):
            continue
        swapped = lo > hi
        if swapped:
            lo, hi = hi, lo
        if lo <= 0:
            continue
        return ParsedInterval(lo=lo, hi=hi, swapped=swapped)
    return None


_ENUMERATION = re.compile(r"^\s*(?:\d+[.)]\s*|[-•*]\s*)")
_TRIM_CHARS = " \t\r\n.;:!?\"'()[]"


def parse_features(reply: str, schema_names: list[str]) -> list[str] | None:
    """Up to five schema feature names from a comma-separated reply.

    Matching is case-insensitive and exact after trimming punctuation and
    list markers; unknown tokens are dropped, duplicates removed, order kept.
    Returns None when nothing matches.
    """
    canonical = {name.lower(): name for name in schema_names}
    found: list[str] = []
    for token in re.split(r"[,;\n]", reply):
        token = _ENUMERATION.sub("", token).strip(_TRIM_CHARS)
        name = canonical.get(token.lower())
        if name and name not in found:
            found.append(name)
        if len(found) == 5:
            break
    return found or None
