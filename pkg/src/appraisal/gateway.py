"""Chat-completion access: providers, a deterministic mock, and a response cache.

Every exchange is cached content-addressed (one JSON file per exchange), so a
finished run can be re-scored byte-identically with no credentials and no
network. API keys are read from the environment at call time and never appear
in logs, cache files, or errors beyond the variable's *name*.
"""
from __future__ import annotations

import datetime as dt
import hashlib
import json
import logging
import os
import re
import statistics
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path

import httpx

from .promptkit.serialize import format_number

log = logging.getLogger(__name__)

PROVIDER_KINDS = ("openai-compatible", "local-server", "mock")
DEFAULT_PARALLELISM = 4
MAX_ATTEMPTS = 3
RETRYABLE_STATUS = (408, 429, 500, 502, 503, 504)


class GatewayError(Exception):
    pass


class AuthError(GatewayError):
    """Terminal credential problem; names the env var, never the key."""


class CompletionFailed(GatewayError):
    """Exchange failed after retries; the instance is excluded and counted."""


@dataclass(frozen=True)
class ModelEndpoint:
    """A chat-completion target. Evaluation runs keep temperature and seed at 0;
    interactive appraisal may override them, and every response is stamped with
    the effective decoding settings."""

    name: str
    provider_kind: str
    base_url: str = ""
    model_name: str = ""
    api_key_ref: str = ""
    temperature: float = 0.0
    seed: int = 0
    max_tokens: int = 200
    timeout_s: float = 60.0

    def __post_init__(self):
        if self.provider_kind not in PROVIDER_KINDS:
            raise ValueError(f"unknown provider kind {self.provider_kind!r}")

    def with_decoding(self, temperature: float | None = None, seed: int | None = None):
        changes = {}
        if temperature is not None:
            changes["temperature"] = temperature
        if seed is not None:
            changes["seed"] = seed
        return replace(self, **changes) if changes else self


@dataclass(frozen=True)
class CachedExchange:
    key: str
    response_text: str
    usage: dict
    created_at: str


def exchange_key(endpoint: ModelEndpoint, turns: list[dict], max_tokens: int) -> str:
    """Digest of everything that shapes the response (not the endpoint alias)."""
    payload = {
        "provider_kind": endpoint.provider_kind,
        "base_url": endpoint.base_url,
        "model_name": endpoint.model_name,
        "temperature": endpoint.temperature,
        "seed": endpoint.seed,
        "max_tokens": max_tokens,
        "turns": [{"role": t["role"], "content": t["content"]} for t in turns],
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


class ResponseCache:
    """One JSON file per exchange under the cache directory, written atomically."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str) -> CachedExchange | None:
        path = self._path(key)
        if not path.exists():
            return None
        raw = json.loads(path.read_text(encoding="utf-8"))
        return CachedExchange(
            key=key,
            response_text=raw["response_text"],
            usage=raw.get("usage", {}),
            created_at=raw.get("created_at", ""),
        )

    def put(self, key: str, turns: list[dict], response_text: str, usage: dict) -> CachedExchange:
        entry = CachedExchange(
            key=key,
            response_text=response_text,
            usage=usage,
            created_at=dt.datetime.now(dt.timezone.utc).isoformat(),
        )
        payload = {
            "key": key,
            "turns": turns,
            "response_text": response_text,
            "usage": usage,
            "created_at": entry.created_at,
        }
        tmp = self._path(key).with_suffix(".tmp")
        tmp.write_text(json.dumps(payload, ensure_ascii=False, indent=2), encoding="utf-8")
        tmp.rename(self._path(key))
        return entry


# -- deterministic mock model ---------------------------------------------

_EXAMPLE_PRICE = re.compile(r"transaction price is ([0-9][0-9.]*) ([A-Z]{3})")
_MEDIAN_PRICE = re.compile(r"median price of ([0-9][0-9.]*) ([A-Z]{3})")
_TASK_CURRENCY = re.compile(r"predict the price in ([A-Z]{3})")
_REPLY_PRICE = re.compile(r"([0-9][0-9.]*) ([A-Z]{3})")
_FEATURE_NAMES = re.compile(r"feature names: (.+?)\.?$", re.DOTALL)


def _usage_for(turns: list[dict], reply: str) -> dict:
    prompt_tokens = sum(len(t["content"].split()) for t in turns)
    return {"prompt_tokens": prompt_tokens, "completion_tokens": len(reply.split())}


def mock_complete(
    turns: list[dict],
    behavior: str = "comp-median",
    fixture: list[str] | None = None,
) -> tuple[str, dict]:
    """Deterministic stand-in model.

    ``comp-median`` answers step 1 with the median of the prompt's example
    prices (falling back to the stated median training price on zero-shot
    prompts), step 2 with a ±20% band around its own point answer, and step 3
    with the first five offered feature names. ``scripted`` replays a fixture
    keyed by how many assistant turns the conversation already holds.
    """
    if behavior == "scripted":
        if fixture is None:
            raise ValueError("scripted mock needs a fixture")
        idx = sum(1 for t in turns if t["role"] == "assistant")
        reply = fixture[idx] if idx < len(fixture) else fixture[-1]
        return reply, _usage_for(turns, reply)
    if behavior != "comp-median":
        raise ValueError(f"unknown mock behavior {behavior!r}")

    last_user = next(t["content"] for t in reversed(turns) if t["role"] == "user")

    if "price interval" in last_user or "min_price - max_price" in last_user:
        for turn in reversed(turns):
            if turn["role"] != "assistant":
                continue
            match = _REPLY_PRICE.search(turn["content"])
            if match:
                point = float(match.group(1))
                reply = f"{format_number(0.8 * point)} - {format_number(1.2 * point)}"
                return reply, _usage_for(turns, reply)
        reply = "no prior price to bound"
        return reply, _usage_for(turns, reply)

    if "top 5 features" in last_user:
        match = _FEATURE_NAMES.search(last_user)
        names = [n.strip() for n in match.group(1).split(",")] if match else []
        reply = ", ".join(names[:5]) if names else "none"
        return reply, _usage_for(turns, reply)

    prompt_text = "\n".join(t["content"] for t in turns if t["role"] == "user")
    examples = _EXAMPLE_PRICE.findall(last_user)
    if examples:
        prices = [float(p) for p, _ in examples]
        currency = examples[0][1]
        reply = f"{format_number(statistics.median(prices))} {currency}"
        return reply, _usage_for(turns, reply)
    stated = _MEDIAN_PRICE.search(prompt_text)
    if stated:
        reply = f"{stated.group(1)} {stated.group(2)}"
        return reply, _usage_for(turns, reply)
    cur = _TASK_CURRENCY.search(prompt_text)
    reply = f"100000 {cur.group(1) if cur else 'USD'}"
    return reply, _usage_for(turns, reply)


# -- gateway ----------------------------------------------------------------


class Gateway:
    """Cache-first completion access with bounded provider parallelism.

    Counters make resume behavior testable: ``cache_hits``, ``provider_calls``
    (network requests actually issued), ``mock_calls``, and ``failures``.
    """

    def __init__(
        self,
        cache: ResponseCache,
        parallelism: int = DEFAULT_PARALLELISM,
        retry_base_delay: float = 1.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.cache = cache
        self.retry_base_delay = retry_base_delay
        self._semaphore = threading.Semaphore(parallelism)
        self._client = httpx.Client(transport=transport)
        self._lock = threading.Lock()
        self.cache_hits = 0
        self.provider_calls = 0
        self.mock_calls = 0
        self.failures = 0

    def _count(self, attr: str) -> None:
        with self._lock:
            setattr(self, attr, getattr(self, attr) + 1)

    def complete(
        self,
        endpoint: ModelEndpoint,
        turns: list[dict],
        max_tokens: int | None = None,
    ) -> tuple[str, dict]:
        """Return (response_text, usage); cache-first, then the provider."""
        effective_max = max_tokens if max_tokens is not None else endpoint.max_tokens
        key = exchange_key(endpoint, turns, effective_max)
        cached = self.cache.get(key)
        if cached is not None:
            self._count("cache_hits")
            return cached.response_text, cached.usage

        if endpoint.provider_kind == "mock":
            behavior, fixture = self._mock_spec(endpoint)
            text, usage = mock_complete(turns, behavior=behavior, fixture=fixture)
            self._count("mock_calls")
        else:
            text, usage = self._call_provider(endpoint, turns, effective_max)
        self.cache.put(key, turns, text, usage)
        return text, usage

    def _mock_spec(self, endpoint: ModelEndpoint) -> tuple[str, list[str] | None]:
        name = endpoint.model_name or "comp-median"
        if name.startswith("scripted:"):
            fixture_path = Path(name.split(":", 1)[1])
            return "scripted", json.loads(fixture_path.read_text(encoding="utf-8"))
        return name, None

    def _call_provider(
        self, endpoint: ModelEndpoint, turns: list[dict], max_tokens: int
    ) -> tuple[str, dict]:
        headers = {}
        if endpoint.api_key_ref:
            key = os.environ.get(endpoint.api_key_ref, "")
            if not key:
                raise AuthError(
                    f"endpoint {endpoint.name!r} needs an API key in ${endpoint.api_key_ref}"
                )
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": endpoint.model_name,
            "messages": [{"role": t["role"], "content": t["content"]} for t in turns],
            "temperature": endpoint.temperature,
            "seed": endpoint.seed,
            "max_tokens": max_tokens,
        }
        url = endpoint.base_url.rstrip("/") + "/chat/completions"
        last_error = "no attempt made"
        with self._semaphore:
            for attempt in range(MAX_ATTEMPTS):
                if attempt:
                    time.sleep(self.retry_base_delay * 2 ** (attempt - 1))
                self._count("provider_calls")
                try:
                    resp = self._client.post(
                        url, json=body, headers=headers, timeout=endpoint.timeout_s
                    )
                except httpx.HTTPError as exc:
                    last_error = f"transport error: {exc.__class__.__name__}"
                    log.warning("%s (attempt %d/%d)", last_error, attempt + 1, MAX_ATTEMPTS)
                    continue
                if resp.status_code in (401, 403):
                    self._count("failures")
                    raise AuthError(
                        f"endpoint {endpoint.name!r} rejected credentials from "
                        f"${endpoint.api_key_ref or '<unset>'} (HTTP {resp.status_code})"
                    )
                if resp.status_code in RETRYABLE_STATUS:
                    last_error = f"HTTP {resp.status_code}"
                    log.warning("%s (attempt %d/%d)", last_error, attempt + 1, MAX_ATTEMPTS)
                    continue
                if resp.status_code != 200:
                    self._count("failures")
                    raise CompletionFailed(
                        f"endpoint {endpoint.name!r} returned HTTP {resp.status_code}"
                    )
                data = resp.json()
                text = data["choices"][0]["message"]["content"]
                return text, data.get("usage", {})
        self._count("failures")
        raise CompletionFailed(
            f"endpoint {endpoint.name!r} failed after {MAX_ATTEMPTS} attempts ({last_error})"
        )

    def complete_fn(self, endpoint: ModelEndpoint):
        """Adapter for the conversation driver: (turns, max_tokens) -> (text, usage)."""

        def fn(turns: list[dict], max_tokens: int | None = None) -> tuple[str, dict]:
            return self.complete(endpoint, turns, max_tokens=max_tokens)

        return fn
