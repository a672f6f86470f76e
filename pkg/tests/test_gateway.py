import json

import httpx
import pytest

from appraisal.gateway import (
    AuthError,
    CompletionFailed,
    Gateway,
    ModelEndpoint,
    ResponseCache,
    exchange_key,
    mock_complete,
)

TURNS = [
    {"role": "system", "content": "You are a real estate expert."},
    {"role": "user", "content": "Estimate the price. predict the price in USD"},
]


def chat_response(text="420000 USD"):
    return {
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 12, "completion_tokens": 3},
    }


def provider_endpoint(name="remote"):
    return ModelEndpoint(
        name=name, provider_kind="openai-compatible",
        base_url="http://llm.test/v1", model_name="test-model",
    )


def test_cache_hit_skips_network(tmp_path):
    calls = []

    def handler(request):
        calls.append(request)
        return httpx.Response(200, json=chat_response())

    gw = Gateway(ResponseCache(tmp_path), transport=httpx.MockTransport(handler), retry_base_delay=0)
    ep = provider_endpoint()
    text1, usage1 = gw.complete(ep, TURNS)
    text2, usage2 = gw.complete(ep, TURNS)
    assert text1 == text2 == "420000 USD"
    assert usage1 == usage2
    assert len(calls) == 1
    assert gw.cache_hits == 1
    assert gw.provider_calls == 1


def test_cache_key_sensitive_to_any_turn_change():
    ep = provider_endpoint()
    base = exchange_key(ep, TURNS, 100)
    edited = [dict(TURNS[0]), {"role": "user", "content": TURNS[1]["content"] + "!"}]
    assert exchange_key(ep, edited, 100) != base
    assert exchange_key(ep, TURNS, 101) != base
    other_model = ModelEndpoint(
        name="remote", provider_kind="openai-compatible",
        base_url="http://llm.test/v1", model_name="other-model",
    )
    assert exchange_key(other_model, TURNS, 100) != base


def test_retry_on_429_then_success(tmp_path):
    statuses = [429, 429, 200]
    calls = []

    def handler(request):
        calls.append(request)
        status = statuses[len(calls) - 1]
        if status == 200:
            return httpx.Response(200, json=chat_response())
        return httpx.Response(status)

    gw = Gateway(ResponseCache(tmp_path), transport=httpx.MockTransport(handler), retry_base_delay=0)
    text, _ = gw.complete(provider_endpoint(), TURNS)
    assert text == "420000 USD"
    assert len(calls) == 3


def test_failure_after_retries_counts(tmp_path):
    def handler(request):
        return httpx.Response(503)

    gw = Gateway(ResponseCache(tmp_path), transport=httpx.MockTransport(handler), retry_base_delay=0)
    with pytest.raises(CompletionFailed, match="after 3 attempts"):
        gw.complete(provider_endpoint(), TURNS)
    assert gw.failures == 1
    assert gw.provider_calls == 3


def test_auth_failure_names_env_var(tmp_path, monkeypatch):
    monkeypatch.delenv("TEST_LLM_KEY", raising=False)
    gw = Gateway(ResponseCache(tmp_path), retry_base_delay=0)
    ep = ModelEndpoint(
        name="remote", provider_kind="openai-compatible",
        base_url="http://llm.test/v1", model_name="m", api_key_ref="TEST_LLM_KEY",
    )
    with pytest.raises(AuthError, match=r"\$TEST_LLM_KEY"):
        gw.complete(ep, TURNS)


def test_rejected_credentials_are_terminal(tmp_path, monkeypatch):
    monkeypatch.setenv("TEST_LLM_KEY", "sk-secret-value-123")
    calls = []

    def handler(request):
        calls.append(request)
        return httpx.Response(401)

    gw = Gateway(ResponseCache(tmp_path), transport=httpx.MockTransport(handler), retry_base_delay=0)
    ep = ModelEndpoint(
        name="remote", provider_kind="openai-compatible",
        base_url="http://llm.test/v1", model_name="m", api_key_ref="TEST_LLM_KEY",
    )
    with pytest.raises(AuthError, match="TEST_LLM_KEY"):
        gw.complete(ep, TURNS)
    assert len(calls) == 1  # no retry on auth errors


def test_secret_never_reaches_cache_or_errors(tmp_path, monkeypatch):
    secret = "sk-super-secret-9876"
    monkeypatch.setenv("TEST_LLM_KEY", secret)

    def handler(request):
        assert request.headers["Authorization"] == f"Bearer {secret}"
        return httpx.Response(200, json=chat_response())

    cache_dir = tmp_path / "cache"
    gw = Gateway(ResponseCache(cache_dir), transport=httpx.MockTransport(handler), retry_base_delay=0)
    ep = ModelEndpoint(
        name="remote", provider_kind="openai-compatible",
        base_url="http://llm.test/v1", model_name="m", api_key_ref="TEST_LLM_KEY",
    )
    gw.complete(ep, TURNS)
    for path in cache_dir.rglob("*"):
        if path.is_file():
            assert secret not in path.read_text(encoding="utf-8")


def test_cached_exchange_round_trips_bytes(tmp_path):
    cache = ResponseCache(tmp_path)
    cache.put("k1", TURNS, "reply with unicode €¥", {"prompt_tokens": 1})
    entry = cache.get("k1")
    assert entry is not None
    assert entry.response_text == "reply with unicode €¥"
    assert cache.get("missing") is None


def test_mock_endpoint_served_through_gateway_and_cached(tmp_path):
    gw = Gateway(ResponseCache(tmp_path), retry_base_delay=0)
    ep = ModelEndpoint(name="mock", provider_kind="mock", model_name="comp-median")
    turns = [
        {"role": "system", "content": "You are a real estate expert."},
        {
            "role": "user",
            "content": "predict the price in USD. transaction price is 100000 USD. "
            "transaction price is 200000 USD. transaction price is 300000 USD.",
        },
    ]
    text, _ = gw.complete(ep, turns)
    assert text == "200000 USD"
    assert gw.mock_calls == 1
    gw.complete(ep, turns)
    assert gw.mock_calls == 1
    assert gw.cache_hits == 1


def test_scripted_mock_from_file(tmp_path):
    fixture = tmp_path / "script.json"
    fixture.write_text(json.dumps(["111 USD", "100 - 120", "grade"]), encoding="utf-8")
    gw = Gateway(ResponseCache(tmp_path / "cache"), retry_base_delay=0)
    ep = ModelEndpoint(name="mock", provider_kind="mock", model_name=f"scripted:{fixture}")
    text, _ = gw.complete(ep, TURNS)
    assert text == "111 USD"


# --- comp-median mock behavior ------------------------------------------------


def step1_prompt(example_prices=(), currency="USD", median=450000):
    content = f"predict the price in {currency}. "
    for p in example_prices:
        content += f"The transaction date is 2015-01-01 and the transaction price is {p} {currency}. "
    content += f"with a median price of {median} {currency}."
    return [
        {"role": "system", "content": "You are a real estate expert."},
        {"role": "user", "content": content},
    ]


def test_mock_answers_median_of_example_prices():
    text, usage = mock_complete(step1_prompt((100000, 200000, 300000)))
    assert text == "200000 USD"
    assert usage["completion_tokens"] == 2


def test_mock_zero_shot_falls_back_to_stated_median():
    text, _ = mock_complete(step1_prompt((), currency="EUR", median=450000))
    assert text == "450000 EUR"


def test_mock_interval_is_plus_minus_twenty_percent():
    turns = step1_prompt((100000, 200000, 300000))
    turns.append({"role": "assistant", "content": "200000 USD"})
    turns.append({"role": "user", "content": "Please provide a price interval ... 'min_price - max_price'."})
    text, _ = mock_complete(turns)
    assert text == "160000 - 240000"


def test_mock_features_echo_first_five_names():
    turns = step1_prompt((100000,))
    turns.append({"role": "assistant", "content": "100000 USD"})
    turns.append(
        {
            "role": "user",
            "content": "Please provide the top 5 features ... using the feature names: "
            "sqft_living, grade, bathrooms, view, condition, bedrooms, lat.",
        }
    )
    text, _ = mock_complete(turns)
    assert text == "sqft_living, grade, bathrooms, view, condition"


def test_mock_median_of_even_count_examples():
    text, _ = mock_complete(step1_prompt((100000, 200000, 300000, 401000)))
    assert text == "250000 USD"
