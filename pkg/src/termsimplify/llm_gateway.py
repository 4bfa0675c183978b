"""Chat-completion gateway: HTTP providers, a deterministic mock, usage ledger and cost report."""

from __future__ import annotations

import json
import logging
import os
import random
import re
import threading
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from decimal import Decimal
from typing import Callable, Iterable, Mapping

import httpx

log = logging.getLogger(__name__)

MILLION = Decimal(1_000_000)
TRANSIENT_STATUS = frozenset({408, 429, 500, 502, 503, 504})


class GatewayError(Exception):
    pass


class ProviderError(GatewayError):
    def __init__(self, provider_id: str, http_status: int | None, message: str = ""):
        super().__init__(f"{provider_id}: HTTP {http_status} {message}".strip())
        self.provider_id = provider_id
        self.http_status = http_status


class Timeout(GatewayError):
    pass


class AuthMissing(GatewayError):
    pass


# ---------------------------------------------------------------------------
# configuration


MOCK_MODES = ("echo", "bracket_simplify", "fail_every_k", "garbage", "scripted", "outage")


@dataclass(frozen=True)
class MockBehavior:
    mode: str = "bracket_simplify"
    k: int = 0
    seed: int = 0
    # call sequence numbers (1-based) that get garbage in "scripted" mode
    fail_on: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.mode not in MOCK_MODES:
            raise ValueError(f"unknown mock mode {self.mode!r}")
        if self.mode == "fail_every_k" and self.k < 1:
            raise ValueError("fail_every_k needs k >= 1")
        object.__setattr__(self, "fail_on", frozenset(self.fail_on))


@dataclass(frozen=True)
class ProviderConfig:
    provider_id: str
    kind: str = "mock"  # openai | gemini | mock
    vendor: str | None = None
    model: str | None = None
    endpoint: str | None = None
    auth_env: str | None = None
    input_price_per_1m: Decimal = Decimal(0)
    output_price_per_1m: Decimal = Decimal(0)
    max_retries: int = 3
    timeout: float = 60.0
    max_parallel: int = 4
    requests_per_minute: float | None = None
    mock: MockBehavior | None = None

    def __post_init__(self):
        object.__setattr__(self, "input_price_per_1m", Decimal(str(self.input_price_per_1m)))
        object.__setattr__(self, "output_price_per_1m", Decimal(str(self.output_price_per_1m)))
        if self.input_price_per_1m < 0 or self.output_price_per_1m < 0:
            raise ValueError(f"{self.provider_id}: prices must be >= 0")
        if self.kind not in ("openai", "gemini", "mock"):
            raise ValueError(f"{self.provider_id}: unknown provider kind {self.kind!r}")
        if self.kind == "mock" and self.mock is None:
            object.__setattr__(self, "mock", MockBehavior())

    @property
    def group(self) -> str:
        return self.vendor or self.kind

    @classmethod
    def from_dict(cls, data: Mapping) -> "ProviderConfig":
        data = dict(data)
        mock = data.pop("mock", None)
        if isinstance(mock, Mapping):
            mock = MockBehavior(
                mock.get("mode", "bracket_simplify"),
                int(mock.get("k", 0)),
                int(mock.get("seed", 0)),
                frozenset(int(x) for x in mock.get("fail_on", ())),
            )
        known = {f for f in cls.__dataclass_fields__ if f != "mock"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown provider settings: {sorted(unknown)}")
        return cls(mock=mock, **data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["input_price_per_1m"] = str(self.input_price_per_1m)
        out["output_price_per_1m"] = str(self.output_price_per_1m)
        if self.mock is not None:
            out["mock"]["fail_on"] = sorted(self.mock.fail_on)
        return out


@dataclass(frozen=True)
class Completion:
    text: str
    input_tokens: int
    output_tokens: int
    seq: int = 0


# ---------------------------------------------------------------------------
# ledger


@dataclass(frozen=True)
class UsageRecord:
    seq: int
    provider: str
    vendor: str
    input_tokens: int
    output_tokens: int
    input_cost: Decimal
    output_cost: Decimal
    outcome: str = "ok"
    attempt: int = 1
    latency_s: float = 0.0
    timestamp: float = 0.0

    def to_json(self) -> str:
        d = asdict(self)
        d["input_cost"] = str(self.input_cost)
        d["output_cost"] = str(self.output_cost)
        return json.dumps(d, sort_keys=True)


@dataclass
class ProviderUsage:
    """Aggregated usage of one provider (also the shape of an imported cost-table row)."""

    provider: str
    vendor: str
    requests: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    input_cost: Decimal = Decimal(0)
    output_cost: Decimal = Decimal(0)
    input_price_per_1m: Decimal | None = None
    output_price_per_1m: Decimal | None = None

    @property
    def total_cost(self) -> Decimal:
        return self.input_cost + self.output_cost

    def to_dict(self) -> dict:
        return {
            "provider": self.provider,
            "vendor": self.vendor,
            "requests": self.requests,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "input_cost": str(self.input_cost),
            "output_cost": str(self.output_cost),
            "total_cost": str(self.total_cost),
        }


def token_cost(tokens: int, price_per_1m: Decimal) -> Decimal:
    return Decimal(tokens) * Decimal(price_per_1m) / MILLION


class UsageLedger:
    """Append-only, thread-safe record of every request that reached a provider."""

    def __init__(self):
        self._lock = threading.Lock()
        self._records: list[UsageRecord] = []
        self._imported: list[ProviderUsage] = []

    def append(self, record: UsageRecord) -> None:
        with self._lock:
            self._records.append(record)

    def record(self, config: ProviderConfig, seq: int, input_tokens: int, output_tokens: int, **extra) -> UsageRecord:
        rec = UsageRecord(
            seq=seq,
            provider=config.provider_id,
            vendor=config.group,
            input_tokens=input_tokens,
            output_tokens=output_tokens,
            input_cost=token_cost(input_tokens, config.input_price_per_1m),
            output_cost=token_cost(output_tokens, config.output_price_per_1m),
            **extra,
        )
        self.append(rec)
        return rec

    def add_summary(self, usage: ProviderUsage) -> None:
        """Merge pre-aggregated usage (e.g. a provider billing export)."""
        with self._lock:
            self._imported.append(usage)

    @property
    def records(self) -> list[UsageRecord]:
        with self._lock:
            return sorted(self._records, key=lambda r: (r.seq, r.attempt))

    def summaries(self) -> list[ProviderUsage]:
        with self._lock:
            records = list(self._records)
            imported = list(self._imported)
        by_provider: dict[str, ProviderUsage] = {}
        for rec in records:
            row = by_provider.setdefault(rec.provider, ProviderUsage(rec.provider, rec.vendor))
            row.requests += 1
            row.input_tokens += rec.input_tokens
            row.output_tokens += rec.output_tokens
            row.input_cost += rec.input_cost
            row.output_cost += rec.output_cost
        for usage in imported:
            row = by_provider.setdefault(usage.provider, ProviderUsage(usage.provider, usage.vendor))
            row.requests += usage.requests
            row.input_tokens += usage.input_tokens
            row.output_tokens += usage.output_tokens
            row.input_cost += usage.input_cost
            row.output_cost += usage.output_cost
            row.input_price_per_1m = usage.input_price_per_1m
            row.output_price_per_1m = usage.output_price_per_1m
        return list(by_provider.values())

    def snapshot(self) -> dict:
        return {"providers": [u.to_dict() for u in self.summaries()]}

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(rec.to_json() + "\n")

    @classmethod
    def read_jsonl(cls, path) -> "UsageLedger":
        ledger = cls()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    d = json.loads(line)
                    d["input_cost"] = Decimal(d["input_cost"])
                    d["output_cost"] = Decimal(d["output_cost"])
                    ledger.append(UsageRecord(**d))
        return ledger


# ---------------------------------------------------------------------------
# cost report

_QTY_RE = re.compile(r"^\s*\$?\s*([0-9][0-9,]*(?:\.[0-9]+)?)\s*([kKmM]?)\s*$")
_SCALE = {"": 1, "k": 1_000, "m": 1_000_000}


def parse_quantity(value) -> Decimal:
    """'10.833M' -> 10833000, '9.09k' -> 9090, '$1.072' -> 1.072, '30,975' -> 30975 (exact)."""
    if isinstance(value, (int, Decimal)):
        return Decimal(value)
    if isinstance(value, float):
        return Decimal(str(value))
    m = _QTY_RE.match(str(value))
    if not m:
        raise ValueError(f"not a quantity: {value!r}")
    return Decimal(m.group(1).replace(",", "")) * _SCALE[m.group(2).lower()]


def _resolution(value) -> Decimal:
    """Half a unit in the last written place of a claimed figure."""
    if isinstance(value, int):
        return Decimal("0.5")
    m = _QTY_RE.match(str(value))
    if not m:
        return Decimal(0)
    number = Decimal(m.group(1).replace(",", ""))
    exponent = number.as_tuple().exponent
    return Decimal(5).scaleb(exponent - 1) * _SCALE[m.group(2).lower()]


def _as_int(value, what: str) -> int:
    q = parse_quantity(value)
    if q != q.to_integral_value():
        raise ValueError(f"{what} must be a whole number, got {value!r}")
    return int(q)


def usage_from_row(row: Mapping) -> ProviderUsage:
    """One cost-table row: provider, vendor, requests, input_tokens, costs and optional prices."""
    def opt_price(key):
        return None if row.get(key) in (None, "") else parse_quantity(row[key])

    return ProviderUsage(
        provider=str(row["provider"]),
        vendor=str(row.get("vendor") or row["provider"]),
        requests=_as_int(row.get("requests", 0), "requests"),
        input_tokens=_as_int(row.get("input_tokens", 0), "input_tokens"),
        output_tokens=_as_int(row.get("output_tokens", 0), "output_tokens"),
        input_cost=parse_quantity(row.get("input_cost", 0)),
        output_cost=parse_quantity(row.get("output_cost", 0)),
        input_price_per_1m=opt_price("input_price_per_1m"),
        output_price_per_1m=opt_price("output_price_per_1m"),
    )


def _sum_usage(name: str, rows: Iterable[ProviderUsage]) -> ProviderUsage:
    total = ProviderUsage(name, name)
    for row in rows:
        total.requests += row.requests
        total.input_tokens += row.input_tokens
        total.output_tokens += row.output_tokens
        total.input_cost += row.input_cost
        total.output_cost += row.output_cost
    return total


@dataclass
class CostReport:
    rows: list[ProviderUsage]
    by_vendor: dict[str, ProviderUsage]
    total: ProviderUsage
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "providers": [r.to_dict() for r in self.rows],
            "vendors": {k: v.to_dict() for k, v in self.by_vendor.items()},
            "total": self.total.to_dict(),
            "flags": list(self.flags),
        }

    def format_table(self) -> str:
        header = f"{'provider':<28}{'requests':>10}{'input tok':>14}{'output tok':>12}{'$ input':>10}{'$ output':>10}{'$ total':>10}"
        lines = [header, "-" * len(header)]

        def line(r: ProviderUsage) -> str:
            return (
                f"{r.provider:<28}{r.requests:>10,}{r.input_tokens:>14,}{r.output_tokens:>12,}"
                f"{r.input_cost:>10}{r.output_cost:>10}{r.total_cost:>10}"
            )

        lines.extend(line(r) for r in self.rows)
        lines.append("-" * len(header))
        lines.extend(line(v) for v in self.by_vendor.values())
        lines.append(line(self.total))
        if self.flags:
            lines.append("")
            lines.extend(f"FLAG: {f}" for f in self.flags)
        return "\n".join(lines)


_CLAIM_FIELDS = {
    "total_cost": lambda u: u.total_cost,
    "input_cost": lambda u: u.input_cost,
    "output_cost": lambda u: u.output_cost,
    "requests": lambda u: Decimal(u.requests),
    "input_tokens": lambda u: Decimal(u.input_tokens),
    "output_tokens": lambda u: Decimal(u.output_tokens),
}


def ledger_report(ledger: UsageLedger, claims: Mapping | None = None) -> CostReport:
    """Per-provider rows, per-vendor and overall totals, plus consistency flags.

    ``claims`` maps a vendor name or ``"all"`` to stated figures
    (e.g. ``{"openai": {"total_cost": "6.39"}}``); a claim differing from
    the computed sum by more than its written precision is flagged. Rows
    carrying both a price and a cost are also checked for tokens x price = cost.
    """
    rows = ledger.summaries()
    vendors: dict[str, list[ProviderUsage]] = {}
    for row in rows:
        vendors.setdefault(row.vendor, []).append(row)
    by_vendor = {name: _sum_usage(name, members) for name, members in vendors.items()}
    total = _sum_usage("all", rows)
    flags = []
    for row in rows:
        for kind, tokens, price, cost in (
            ("input", row.input_tokens, row.input_price_per_1m, row.input_cost),
            ("output", row.output_tokens, row.output_price_per_1m, row.output_cost),
        ):
            if price is None or tokens == 0:
                continue
            implied = token_cost(tokens, price)
            if implied != cost:
                flags.append(
                    f"{row.provider}: {kind} cost {cost} != {tokens:,} tokens x ${price}/1M = {implied}"
                )
    for scope, figures in (claims or {}).items():
        usage = total if scope == "all" else by_vendor.get(scope)
        if usage is None:
            flags.append(f"claim for unknown scope {scope!r}")
            continue
        for name, claimed in figures.items():
            if name not in _CLAIM_FIELDS:
                raise ValueError(f"unknown claim field {name!r}")
            computed = _CLAIM_FIELDS[name](usage)
            stated = parse_quantity(claimed)
            if abs(computed - stated) > _resolution(claimed):
                flags.append(f"{scope}: stated {name} {claimed} but rows sum to {computed}")
    return CostReport(rows, by_vendor, total, flags)


def load_cost_table(path) -> tuple[UsageLedger, dict]:
    """JSON file {"rows": [...], "claims": {...}} -> ledger of summary rows + claims."""
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    ledger = UsageLedger()
    for row in data.get("rows", []):
        ledger.add_summary(usage_from_row(row))
    return ledger, data.get("claims", {})


# ---------------------------------------------------------------------------
# providers

_NUMBERED_RE = re.compile(r"^(\d+)\. (.*)$", re.MULTILINE)
_BRACKET_RE = re.compile(r"\[([^\[\]]*)\]")
_LOREM = "lorem ipsum dolor sit amet consectetur adipiscing elit sed do eiusmod tempor".split()


def prompt_items(prompt: str) -> list[str]:
    """Numbered input texts at the end of a rendered prompt."""
    return [m.group(2) for m in _NUMBERED_RE.finditer(prompt)]


def simplify_brackets(text: str) -> str:
    return _BRACKET_RE.sub(lambda m: f"{m.group(1)} (explained simply)", text)


class MockProvider:
    """Deterministic stand-in for a chat model.

    The response is a function of (behavior, prompt, call sequence number)
    only, so concurrent use is reproducible as long as sequence numbers are
    handed out in submission order.
    """

    def __init__(self, behavior: MockBehavior):
        self.behavior = behavior

    def _is_failure(self, seq: int) -> bool:
        mode = self.behavior.mode
        if mode == "garbage":
            return True
        if mode == "fail_every_k":
            return seq % self.behavior.k == 0
        if mode == "scripted":
            return seq in self.behavior.fail_on
        return False

    def _garbage(self, n: int, seq: int, python: bool) -> str:
        rng = random.Random(f"{self.behavior.seed}:{seq}")
        words = [" ".join(rng.choice(_LOREM) for _ in range(rng.randint(2, 6))) for _ in range(n + 1)]
        if rng.random() < 0.5:
            # one item too many
            return repr(words) if python else "\n".join(f"{i}. {w}" for i, w in enumerate(words, 1))
        words = words[:n]
        words[rng.randrange(n)] = ""
        return repr(words) if python else "\n".join(f"{i}. {w}".rstrip() for i, w in enumerate(words, 1))

    def respond(self, prompt: str, seq: int) -> str:
        if self.behavior.mode == "outage":
            raise ProviderError("mock", 503, "simulated outage")
        items = prompt_items(prompt)
        first = _NUMBERED_RE.search(prompt)
        # only the instructions decide the format, never the texts themselves
        python = "python list" in prompt[: first.start() if first else len(prompt)]
        if self._is_failure(seq):
            return self._garbage(max(len(items), 1), seq, python)
        if self.behavior.mode != "echo":
            items = [simplify_brackets(t) for t in items]
        if python:
            return repr(items)
        return "\n".join(f"{i}. {t}" for i, t in enumerate(items, 1))

    def complete(self, config: ProviderConfig, prompt: str, seq: int) -> Completion:
        text = self.respond(prompt, seq)
        return Completion(text, len(prompt.split()), len(text.split()), seq)


class HttpProvider:
    """OpenAI-style chat completions or Gemini generateContent over httpx."""

    DEFAULT_ENDPOINTS = {
        "openai": "https://api.openai.com/v1",
        "gemini": "https://generativelanguage.googleapis.com/v1beta",
    }

    def __init__(self, config: ProviderConfig, client: httpx.Client | None = None):
        self.config = config
        self.client = client or httpx.Client(timeout=config.timeout)

    def _api_key(self) -> str:
        env = self.config.auth_env
        key = os.environ.get(env) if env else None
        if not key:
            raise AuthMissing(f"{self.config.provider_id}: environment variable {env!r} is not set")
        return key

    def build_request(self, prompt: str) -> tuple[str, dict, dict]:
        cfg = self.config
        base = (cfg.endpoint or self.DEFAULT_ENDPOINTS[cfg.kind]).rstrip("/")
        model = cfg.model or cfg.provider_id
        key = self._api_key()
        if cfg.kind == "openai":
            return (
                f"{base}/chat/completions",
                {"Authorization": f"Bearer {key}"},
                {"model": model, "messages": [{"role": "user", "content": prompt}]},
            )
        return (
            f"{base}/models/{model}:generateContent",
            {"x-goog-api-key": key},
            {"contents": [{"role": "user", "parts": [{"text": prompt}]}]},
        )

    def parse_body(self, body: dict) -> tuple[str, int, int]:
        if self.config.kind == "openai":
            text = body["choices"][0]["message"].get("content") or ""
            usage = body.get("usage", {})
            return text, int(usage.get("prompt_tokens", 0)), int(usage.get("completion_tokens", 0))
        candidates = body.get("candidates") or [{}]
        parts = candidates[0].get("content", {}).get("parts", [])
        text = "".join(p.get("text", "") for p in parts)
        usage = body.get("usageMetadata", {})
        return text, int(usage.get("promptTokenCount", 0)), int(usage.get("candidatesTokenCount", 0))

    def send(self, prompt: str) -> httpx.Response:
        url, headers, payload = self.build_request(prompt)
        return self.client.post(url, headers=headers, json=payload, timeout=self.config.timeout)


# ---------------------------------------------------------------------------
# gateway


class _RateLimiter:
    def __init__(self, per_minute: float | None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 60.0 / per_minute if per_minute else 0.0
        self._next = 0.0
        self._lock = threading.Lock()
        self._clock = clock
        self._sleep = sleep

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            slot = max(now, self._next)
            self._next = slot + self.interval
        if slot > now:
            self._sleep(slot - now)


class Gateway:
    """Routes prompts to configured providers with bounded parallelism and retries."""

    def __init__(
        self,
        providers: Iterable[ProviderConfig],
        ledger: UsageLedger | None = None,
        *,
        http_client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
        backoff_base: float = 1.0,
        backoff_cap: float = 30.0,
        clock: Callable[[], float] = time.time,
    ):
        self.providers: dict[str, ProviderConfig] = {}
        for cfg in providers:
            if cfg.provider_id in self.providers:
                raise ValueError(f"duplicate provider id {cfg.provider_id!r}")
            self.providers[cfg.provider_id] = cfg
        self.ledger = ledger if ledger is not None else UsageLedger()
        self._sleep = sleep
        self._backoff_base = backoff_base
        self._backoff_cap = backoff_cap
        self._clock = clock
        self._seq = 0
        self._seq_lock = threading.Lock()
        self._adapters: dict[str, object] = {}
        self._semaphores = {p: threading.BoundedSemaphore(c.max_parallel) for p, c in self.providers.items()}
        self._limiters = {p: _RateLimiter(c.requests_per_minute, sleep=sleep) for p, c in self.providers.items()}
        self._http_client = http_client
        workers = max(1, sum(c.max_parallel for c in self.providers.values()))
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="gateway")

    def close(self) -> None:
        self._pool.shutdown(wait=True, cancel_futures=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _adapter(self, cfg: ProviderConfig):
        if cfg.provider_id not in self._adapters:
            if cfg.kind == "mock":
                self._adapters[cfg.provider_id] = MockProvider(cfg.mock)
            else:
                self._adapters[cfg.provider_id] = HttpProvider(cfg, self._http_client)
        return self._adapters[cfg.provider_id]

    def _next_seq(self) -> int:
        with self._seq_lock:
            self._seq += 1
            return self._seq

    def config(self, provider_id: str) -> ProviderConfig:
        try:
            return self.providers[provider_id]
        except KeyError:
            raise GatewayError(f"unknown provider {provider_id!r}") from None

    def submit(self, provider_id: str, prompt: str) -> Future:
        """Queue a completion; its sequence number is fixed now, in submission order."""
        cfg = self.config(provider_id)
        seq = self._next_seq()
        return self._pool.submit(self._complete, cfg, prompt, seq)

    def complete(self, provider_id: str, prompt: str) -> Completion:
        cfg = self.config(provider_id)
        return self._complete(cfg, prompt, self._next_seq())

    def _complete(self, cfg: ProviderConfig, prompt: str, seq: int) -> Completion:
        with self._semaphores[cfg.provider_id]:
            adapter = self._adapter(cfg)
            if isinstance(adapter, MockProvider):
                try:
                    result = adapter.complete(cfg, prompt, seq)
                except ProviderError as exc:
                    self.ledger.record(cfg, seq, 0, 0, outcome=f"http_{exc.http_status}", timestamp=0.0)
                    raise ProviderError(cfg.provider_id, exc.http_status, "mock outage") from None
                self.ledger.record(cfg, seq, result.input_tokens, result.output_tokens)
                return result
            return self._complete_http(cfg, adapter, prompt, seq)

    def _backoff(self, attempt: int) -> float:
        return min(self._backoff_cap, self._backoff_base * 2 ** (attempt - 1))

    def _complete_http(self, cfg: ProviderConfig, adapter: HttpProvider, prompt: str, seq: int) -> Completion:
        last_status = None
        for attempt in range(1, cfg.max_retries + 2):
            self._limiters[cfg.provider_id].wait()
            started = time.monotonic()
            try:
                response = adapter.send(prompt)
            except httpx.TimeoutException:
                last_status = "timeout"
                log.warning("%s: timeout (attempt %d)", cfg.provider_id, attempt)
            except httpx.TransportError as exc:
                last_status = "transport"
                log.warning("%s: transport error %s (attempt %d)", cfg.provider_id, exc, attempt)
            else:
                latency = time.monotonic() - started
                if response.status_code == 200:
                    try:
                        text, tin, tout = adapter.parse_body(response.json())
                    except (ValueError, KeyError, IndexError, TypeError) as exc:
                        self.ledger.record(cfg, seq, 0, 0, outcome="bad_body", attempt=attempt,
                                           latency_s=latency, timestamp=self._clock())
                        raise ProviderError(cfg.provider_id, 200, f"unreadable body: {exc}") from None
                    self.ledger.record(cfg, seq, tin, tout, attempt=attempt, latency_s=latency,
                                       timestamp=self._clock())
                    return Completion(text, tin, tout, seq)
                self.ledger.record(cfg, seq, 0, 0, outcome=f"http_{response.status_code}",
                                   attempt=attempt, latency_s=latency, timestamp=self._clock())
                if response.status_code in (401, 403):
                    raise AuthMissing(f"{cfg.provider_id}: credentials rejected (HTTP {response.status_code})")
                if response.status_code not in TRANSIENT_STATUS:
                    raise ProviderError(cfg.provider_id, response.status_code, response.text[:200])
                last_status = response.status_code
                log.warning("%s: HTTP %s (attempt %d)", cfg.provider_id, last_status, attempt)
            if attempt <= cfg.max_retries:
                self._sleep(self._backoff(attempt))
        if last_status == "timeout":
            raise Timeout(f"{cfg.provider_id}: timed out after {cfg.max_retries + 1} attempts")
        status = last_status if isinstance(last_status, int) else None
        raise ProviderError(cfg.provider_id, status, f"gave up after {cfg.max_retries + 1} attempts")
