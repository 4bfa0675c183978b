"""Prompt templates, batching, rendering and strict response parsing."""

from __future__ import annotations

import ast
import hashlib
import random
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

DEFAULT_BATCH_SIZE = 10
BATCH_COUNT_TOKEN = "10"

PRE_STEP_IDS = ("C", "R")
SIMPLIFY_IDS = ("P1", "P2", "PNI1", "PN1", "PI2")
TEMPLATE_IDS = PRE_STEP_IDS + SIMPLIFY_IDS


class ExpectedFormat(str, Enum):
    ENUMERATED_LIST = "enumerated_list"
    PLAIN_LIST = "plain_list"
    PYTHON_LIST = "python_list"


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    batch_text: str
    single_text: str
    expected_format: ExpectedFormat = ExpectedFormat.ENUMERATED_LIST

    def text_for(self, n: int) -> str:
        if n == 1:
            return self.single_text
        if n == DEFAULT_BATCH_SIZE:
            return self.batch_text
        return re.sub(rf"\b{BATCH_COUNT_TOKEN}\b", str(n), self.batch_text)

    def checksum(self) -> dict[str, str]:
        return {
            "batch": hashlib.sha256(self.batch_text.encode("utf-8")).hexdigest(),
            "single": hashlib.sha256(self.single_text.encode("utf-8")).hexdigest(),
        }


def _format_for(template_id: str) -> ExpectedFormat:
    return ExpectedFormat.PYTHON_LIST if template_id == "PN1" else ExpectedFormat.ENUMERATED_LIST


def _read_template_file(name: str, directory: Path | None) -> str:
    if directory is not None:
        raw = (Path(directory) / name).read_text(encoding="utf-8")
    else:
        raw = resources.files(__package__).joinpath("prompts", name).read_text(encoding="utf-8")
    # files end with a single newline that is not part of the prompt
    return raw[:-1] if raw.endswith("\n") else raw


@lru_cache(maxsize=None)
def _builtin(template_id: str) -> PromptTemplate:
    return PromptTemplate(
        template_id,
        _read_template_file(f"{template_id}.batch.txt", None),
        _read_template_file(f"{template_id}.single.txt", None),
        _format_for(template_id),
    )


def load_template(template_id: str, directory=None, expected_format: str | None = None) -> PromptTemplate:
    """Built-in template by id, or ``<id>.batch.txt``/``<id>.single.txt`` from ``directory``."""
    if directory is None:
        if template_id not in TEMPLATE_IDS:
            raise KeyError(f"unknown prompt id {template_id!r}; known: {', '.join(TEMPLATE_IDS)}")
        template = _builtin(template_id)
    else:
        template = PromptTemplate(
            template_id,
            _read_template_file(f"{template_id}.batch.txt", Path(directory)),
            _read_template_file(f"{template_id}.single.txt", Path(directory)),
            _format_for(template_id),
        )
    if expected_format is not None:
        template = PromptTemplate(
            template.id, template.batch_text, template.single_text, ExpectedFormat(expected_format)
        )
    return template


@dataclass(frozen=True)
class Batch:
    batch_id: int
    items: tuple[tuple[Any, str], ...]

    @property
    def texts(self) -> list[str]:
        return [text for _, text in self.items]

    @property
    def refs(self) -> list[Any]:
        return [ref for ref, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)


def shuffle_and_batch(items: Sequence[tuple[Any, str]], batch_size: int, seed: int) -> list[Batch]:
    """Seeded permutation of ``(ref, text)`` pairs cut into consecutive batches."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = list(range(len(items)))
    random.Random(seed).shuffle(order)
    permuted = [items[i] for i in order]
    return [
        Batch(n, tuple(permuted[i : i + batch_size]))
        for n, i in enumerate(range(0, len(permuted), batch_size))
    ]


def _one_line(text: str) -> str:
    lines = text.splitlines()
    return text if lines == [text] else " ".join(lines)


def render(template: PromptTemplate, batch: Batch | Sequence[str]) -> str:
    texts = batch.texts if isinstance(batch, Batch) else list(batch)
    if not texts:
        raise ValueError("cannot render an empty batch")
    body = "\n".join(f"{i}. {_one_line(t)}" for i, t in enumerate(texts, 1))
    return template.text_for(len(texts)) + "\n" + body


# ---------------------------------------------------------------------------
# response parsing


class ParseFailure(Exception):
    REASONS = ("wrong_count", "empty_item", "malformed_list", "no_list_found")

    def __init__(self, reason: str, detail: str = "", raw: str = ""):
        assert reason in self.REASONS, reason
        super().__init__(f"{reason}: {detail}" if detail else reason)
        self.reason = reason
        self.detail = detail
        self.raw = raw


@dataclass(frozen=True)
class ParsedResponse:
    items: tuple[str, ...]
    raw: str


_FENCE_RE = re.compile(r"^\s*```")
_ITEM_RE = re.compile(r"^\s*(?:\*\*)?(\d{1,4})(?:\.|\)|\s+-)(?:\*\*)?(?:\s+(.*)|\s*)$")


def _strip_fences(raw: str) -> str:
    return "\n".join(line for line in raw.splitlines() if not _FENCE_RE.match(line))


def _parse_enumerated(text: str, expected: int) -> list[str]:
    items: list[list[str]] = []
    in_item = False
    for line in text.splitlines():
        m = _ITEM_RE.match(line)
        if m:
            number = int(m.group(1))
            if not items:
                if number != 1:
                    in_item = False
                    continue
            elif number != len(items) + 1:
                if number <= len(items):
                    # numbering restarted: a second list or trailing prose
                    break
                raise ParseFailure(
                    "malformed_list", f"item {len(items) + 1} expected, found {number}"
                )
            items.append([(m.group(2) or "").strip()])
            in_item = True
        elif not line.strip():
            in_item = False
        elif in_item:
            items[-1].append(line.strip())
    if not items:
        if expected == 1 and text.strip():
            # a lone unnumbered answer to a single-text prompt
            return [" ".join(text.split())]
        raise ParseFailure("no_list_found", "no item numbered 1")
    return [" ".join(part for part in parts if part) for parts in items]


def _scan_python_list(text: str) -> list[str]:
    start = None
    for m in re.finditer(r"\[", text):
        rest = text[m.end() :].lstrip()
        if rest[:1] in ("'", '"') or rest[:1] == "]":
            start = m.end()
            break
    if start is None:
        raise ParseFailure("no_list_found", "no bracketed string list")
    items = []
    pos = start
    n = len(text)

    def skip_ws(p: int) -> int:
        while p < n and text[p].isspace():
            p += 1
        return p

    pos = skip_ws(pos)
    if pos < n and text[pos] == "]":
        return items
    while True:
        pos = skip_ws(pos)
        if pos >= n or text[pos] not in "'\"":
            raise ParseFailure("malformed_list", f"expected a quoted string at offset {pos}")
        quote = text[pos]
        end = pos + 1
        while end < n and text[end] != quote:
            end += 2 if text[end] == "\\" else 1
        if end >= n:
            raise ParseFailure("malformed_list", "unterminated string")
        literal = text[pos : end + 1]
        try:
            value = ast.literal_eval(literal)
        except (ValueError, SyntaxError):
            # raw newlines inside the quotes are not valid Python; fold them
            try:
                value = ast.literal_eval(literal.replace("\r", " ").replace("\n", " "))
            except (ValueError, SyntaxError) as exc:
                raise ParseFailure("malformed_list", f"bad string literal: {exc}") from None
        items.append(value)
        pos = skip_ws(end + 1)
        if pos < n and text[pos] == ",":
            pos = skip_ws(pos + 1)
            if pos < n and text[pos] == "]":
                return items
            continue
        if pos < n and text[pos] == "]":
            return items
        raise ParseFailure("malformed_list", f"expected ',' or ']' at offset {pos}")


def parse_response(raw, expected: int, fmt: ExpectedFormat | str = ExpectedFormat.ENUMERATED_LIST) -> ParsedResponse:
    """Recover exactly ``expected`` non-empty items from a model response.

    Raises ParseFailure with one of its REASONS otherwise; never raises
    anything else, whatever the input.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8", errors="replace")
    if not isinstance(raw, str):
        raw = "" if raw is None else str(raw)
    fmt = ExpectedFormat(fmt)
    try:
        text = _strip_fences(raw)
        if fmt is ExpectedFormat.PYTHON_LIST:
            items = [" ".join(str(x).splitlines()).strip() for x in _scan_python_list(text)]
        elif fmt is ExpectedFormat.PLAIN_LIST:
            items = [line.strip() for line in text.splitlines() if line.strip()]
        else:
            items = _parse_enumerated(text, expected)
    except ParseFailure as exc:
        exc.raw = raw
        raise
    except RecursionError:  # pragma: no cover - defensive
        raise ParseFailure("malformed_list", "unparseable", raw) from None
    if any(not item.strip() for item in items):
        raise ParseFailure("empty_item", f"{sum(not i.strip() for i in items)} empty item(s)", raw)
    if len(items) != expected:
        raise ParseFailure("wrong_count", f"expected {expected} items, got {len(items)}", raw)
    return ParsedResponse(tuple(item.strip() for item in items), raw)
