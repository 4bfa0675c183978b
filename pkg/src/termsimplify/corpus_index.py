"""Reference-corpus ingestion, IDF indexes and task-dataset loading."""

from __future__ import annotations

import csv
import json
import math
import re
import string
import unicodedata
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Callable, Iterable, Iterator, Mapping

INDEX_FORMAT_VERSION = 1
HISTOGRAM_BUCKET_WIDTH = 25
MAX_PHRASE_TOKENS = 4

_TOKEN_RE = re.compile(r"\w+(?:[-'’]\w+)*")
_WS_RE = re.compile(r"\s+")


class EmptyCorpus(ValueError):
    pass


class ParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class DuplicateId(ValueError):
    pass


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str


@dataclass(frozen=True)
class TextRecord:
    pair_id: str
    para_id: str
    sent_id: str
    text: str

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.pair_id, self.para_id, self.sent_id)


def _is_punct(ch: str) -> bool:
    return ch in string.punctuation or unicodedata.category(ch).startswith("P")


def normalize_term(raw: str) -> str:
    """Canonical form used for every index key and lookup.

    NFC, lowercase, outer punctuation stripped, whitespace runs collapsed.
    May return an empty string; callers skip those.
    """
    text = unicodedata.normalize("NFC", raw).lower()
    text = _WS_RE.sub(" ", text).strip()
    start, end = 0, len(text)
    while start < end and (_is_punct(text[start]) or text[start].isspace()):
        start += 1
    while end > start and (_is_punct(text[end - 1]) or text[end - 1].isspace()):
        end -= 1
    return text[start:end]


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; hyphenated and apostrophe compounds stay whole."""
    return _TOKEN_RE.findall(unicodedata.normalize("NFC", text).lower())


def phrase_key(phrase: str) -> str:
    """Index key of a (possibly multi-word) phrase: its tokens joined by spaces."""
    return " ".join(tokenize(normalize_term(phrase)))


# IDF weightings, keyed by the name persisted in index headers.
def _idf_log_ratio(n: int, df: float) -> float:
    return math.log(n / df)


def _idf_smoothed(n: int, df: float) -> float:
    return math.log((n + 1) / (df + 1)) + 1.0


def _idf_bm25(n: int, df: float) -> float:
    return math.log(1.0 + (n - df + 0.5) / (df + 0.5))


IDF_FORMULAS: dict[str, Callable[[int, float], float]] = {
    "ln(N/df)": _idf_log_ratio,
    "ln((N+1)/(df+1))+1": _idf_smoothed,
    "bm25": _idf_bm25,
}
DEFAULT_FORMULA = "ln(N/df)"
# Unseen terms are treated as if they occurred in half a document.
OOV_DF = 0.5


@dataclass(frozen=True)
class IdfIndex:
    corpus_label: str
    doc_count: int
    df: Mapping[str, int]
    formula: str = DEFAULT_FORMULA
    _idf: Mapping[str, float] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.doc_count < 1:
            raise EmptyCorpus(f"index {self.corpus_label!r} has no documents")
        if self.formula not in IDF_FORMULAS:
            raise ValueError(f"unknown IDF formula {self.formula!r}")
        fn = IDF_FORMULAS[self.formula]
        df = MappingProxyType(dict(self.df))
        object.__setattr__(self, "df", df)
        object.__setattr__(
            self, "_idf", MappingProxyType({t: fn(self.doc_count, d) for t, d in df.items()})
        )

    @property
    def idf_map(self) -> Mapping[str, float]:
        return self._idf

    @property
    def oov_idf(self) -> float:
        return IDF_FORMULAS[self.formula](self.doc_count, OOV_DF)

    def idf(self, term: str) -> float:
        key = phrase_key(term)
        value = self._idf.get(key)
        return self.oov_idf if value is None else value

    def __contains__(self, term: str) -> bool:
        return phrase_key(term) in self._idf

    def __len__(self) -> int:
        return len(self._idf)

    def save(self, path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            header = {
                "version": INDEX_FORMAT_VERSION,
                "label": self.corpus_label,
                "doc_count": self.doc_count,
                "formula": self.formula,
            }
            fh.write(json.dumps(header, ensure_ascii=False) + "\n")
            for term in sorted(self.df):
                fh.write(json.dumps({"term": term, "df": self.df[term]}, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path, formula: str | None = None) -> "IdfIndex":
        """Read a persisted index; IDF values are recomputed from the stored df."""
        path = Path(path)
        with path.open(encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("version") != INDEX_FORMAT_VERSION:
                raise ValueError(f"{path}: unsupported index version {header.get('version')!r}")
            df = {}
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    df[row["term"]] = int(row["df"])
        return cls(header["label"], int(header["doc_count"]), df, formula or header["formula"])


def document_terms(text: str, max_tokens: int = MAX_PHRASE_TOKENS) -> set[str]:
    """All distinct token n-grams (1..max_tokens) of a document, as index keys."""
    tokens = tokenize(text)
    terms = set()
    for n in range(1, max_tokens + 1):
        for i in range(len(tokens) - n + 1):
            terms.add(" ".join(tokens[i : i + n]))
    return terms


def _count_chunk(texts: list[str], max_tokens: int) -> tuple[int, Counter]:
    counts: Counter = Counter()
    for text in texts:
        counts.update(document_terms(text, max_tokens))
    return len(texts), counts


def _chunks(docs: Iterable[Document], size: int) -> Iterator[list[str]]:
    chunk = []
    for doc in docs:
        chunk.append(doc.text)
        if len(chunk) >= size:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


def build_idf_index(
    docs: Iterable[Document],
    label: str,
    formula: str = DEFAULT_FORMULA,
    max_tokens: int = MAX_PHRASE_TOKENS,
    workers: int = 1,
    chunk_size: int = 2000,
) -> IdfIndex:
    """Count document frequencies of every 1..max_tokens phrase and freeze them.

    With ``workers > 1`` chunks are counted in separate processes; the merged
    counts are identical to the sequential pass.
    """
    n_docs = 0
    df: Counter = Counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_count_chunk, c, max_tokens) for c in _chunks(docs, chunk_size)]
            for fut in futures:
                n, counts = fut.result()
                n_docs += n
                df.update(counts)
    else:
        for doc in docs:
            n_docs += 1
            df.update(document_terms(doc.text, max_tokens))
    if n_docs == 0:
        raise EmptyCorpus(f"corpus {label!r} contains no documents")
    return IdfIndex(label, n_docs, dict(df), formula)


def iter_corpus(path) -> Iterator[Document]:
    """Documents from a directory of text files or a JSON-lines file."""
    path = Path(path)
    seen: set[str] = set()
    if path.is_dir():
        for file in sorted(p for p in path.rglob("*") if p.is_file()):
            text = file.read_text(encoding="utf-8")
            doc_id = str(file.relative_to(path))
            if text.strip():
                yield Document(doc_id, text)
        return
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                doc = Document(str(row["doc_id"]), row["text"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(path, lineno, f"bad corpus record: {exc}") from exc
            if doc.doc_id in seen:
                raise DuplicateId(f"{path}:{lineno}: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            if doc.text.strip():
                yield doc


# ---------------------------------------------------------------------------
# task dataset

DATASET_FIELDS = ("pair_id", "para_id", "sent_id", "text")


@dataclass(frozen=True)
class DatasetStats:
    total_texts: int
    unique_texts: int
    mean_length_chars: float
    length_histogram: list[tuple[int, int, int]]

    def to_dict(self) -> dict:
        return {
            "total_texts": self.total_texts,
            "unique_texts": self.unique_texts,
            "mean_length_chars": self.mean_length_chars,
            "length_histogram": [
                {"bucket_lo": lo, "bucket_hi": hi, "count": c} for lo, hi, c in self.length_histogram
            ],
        }

    def write_histogram_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bucket_lo", "bucket_hi", "count"])
            writer.writerows(self.length_histogram)


def length_histogram(lengths: list[int], width: int = HISTOGRAM_BUCKET_WIDTH):
    """Contiguous half-open buckets [lo, hi) of fixed width from the bucket holding min to the one holding max."""
    if not lengths:
        return []
    first = (min(lengths) // width) * width
    last = (max(lengths) // width) * width
    counts = Counter((length // width) * width for length in lengths)
    return [(lo, lo + width, counts.get(lo, 0)) for lo in range(first, last + width, width)]


def compute_stats(records: list[TextRecord], width: int = HISTOGRAM_BUCKET_WIDTH) -> DatasetStats:
    unique = list(dict.fromkeys(r.text for r in records))
    lengths = [len(t) for t in unique]
    mean = sum(lengths) / len(lengths) if lengths else 0.0
    return DatasetStats(len(records), len(unique), mean, length_histogram(lengths, width))


def _row_to_record(row: dict, path, lineno: int) -> TextRecord:
    try:
        values = [row[name] for name in DATASET_FIELDS]
    except KeyError as exc:
        raise ParseError(path, lineno, f"missing field {exc.args[0]!r}") from None
    if not all(isinstance(v, (str, int)) for v in values):
        raise ParseError(path, lineno, "fields must be strings")
    pair_id, para_id, sent_id, text = (str(v) for v in values)
    if not text.strip():
        raise ParseError(path, lineno, "empty text")
    return TextRecord(pair_id, para_id, sent_id, text)


def _read_tsv(path: Path) -> Iterator[tuple[int, TextRecord]]:
    with path.open(encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\r\n").split("\t")
        missing = [f for f in DATASET_FIELDS if f not in header]
        if missing:
            raise ParseError(path, 1, f"TSV header lacks columns {missing}")
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            cells = line.split("\t")
            if len(cells) != len(header):
                raise ParseError(path, lineno, f"expected {len(header)} fields, found {len(cells)}")
            yield lineno, _row_to_record(dict(zip(header, cells)), path, lineno)


def _read_jsonl(path: Path) -> Iterator[tuple[int, TextRecord]]:
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(path, lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(row, dict):
                raise ParseError(path, lineno, "record is not an object")
            yield lineno, _row_to_record(row, path, lineno)


def read_records(path) -> list[TextRecord]:
    path = Path(path)
    reader = _read_tsv if path.suffix.lower() in (".tsv", ".txt") else _read_jsonl
    records = []
    seen: dict[tuple[str, str, str], int] = {}
    for lineno, record in reader(path):
        if record.key in seen:
            raise DuplicateId(
                f"{path}:{lineno}: id {record.key} already defined on line {seen[record.key]}"
            )
        seen[record.key] = lineno
        records.append(record)
    return records


def load_dataset(path) -> tuple[list[TextRecord], DatasetStats]:
    """Records in file order plus statistics over the unique raw texts."""
    records = read_records(path)
    return records, compute_stats(records)
