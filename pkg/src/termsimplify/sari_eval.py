"""SARI scoring, run evaluation against reference simplifications, and token diffs."""

from __future__ import annotations

import csv
import html
import json
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .corpus_index import read_records
from .pipeline import load_submission

NGRAM_ORDERS = (1, 2, 3, 4)

_SARI_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class EmptyReferenceSet(ValueError):
    pass


class AlignmentError(ValueError):
    def __init__(self, message: str, missing: Sequence = (), extra: Sequence = ()):
        super().__init__(message)
        self.missing = list(missing)
        self.extra = list(extra)


def sari_tokenize(text: str) -> list[str]:
    """Lowercase (same casing rule as index terms) and split with punctuation detached."""
    return _SARI_TOKEN_RE.findall(unicodedata.normalize("NFC", text).lower())


@dataclass(frozen=True)
class EvalInstance:
    source: str
    output: str
    references: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "references", tuple(self.references))
        if not self.references:
            raise EmptyReferenceSet("an evaluation instance needs at least one reference")


@dataclass(frozen=True)
class SariBreakdown:
    f_add: dict[int, float]
    f_keep: dict[int, float]
    p_del: dict[int, float]
    final: float

    def to_dict(self) -> dict:
        return {
            "final": self.final,
            **{f"f_add_{n}": v for n, v in self.f_add.items()},
            **{f"f_keep_{n}": v for n, v in self.f_keep.items()},
            **{f"p_del_{n}": v for n, v in self.p_del.items()},
        }


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def sari_ngram(source: Counter, output: Counter, refs: Sequence[Counter]) -> tuple[float, float, float]:
    """(f_add, f_keep, p_del) for one n-gram order.

    Reference counts are averaged over the m references; to keep the
    arithmetic exact every count is scaled by m instead.
    """
    m = len(refs)
    ref_sum: Counter = Counter()
    for rc in refs:
        ref_sum.update(rc)

    added = {g for g in output if g not in source}
    correct_add = len(added & set(ref_sum))
    p_add = _ratio(correct_add, len(added))
    r_add = _ratio(correct_add, len(set(ref_sum) - set(source)))

    kept = {g: min(output[g], source[g]) * m for g in output if g in source}
    keep_target = {g: min(s * m, ref_sum[g]) for g, s in source.items() if ref_sum[g] > 0}
    keep_good = sum(min(k, keep_target.get(g, 0)) for g, k in kept.items())
    p_keep = _ratio(keep_good, sum(kept.values()))
    r_keep = _ratio(keep_good, sum(keep_target.values()))

    deleted = {g: (s - output[g]) * m for g, s in source.items() if s > output[g]}
    del_target = {g: s * m - ref_sum[g] for g, s in source.items() if s * m > ref_sum[g]}
    del_good = sum(min(d, del_target.get(g, 0)) for g, d in deleted.items())
    p_del = _ratio(del_good, sum(deleted.values()))

    return _f1(p_add, r_add), _f1(p_keep, r_keep), p_del


def sari(instance: EvalInstance) -> SariBreakdown:
    src = sari_tokenize(instance.source)
    out = sari_tokenize(instance.output)
    refs = [sari_tokenize(r) for r in instance.references]
    f_add, f_keep, p_del = {}, {}, {}
    for n in NGRAM_ORDERS:
        f_add[n], f_keep[n], p_del[n] = sari_ngram(
            _ngrams(src, n), _ngrams(out, n), [_ngrams(r, n) for r in refs]
        )
    per_order = [(f_add[n] + f_keep[n] + p_del[n]) / 3 for n in NGRAM_ORDERS]
    final = 100.0 * sum(per_order) / len(per_order)
    return SariBreakdown(f_add, f_keep, p_del, final)


def sari_score(source: str, output: str, references: Sequence[str]) -> float:
    return sari(EvalInstance(source, output, tuple(references))).final


# ---------------------------------------------------------------------------
# token diff

@dataclass(frozen=True)
class DiffSpan:
    op: str  # insert | delete | replace
    source_range: tuple[int, int]
    output_range: tuple[int, int]
    source_text: str
    output_text: str


def _lcs_table(a: Sequence[str], b: Sequence[str]) -> list[list[int]]:
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) - 1, -1, -1):
        row, below = table[i], table[i + 1]
        for j in range(len(b) - 1, -1, -1):
            row[j] = below[j + 1] + 1 if a[i] == b[j] else max(below[j], row[j + 1])
    return table


def diff_report(source: str, output: str) -> list[DiffSpan]:
    """Changed spans of a whitespace-token LCS alignment between source and output."""
    a, b = source.split(), output.split()
    table = _lcs_table(a, b)
    matches = []
    i = j = 0
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            matches.append((i, j))
            i += 1
            j += 1
        elif table[i + 1][j] >= table[i][j + 1]:
            i += 1
        else:
            j += 1
    matches.append((len(a), len(b)))
    spans = []
    pi = pj = 0
    for mi, mj in matches:
        if mi > pi or mj > pj:
            op = "replace" if mi > pi and mj > pj else ("delete" if mi > pi else "insert")
            spans.append(DiffSpan(op, (pi, mi), (pj, mj), " ".join(a[pi:mi]), " ".join(b[pj:mj])))
        pi, pj = mi + 1, mj + 1
    return spans


def diff_html(source: str, output: str) -> str:
    """Output text with inserted/replaced tokens highlighted and deleted ones struck through."""
    b = output.split()
    parts = []
    pos = 0
    for span in diff_report(source, output):
        lo, hi = span.output_range
        parts.append(html.escape(" ".join(b[pos:lo])))
        if span.source_text:
            parts.append(f'<del>{html.escape(span.source_text)}</del>')
        if span.output_text:
            parts.append(f'<ins>{html.escape(span.output_text)}</ins>')
        pos = hi
    parts.append(html.escape(" ".join(b[pos:])))
    return " ".join(p for p in parts if p)


# ---------------------------------------------------------------------------
# run evaluation

Key = tuple[str, str, str]
_ID_FIELDS = ("pair_id", "para_id", "sent_id")


def load_references(path) -> dict[Key, list[str]]:
    """TSV (id columns + one or more reference columns) or JSON-lines with ``references``/``reference``."""
    path = Path(path)
    refs: dict[Key, list[str]] = {}
    if path.suffix.lower() in (".tsv", ".txt"):
        with path.open(encoding="utf-8", newline="") as fh:
            header = fh.readline().rstrip("\r\n").split("\t")
            if tuple(header[:3]) != _ID_FIELDS or len(header) < 4:
                raise ValueError(f"{path}: header must be pair_id, para_id, sent_id, <reference columns>")
            for lineno, line in enumerate(fh, 2):
                line = line.rstrip("\r\n")
                if not line:
                    continue
                cells = line.split("\t")
                if len(cells) != len(header):
                    raise ValueError(f"{path}:{lineno}: expected {len(header)} columns, found {len(cells)}")
                key = (cells[0], cells[1], cells[2])
                refs[key] = [c for c in cells[3:] if c.strip()]
    else:
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                row = json.loads(line)
                key = tuple(str(row[f]) for f in _ID_FIELDS)
                values = row.get("references")
                if values is None:
                    values = [row["reference"]]
                refs[key] = [str(v) for v in values if str(v).strip()]
    for key, values in refs.items():
        if not values:
            raise EmptyReferenceSet(f"{path}: no reference for {key}")
    return refs


def _check_alignment(name: str, expected: Sequence[Key], got: Mapping[Key, object]) -> None:
    expected_set = set(expected)
    missing = [k for k in expected if k not in got]
    extra = [k for k in got if k not in expected_set]
    if missing or extra:
        preview = ", ".join("/".join(k) for k in (missing + extra)[:10])
        raise AlignmentError(
            f"{name}: {len(missing)} id(s) missing, {len(extra)} unexpected (e.g. {preview})", missing, extra
        )


@dataclass
class EvalReport:
    reference_sets: dict[str, dict] = field(default_factory=dict)
    instances: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"reference_sets": self.reference_sets, "n_instances": len(self.instances) // max(1, len(self.reference_sets))}

    def write(self, out_dir, sources: Mapping[Key, str] | None = None, outputs: Mapping[Key, str] | None = None) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "eval_summary.json").write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        if self.instances:
            with (out_dir / "eval_instances.csv").open("w", newline="", encoding="utf-8") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(self.instances[0]))
                writer.writeheader()
                writer.writerows(self.instances)
        if sources is not None and outputs is not None:
            (out_dir / "diff_report.html").write_text(render_diff_html(sources, outputs), encoding="utf-8")


def evaluate_run(submission, sources, references: Mapping[str, object]) -> tuple[EvalReport, dict, dict]:
    """Mean SARI of a submission per reference set, with an identity-output baseline row.

    ``references`` maps a label (e.g. "simple original") to a reference
    file path or an already loaded ``{key: [refs]}`` mapping.
    """
    records = read_records(sources)
    keys = [r.key for r in records]
    source_text = {r.key: r.text for r in records}
    outputs = dict(load_submission(submission))
    _check_alignment("submission", keys, outputs)
    report = EvalReport()
    for label, ref_src in references.items():
        refs = ref_src if isinstance(ref_src, Mapping) else load_references(ref_src)
        _check_alignment(f"references[{label}]", keys, refs)
        system_scores, identity_scores = [], []
        for key in keys:
            system = sari(EvalInstance(source_text[key], outputs[key], tuple(refs[key])))
            identity = sari(EvalInstance(source_text[key], source_text[key], tuple(refs[key])))
            system_scores.append(system.final)
            identity_scores.append(identity.final)
            report.instances.append(
                {
                    "reference_set": label,
                    "pair_id": key[0],
                    "para_id": key[1],
                    "sent_id": key[2],
                    "sari": system.final,
                    "identity_sari": identity.final,
                }
            )
        n = len(keys)
        report.reference_sets[label] = {
            "mean_sari": sum(system_scores) / n if n else 0.0,
            "identity_baseline": sum(identity_scores) / n if n else 0.0,
            "n": n,
        }
    return report, source_text, outputs


def render_diff_html(sources: Mapping[Key, str], outputs: Mapping[Key, str], title: str = "Simplification diff") -> str:
    rows = []
    for key, src in sources.items():
        out = outputs.get(key, "")
        rows.append(
            "<tr><td>{}</td><td>{}</td><td>{}</td></tr>".format(
                html.escape("/".join(key)), html.escape(src), diff_html(src, out)
            )
        )
    return (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>{t}</title>"
        "<style>body{{font-family:sans-serif}}td{{vertical-align:top;padding:4px;border-bottom:1px solid #ddd}}"
        "ins{{background:#c8f7c5;text-decoration:none}}del{{color:#a33}}</style></head><body>"
        "<h1>{t}</h1><table><tr><th>id</th><th>source</th><th>output</th></tr>{rows}</table></body></html>\n"
    ).format(t=html.escape(title), rows="".join(rows))
