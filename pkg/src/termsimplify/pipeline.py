"""Run orchestration: optional rephrase/complexify, marking, batched simplification."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .corpus_index import IdfIndex, TextRecord, read_records
from .llm_gateway import Gateway, GatewayError, ProviderConfig, UsageLedger
from .prompt_engine import (
    DEFAULT_BATCH_SIZE,
    PRE_STEP_IDS,
    SIMPLIFY_IDS,
    ParseFailure,
    PromptTemplate,
    load_template,
    parse_response,
    render,
    shuffle_and_batch,
)
from .term_marker import (
    CONTRAST_DIRECTIONS,
    DEFAULT_THRESHOLD,
    SCIENCE_MINUS_LIFESTYLE,
    mark,
    render_brackets,
    strip_brackets,
)

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
MANIFEST_VERSION = 1

BASELINE_COPY = "baseline_copy"
BATCH_OK = "batch_ok"
SINGLE_OK = "single_ok"
FALLBACK_ORIGINAL = "fallback_original"
PASSTHROUGH_UNMARKED = "passthrough_unmarked"
PATHS = (BASELINE_COPY, BATCH_OK, SINGLE_OK, FALLBACK_ORIGINAL, PASSTHROUGH_UNMARKED)

PRE_STEP = "pre_step"
SIMPLIFY = "simplify"


class ConfigError(ValueError):
    pass


class IncompleteManifest(RuntimeError):
    pass


class RunAborted(RuntimeError):
    """A provider failed beyond its retry policy; ``manifest`` holds the partial run."""

    def __init__(self, manifest: "RunManifest", cause: Exception):
        super().__init__(f"run {manifest.run_id} aborted: {cause}")
        self.manifest = manifest
        self.cause = cause


def run_id_for(team: str, model: str, simplify: str | None = None, pre_step: str | None = None) -> str:
    """``<team>_task11_<prompt-tags>--<model>``, e.g. ``TEAM_task11_p1-ac--gemini-2.0-flash``."""
    if simplify and pre_step:
        tags = f"{simplify.lower()}-a{pre_step.lower()}"
    elif simplify or pre_step:
        tags = (simplify or pre_step).lower()
    else:
        return f"{team}_task11_baseline"
    return f"{team}_task11_{tags}--{model}"


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    run_id: str
    pre_step: str | None = None
    pre_step_provider: str | None = None
    marking: bool = False
    threshold: float = DEFAULT_THRESHOLD
    contrast_direction: str = SCIENCE_MINUS_LIFESTYLE
    science_index: str | None = None
    lifestyle_index: str | None = None
    skip_unmarked: bool = False
    simplify_prompt: str | None = None
    simplify_provider: str | None = None
    batch_size: int = DEFAULT_BATCH_SIZE
    shuffle_seed: int = 0
    prompts_dir: str | None = None
    providers: list[ProviderConfig] = field(default_factory=list)

    @property
    def is_baseline(self) -> bool:
        return not self.pre_step and not self.marking and not self.simplify_prompt

    def validate(self) -> "RunConfig":
        if not self.run_id:
            raise ConfigError("run_id is required")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.pre_step and self.pre_step not in PRE_STEP_IDS:
            raise ConfigError(f"pre_step must be one of {PRE_STEP_IDS}, got {self.pre_step!r}")
        if self.simplify_prompt and self.simplify_prompt not in SIMPLIFY_IDS and not self.prompts_dir:
            raise ConfigError(f"simplify prompt must be one of {SIMPLIFY_IDS}, got {self.simplify_prompt!r}")
        if self.simplify_prompt and not self.marking:
            raise ConfigError("simplification prompts expect bracket-marked input; enable marking")
        if self.marking and not self.simplify_prompt:
            raise ConfigError("marking without a simplification prompt produces no output")
        if self.marking and not (self.science_index and self.lifestyle_index):
            raise ConfigError("marking needs both science_index and lifestyle_index")
        if self.contrast_direction not in CONTRAST_DIRECTIONS:
            raise ConfigError(f"contrast_direction must be one of {CONTRAST_DIRECTIONS}")
        known = {p.provider_id for p in self.providers}
        if len(known) != len(self.providers):
            raise ConfigError("provider ids must be unique")
        for prompt, provider in ((self.pre_step, self.pre_step_provider), (self.simplify_prompt, self.simplify_provider)):
            if prompt and not provider:
                raise ConfigError(f"prompt {prompt} has no provider")
            if prompt and provider not in known:
                raise ConfigError(f"provider {provider!r} is not configured")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["providers"] = [p.to_dict() for p in self.providers]
        d["version"] = CONFIG_VERSION
        return d

    @classmethod
    def from_dict(cls, data: Mapping, base_dir: Path | None = None) -> "RunConfig":
        """Accepts the nested file layout (see README) or a flat ``to_dict`` snapshot."""
        data = dict(data)
        version = data.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version!r}")
        flat: dict[str, Any] = {}
        if isinstance(data.get("pre_step"), Mapping):
            pre = data.pop("pre_step")
            flat["pre_step"] = pre.get("prompt")
            flat["pre_step_provider"] = pre.get("provider")
        if isinstance(data.get("marking"), Mapping):
            m = data.pop("marking")
            flat["marking"] = m.get("enabled", True)
            for key in ("threshold", "contrast_direction", "science_index", "lifestyle_index", "skip_unmarked"):
                if key in m:
                    flat[key] = m[key]
        if isinstance(data.get("simplify"), Mapping):
            s = data.pop("simplify")
            flat["simplify_prompt"] = s.get("prompt")
            flat["simplify_provider"] = s.get("provider")
        if "seed" in data:
            flat["shuffle_seed"] = data.pop("seed")
        try:
            providers = [
                p if isinstance(p, ProviderConfig) else ProviderConfig.from_dict(p)
                for p in data.pop("providers", [])
            ]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"provider settings: {exc}") from None
        flat.update(data)
        unknown = set(flat) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if base_dir is not None:
            for key in ("science_index", "lifestyle_index", "prompts_dir"):
                if flat.get(key) and not Path(flat[key]).is_absolute():
                    flat[key] = str((base_dir / flat[key]).resolve())
        try:
            cfg = cls(providers=providers, **flat)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return cfg.validate()


def load_run_config(path) -> RunConfig:
    path = Path(path)
    raw = path.read_bytes()
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return RunConfig.from_dict(data, base_dir=path.parent)


# ---------------------------------------------------------------------------
# run records


@dataclass
class TextOutcome:
    index: int
    pair_id: str
    para_id: str
    sent_id: str
    original_text: str
    input_text: str
    output_text: str
    path: str
    batch_id: int | None = None
    span_count: int | None = None
    pre_step_path: str | None = None


@dataclass
class StageState:
    name: str
    prompt_id: str
    provider: str
    batches: list[list[int]] = field(default_factory=list)
    batch_results: dict[int, list[str] | None] = field(default_factory=dict)
    batch_failures: dict[int, str] = field(default_factory=dict)
    single_results: dict[int, str | None] = field(default_factory=dict)
    single_failures: dict[int, str] = field(default_factory=dict)
    complete: bool = False

    @property
    def f10(self) -> int:
        return sum(1 for r in self.batch_results.values() if r is None)

    @property
    def f1(self) -> int:
        return sum(1 for r in self.single_results.values() if r is None)

    @property
    def retries_issued(self) -> int:
        return len(self.single_results)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "prompt_id": self.prompt_id,
            "provider": self.provider,
            "batches": self.batches,
            "batch_results": {str(k): v for k, v in sorted(self.batch_results.items())},
            "batch_failures": {str(k): v for k, v in sorted(self.batch_failures.items())},
            "single_results": {str(k): v for k, v in sorted(self.single_results.items())},
            "single_failures": {str(k): v for k, v in sorted(self.single_failures.items())},
            "f10": self.f10,
            "f1": self.f1,
            "retries_issued": self.retries_issued,
            "complete": self.complete,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "StageState":
        return cls(
            d["name"],
            d["prompt_id"],
            d["provider"],
            [list(b) for b in d["batches"]],
            {int(k): v for k, v in d["batch_results"].items()},
            {int(k): v for k, v in d.get("batch_failures", {}).items()},
            {int(k): v for k, v in d["single_results"].items()},
            {int(k): v for k, v in d.get("single_failures", {}).items()},
            bool(d.get("complete", False)),
        )


@dataclass
class RunManifest:
    run_id: str
    config: dict
    dataset: dict
    outcomes: list[TextOutcome]
    stages: dict[str, StageState]
    ledger: dict
    complete: bool = False
    error: str | None = None

    @property
    def f10(self) -> int:
        return sum(s.f10 for s in self.stages.values())

    @property
    def f1(self) -> int:
        return sum(s.f1 for s in self.stages.values())

    def path_counts(self) -> dict[str, int]:
        counts = dict.fromkeys(PATHS, 0)
        for o in self.outcomes:
            counts[o.path] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "version": MANIFEST_VERSION,
            "run_id": self.run_id,
            "complete": self.complete,
            "error": self.error,
            "config": self.config,
            "dataset": self.dataset,
            "f10": self.f10,
            "f1": self.f1,
            "paths": self.path_counts(),
            "stages": {k: v.to_dict() for k, v in self.stages.items()},
            "ledger": self.ledger,
            "outcomes": [asdict(o) for o in self.outcomes],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def write(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.to_json(), encoding="utf-8")
        os.replace(tmp, path)

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunManifest":
        return cls(
            d["run_id"],
            d["config"],
            d["dataset"],
            [TextOutcome(**o) for o in d.get("outcomes", [])],
            {k: StageState.from_dict(v) for k, v in d.get("stages", {}).items()},
            d.get("ledger", {}),
            bool(d.get("complete", False)),
            d.get("error"),
        )

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# execution


class _Journal:
    """Append-only JSON-lines checkpoint: one entry per finished batch or single retry."""

    def __init__(self, path: Path | None):
        self.path = path

    def entries(self) -> list[dict]:
        if self.path is None or not self.path.exists():
            return []
        out = []
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError:
                    break  # torn final line from an interrupted write
        return out

    def append(self, entry: dict) -> None:
        if self.path is None:
            return
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")
            fh.flush()


class Pipeline:
    MANIFEST_NAME = "manifest.json"
    JOURNAL_NAME = "checkpoint.jsonl"
    LEDGER_NAME = "ledger.jsonl"
    SUBMISSION_NAME = "submission.tsv"

    def __init__(
        self,
        config: RunConfig,
        gateway: Gateway | None = None,
        out_dir=None,
        indexes: tuple[IdfIndex, IdfIndex] | None = None,
    ):
        self.config = config.validate()
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.gateway = gateway
        self._indexes = indexes
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        self.journal = _Journal(self.out_dir / self.JOURNAL_NAME if self.out_dir else None)

    # -- helpers -------------------------------------------------------------

    def indexes(self) -> tuple[IdfIndex, IdfIndex]:
        if self._indexes is None:
            self._indexes = (
                IdfIndex.load(self.config.science_index),
                IdfIndex.load(self.config.lifestyle_index),
            )
        return self._indexes

    def _gateway(self) -> Gateway:
        if self.gateway is None:
            self.gateway = Gateway(self.config.providers)
        return self.gateway

    def _template(self, prompt_id: str) -> PromptTemplate:
        if self.config.prompts_dir and (Path(self.config.prompts_dir) / f"{prompt_id}.batch.txt").exists():
            return load_template(prompt_id, self.config.prompts_dir)
        return load_template(prompt_id)

    # -- stages --------------------------------------------------------------

    def _restore(self, state: StageState) -> None:
        for entry in self.journal.entries():
            if entry.get("stage") != state.name:
                continue
            if entry["kind"] == "batches":
                if entry["batches"] != state.batches:
                    raise ConfigError(f"checkpoint batch layout for {state.name} does not match this run")
            elif entry["kind"] == "batch":
                state.batch_results[entry["batch_id"]] = entry["items"]
                if entry.get("reason"):
                    state.batch_failures[entry["batch_id"]] = entry["reason"]
            elif entry["kind"] == "single":
                state.single_results[entry["index"]] = entry["text"]
                if entry.get("reason"):
                    state.single_failures[entry["index"]] = entry["reason"]
            elif entry["kind"] == "done":
                state.complete = True

    def _run_stage(self, name: str, prompt_id: str, provider: str, texts: dict[int, str]) -> StageState:
        """Batch prompts, single-text retries for failed batches, fallback for failed retries."""
        cfg = self.config
        template = self._template(prompt_id)
        seed = cfg.shuffle_seed
        batches = shuffle_and_batch(sorted(texts.items()), cfg.batch_size, seed)
        state = StageState(name, prompt_id, provider, [list(b.refs) for b in batches])
        self._restore(state)
        if state.complete:
            return state
        if not any(e.get("stage") == name and e["kind"] == "batches" for e in self.journal.entries()):
            self.journal.append({"stage": name, "kind": "batches", "batches": state.batches})
        gateway = self._gateway()

        pending = [b for b in batches if b.batch_id not in state.batch_results]
        futures = [(b, gateway.submit(provider, render(template, b))) for b in pending]
        try:
            for batch, fut in futures:
                completion = fut.result()
                try:
                    parsed = parse_response(completion.text, len(batch), template.expected_format)
                    items, reason = list(parsed.items), None
                except ParseFailure as exc:
                    items, reason = None, exc.reason
                    state.batch_failures[batch.batch_id] = reason
                state.batch_results[batch.batch_id] = items
                self.journal.append(
                    {"stage": name, "kind": "batch", "batch_id": batch.batch_id, "items": items, "reason": reason}
                )
        except BaseException:
            for _, fut in futures:
                fut.cancel()
            raise

        retry = [
            idx
            for b in batches
            if state.batch_results[b.batch_id] is None
            for idx in b.refs
            if idx not in state.single_results
        ]
        futures = [(idx, gateway.submit(provider, render(template, [texts[idx]]))) for idx in retry]
        try:
            for idx, fut in futures:
                completion = fut.result()
                try:
                    text, reason = parse_response(completion.text, 1, template.expected_format).items[0], None
                except ParseFailure as exc:
                    text, reason = None, exc.reason
                    state.single_failures[idx] = reason
                state.single_results[idx] = text
                self.journal.append({"stage": name, "kind": "single", "index": idx, "text": text, "reason": reason})
        except BaseException:
            for _, fut in futures:
                fut.cancel()
            raise
        state.complete = True
        self.journal.append({"stage": name, "kind": "done"})
        return state

    @staticmethod
    def _stage_outputs(
        state: StageState, texts: dict[int, str], marked: bool = True
    ) -> dict[int, tuple[str, str, int]]:
        """index -> (output text, path, batch id).

        Texts whose batch and single retry both failed fall back to their
        input, with the marking brackets removed when the input was marked.
        """
        out = {}
        for batch_id, members in enumerate(state.batches):
            result = state.batch_results.get(batch_id)
            for pos, idx in enumerate(members):
                if result is not None:
                    out[idx] = (result[pos], BATCH_OK, batch_id)
                elif state.single_results.get(idx) is not None:
                    out[idx] = (state.single_results[idx], SINGLE_OK, batch_id)
                else:
                    fallback = strip_brackets(texts[idx]) if marked else texts[idx]
                    out[idx] = (fallback, FALLBACK_ORIGINAL, batch_id)
        return out

    # -- entry points --------------------------------------------------------

    def _manifest(self, dataset, outcomes, stages, complete, error=None) -> RunManifest:
        ledger = self.gateway.ledger.snapshot() if self.gateway is not None else {"providers": []}
        return RunManifest(self.config.run_id, self.config.to_dict(), dataset, outcomes, stages, ledger, complete, error)

    def _checkpoint(self, manifest: RunManifest) -> None:
        if self.out_dir is None:
            return
        manifest.write(self.out_dir / self.MANIFEST_NAME)
        if self.gateway is not None:
            self.gateway.ledger.write_jsonl(self.out_dir / self.LEDGER_NAME)

    def run(self, records: Sequence[TextRecord], dataset_path=None, resume: bool = False) -> RunManifest:
        """Execute every configured step; with ``resume`` reuse the checkpoint journal in ``out_dir``."""
        cfg = self.config
        if not resume and self.journal.path is not None and self.journal.path.exists():
            self.journal.path.unlink()
        dataset = {"n_records": len(records)}
        if dataset_path is not None:
            dataset["path"] = str(Path(dataset_path).resolve())
            dataset["sha256"] = file_sha256(dataset_path)
        stages: dict[str, StageState] = {}
        self._checkpoint(self._manifest(dataset, [], stages, False))

        if cfg.is_baseline:
            outcomes = [
                TextOutcome(i, r.pair_id, r.para_id, r.sent_id, r.text, r.text, r.text, BASELINE_COPY)
                for i, r in enumerate(records)
            ]
            manifest = self._manifest(dataset, outcomes, stages, True)
            self._checkpoint(manifest)
            return manifest

        texts = {i: r.text for i, r in enumerate(records)}
        pre_outputs: dict[int, tuple[str, str, int]] = {}
        try:
            if cfg.pre_step:
                stages[PRE_STEP] = self._run_stage(PRE_STEP, cfg.pre_step, cfg.pre_step_provider, texts)
                pre_outputs = self._stage_outputs(stages[PRE_STEP], texts, marked=False)
                texts = {i: pre_outputs[i][0] for i in texts}

            marked: dict[int, str] = {}
            span_counts: dict[int, int] = {}
            if cfg.marking:
                science, lifestyle = self.indexes()
                for i, text in texts.items():
                    m = mark(text, science, lifestyle, cfg.threshold, cfg.contrast_direction)
                    marked[i] = render_brackets(m)
                    span_counts[i] = m.marked_count

            final: dict[int, tuple[str, str, int | None]] = dict(pre_outputs)
            if cfg.simplify_prompt:
                to_send = {
                    i: marked[i] for i in texts if not (cfg.skip_unmarked and span_counts[i] == 0)
                }
                for i in texts:
                    if i not in to_send:
                        final[i] = (texts[i], PASSTHROUGH_UNMARKED, None)
                if to_send:
                    stages[SIMPLIFY] = self._run_stage(SIMPLIFY, cfg.simplify_prompt, cfg.simplify_provider, to_send)
                    final.update(self._stage_outputs(stages[SIMPLIFY], to_send))
        except (GatewayError, KeyboardInterrupt) as exc:
            manifest = self._manifest(dataset, [], stages, False, f"{type(exc).__name__}: {exc}")
            self._checkpoint(manifest)
            if isinstance(exc, KeyboardInterrupt):
                raise
            raise RunAborted(manifest, exc) from exc

        outcomes = []
        for i, r in enumerate(records):
            output, path, batch_id = final[i]
            outcomes.append(
                TextOutcome(
                    i, r.pair_id, r.para_id, r.sent_id, r.text,
                    marked.get(i, texts[i]),
                    output or r.text,
                    path,
                    batch_id,
                    span_counts.get(i),
                    pre_outputs[i][1] if i in pre_outputs and cfg.simplify_prompt else None,
                )
            )
        manifest = self._manifest(dataset, outcomes, stages, True)
        self._checkpoint(manifest)
        return manifest

    def dry_run(self, records: Sequence[TextRecord]) -> dict:
        """Render every first-pass prompt and count requests, without calling any provider."""
        cfg = self.config
        report: dict[str, Any] = {"run_id": cfg.run_id, "n_records": len(records), "stages": {}, "prompts": []}
        texts = {i: r.text for i, r in enumerate(records)}
        if cfg.pre_step:
            template = self._template(cfg.pre_step)
            batches = shuffle_and_batch(sorted(texts.items()), cfg.batch_size, cfg.shuffle_seed)
            report["stages"][PRE_STEP] = {"prompt": cfg.pre_step, "batches": len(batches)}
            report["prompts"].extend(render(template, b) for b in batches)
        if cfg.simplify_prompt:
            template = self._template(cfg.simplify_prompt)
            science, lifestyle = self.indexes()
            marks = {i: mark(t, science, lifestyle, cfg.threshold, cfg.contrast_direction) for i, t in texts.items()}
            to_send = {
                i: render_brackets(m) for i, m in marks.items() if not (cfg.skip_unmarked and m.marked_count == 0)
            }
            batches = shuffle_and_batch(sorted(to_send.items()), cfg.batch_size, cfg.shuffle_seed)
            report["stages"][SIMPLIFY] = {
                "prompt": cfg.simplify_prompt,
                "batches": len(batches),
                "unmarked": sum(1 for m in marks.values() if m.marked_count == 0),
                "marked_from_original_texts": bool(cfg.pre_step),
            }
            report["prompts"].extend(render(template, b) for b in batches)
        report["estimated_requests"] = sum(s["batches"] for s in report["stages"].values())
        return report


def run(
    config: RunConfig,
    records: Sequence[TextRecord],
    gateway: Gateway | None = None,
    out_dir=None,
    indexes: tuple[IdfIndex, IdfIndex] | None = None,
    dataset_path=None,
) -> RunManifest:
    return Pipeline(config, gateway, out_dir, indexes).run(records, dataset_path)


def expected_requests(n_records: int, batch_size: int = DEFAULT_BATCH_SIZE) -> int:
    return math.ceil(n_records / batch_size)


def resume(manifest_path, gateway: Gateway | None = None) -> RunManifest:
    """Continue an interrupted run from its output directory's manifest and checkpoint journal."""
    manifest_path = Path(manifest_path)
    previous = RunManifest.load(manifest_path)
    if previous.complete:
        return previous
    config = RunConfig.from_dict(previous.config)
    dataset_path = previous.dataset.get("path")
    if not dataset_path:
        raise ConfigError("manifest does not record its dataset path; cannot resume")
    if previous.dataset.get("sha256") and file_sha256(dataset_path) != previous.dataset["sha256"]:
        raise ConfigError(f"dataset {dataset_path} changed since the run started")
    records = read_records(dataset_path)
    out_dir = manifest_path.parent
    ledger = UsageLedger()
    seq_start = 0
    ledger_path = out_dir / Pipeline.LEDGER_NAME
    if ledger_path.exists():
        ledger = UsageLedger.read_jsonl(ledger_path)
        seq_start = max((r.seq for r in ledger.records), default=0)
    if gateway is None:
        gateway = Gateway(config.providers, ledger)
    else:
        gateway.ledger = ledger
    gateway._seq = max(gateway._seq, seq_start)
    return Pipeline(config, gateway, out_dir).run(records, dataset_path, resume=True)


# ---------------------------------------------------------------------------
# submission files

SUBMISSION_COLUMNS = ("pair_id", "para_id", "sent_id", "simplified_text")


def _cell(text: str) -> str:
    """TSV-safe cell: tabs and line breaks become spaces, everything else is kept."""
    return " ".join(str(text).splitlines()).replace("\t", " ")


def emit_submission(manifest: RunManifest, path) -> Path:
    if not manifest.complete:
        raise IncompleteManifest(f"run {manifest.run_id} is incomplete: {manifest.error or 'not finished'}")
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(SUBMISSION_COLUMNS) + "\n")
        for o in sorted(manifest.outcomes, key=lambda o: o.index):
            fh.write("\t".join((_cell(o.pair_id), _cell(o.para_id), _cell(o.sent_id), _cell(o.output_text))) + "\n")
    return path


def load_submission(path) -> list[tuple[tuple[str, str, str], str]]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\r\n").split("\t")
        if tuple(header) != SUBMISSION_COLUMNS:
            raise ValueError(f"{path}: unexpected submission header {header}")
        for lineno, line in enumerate(fh, 2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            cells = line.split("\t")
            if len(cells) != 4:
                raise ValueError(f"{path}:{lineno}: expected 4 columns, found {len(cells)}")
            rows.append(((cells[0], cells[1], cells[2]), cells[3]))
    return rows
