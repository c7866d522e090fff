"""Batch experiment runner: manifests, per-document traces, corpus stats.

A run manifest is a JSON file that pins everything needed to re-run an
experiment: corpus path, sampling plan, session configuration, backend
mode, and output directory. Relative paths are resolved against the
manifest's own directory. Run outputs contain no timestamps, so a replayed
run is byte-comparable against the original.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ._version import __version__
from .backend import (
    CachedBackend,
    CompletionBackend,
    HttpBackend,
    ReplayBackend,
    ScriptedBackend,
    load_script,
)
from .cache import ResponseCache
from .corpus import CorpusSchema, DatasetRecord, SampleSpec, Split, load_corpus, sample
from .errors import ConfigError, SummitError
from .knowledge import FallbackExtractor, RemoteExtractor, TripletExtractor
from .metrics import FaithfulnessScorer, aggregate, rouge_l_multi, rouge_n_multi, topic_similarity
from .prompting import DEFAULT_SHOTS, PromptRegistry
from .session import run_session
from .throttle import RateLimiter
from .trace_io import write_trace
from .types import Decoding, Document, Exemplar, SessionConfig, SessionTrace, Setting

MANIFEST_SCHEMA = "summit/manifest"
MANIFEST_VERSION = 1
STATS_SCHEMA = "summit/stats"
STATS_VERSION = 1
CALLS_SCHEMA = "summit/calls"

DEFAULT_WORKERS = 4

BACKEND_MODES = ("live", "replay", "scripted")


@dataclass
class RunManifest:
    """A run description; ``session_params`` is a template from which one
    SessionConfig per document is built (control runs resolve the topic from
    each record unless the manifest pins one)."""

    name: str
    corpus_path: Path
    corpus_schema: CorpusSchema
    sample: SampleSpec
    session_params: dict
    output_dir: Path
    backend_mode: str = "live"
    script_path: Path | None = None
    base_url: str | None = None
    api_key: str = ""
    cache_path: Path | None = None
    rpm: int | None = None
    timeout: float = 120.0
    max_attempts: int = 4
    workers: int = DEFAULT_WORKERS
    topic_index: int = 0
    exemplars_path: Path | None = None
    shots: int = DEFAULT_SHOTS
    knowledge_endpoint: str | None = None
    knowledge_fallback: bool = True
    faithfulness_endpoint: str | None = None
    prompts_dir: Path | None = None

    def __post_init__(self):
        if self.backend_mode not in BACKEND_MODES:
            raise ConfigError(f"backend mode must be one of {BACKEND_MODES}")
        if self.backend_mode == "scripted" and self.script_path is None:
            raise ConfigError("scripted mode requires a script path")
        if self.backend_mode == "replay" and self.cache_path is None:
            raise ConfigError("replay mode requires a cache path")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        # Validate the non-topic template knobs early; control runs may defer
        # the topic itself to per-record data.
        try:
            self.session_for(topic="probe" if self.setting is Setting.CONTROL else None)
        except ConfigError as exc:
            raise ConfigError(f"invalid session template: {exc}") from exc

    @property
    def setting(self) -> Setting:
        return self.session_params.get("setting", Setting.QUALITY)

    @property
    def topic_query(self) -> str | None:
        return self.session_params.get("topic_query")

    @property
    def max_iterations(self) -> int:
        return self.session_params.get("max_iterations", 5)

    def session_for(self, topic: str | None = None) -> SessionConfig:
        params = dict(self.session_params)
        if topic is not None and not params.get("topic_query"):
            params["topic_query"] = topic
        return SessionConfig(**params)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunManifest":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"manifest not found: {path}") from None
        except ValueError as exc:
            raise ConfigError(f"manifest is not valid JSON: {exc}") from None
        if data.get("schema") != MANIFEST_SCHEMA:
            raise ConfigError(f"not a run manifest: {path}")
        base = path.parent

        def resolve(value):
            return (base / value).resolve() if value else None

        try:
            sess = data.get("session", {})
            session_params = dict(
                model_id=sess.get("model_id", "default"),
                setting=Setting(sess.get("setting", "quality")),
                max_iterations=int(sess.get("max_iterations", 5)),
                topic_query=sess.get("topic_query"),
                decoding=Decoding(
                    temperature=float(sess.get("temperature", 0.0)),
                    max_output_tokens=int(sess.get("max_output_tokens", 512)),
                ),
                stop_marker=sess.get("stop_marker", "<STOP>"),
                strict_parsing=bool(sess.get("strict_parsing", False)),
                min_document_tokens=int(sess.get("min_document_tokens", 10)),
                token_budget=sess.get("token_budget"),
            )
            sample_data = data["sample"]
            backend = data.get("backend", {})
            return cls(
                name=data.get("name", path.stem),
                corpus_path=resolve(data["corpus"]["path"]),
                corpus_schema=CorpusSchema(data["corpus"].get("schema", "generic")),
                sample=SampleSpec(
                    n=int(sample_data["n"]),
                    seed=int(sample_data["seed"]),
                    split=Split(sample_data.get("split", "test")),
                ),
                session_params=session_params,
                output_dir=resolve(data["output_dir"]),
                backend_mode=backend.get("mode", "live"),
                script_path=resolve(backend.get("script")),
                base_url=backend.get("base_url"),
                api_key=backend.get("api_key", ""),
                cache_path=resolve(backend.get("cache")),
                rpm=backend.get("rpm"),
                timeout=float(backend.get("timeout", 120.0)),
                max_attempts=int(backend.get("max_attempts", 4)),
                workers=int(data.get("workers", DEFAULT_WORKERS)),
                topic_index=int(sess.get("topic_index", 0)),
                exemplars_path=resolve(sess.get("exemplars_path")),
                shots=int(sess.get("shots", DEFAULT_SHOTS)),
                knowledge_endpoint=(data.get("knowledge") or {}).get("endpoint"),
                knowledge_fallback=bool((data.get("knowledge") or {}).get("fallback_to_naive", True)),
                faithfulness_endpoint=(data.get("faithfulness") or {}).get("endpoint"),
                prompts_dir=resolve(data.get("prompts", {}).get("dir")),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"invalid manifest {path}: {exc}") from exc

    def to_dict(self) -> dict:
        params = self.session_params
        return {
            "schema": MANIFEST_SCHEMA,
            "version": MANIFEST_VERSION,
            "name": self.name,
            "corpus": {"path": str(self.corpus_path), "schema": self.corpus_schema.value},
            "sample": {"n": self.sample.n, "seed": self.sample.seed, "split": self.sample.split.value},
            "session": {
                "model_id": params.get("model_id", "default"),
                "setting": self.setting.value,
                "max_iterations": self.max_iterations,
                "topic_query": self.topic_query,
                "temperature": params.get("decoding", Decoding()).temperature,
                "max_output_tokens": params.get("decoding", Decoding()).max_output_tokens,
                "stop_marker": params.get("stop_marker", "<STOP>"),
                "strict_parsing": params.get("strict_parsing", False),
                "min_document_tokens": params.get("min_document_tokens", 10),
                "token_budget": params.get("token_budget"),
                "topic_index": self.topic_index,
                "exemplars_path": str(self.exemplars_path) if self.exemplars_path else None,
                "shots": self.shots,
            },
            "backend": {
                "mode": self.backend_mode,
                "script": str(self.script_path) if self.script_path else None,
                "base_url": self.base_url,
                "cache": str(self.cache_path) if self.cache_path else None,
                "rpm": self.rpm,
                "timeout": self.timeout,
                "max_attempts": self.max_attempts,
            },
            "knowledge": {
                "endpoint": self.knowledge_endpoint,
                "fallback_to_naive": self.knowledge_fallback,
            },
            "faithfulness": {"endpoint": self.faithfulness_endpoint},
            "prompts": {"dir": str(self.prompts_dir) if self.prompts_dir else None},
            "output_dir": str(self.output_dir),
            "workers": self.workers,
        }


def load_exemplars(path: str | Path, shots: int) -> list[Exemplar]:
    """First ``shots`` entries of a JSONL exemplar file."""
    exemplars = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            exemplars.append(
                Exemplar(
                    document=raw["document"],
                    summary=raw["summary"],
                    explanation=raw.get("explanation"),
                )
            )
            if len(exemplars) >= shots:
                break
    return exemplars


def estimate_calls(manifest: RunManifest) -> dict:
    """Worst-case live call counts for a run (the --yes gate shows these)."""
    per_doc = 2 * manifest.max_iterations
    return {
        "documents": manifest.sample.n,
        "max_iterations": manifest.max_iterations,
        "worst_case_calls_per_document": per_doc,
        "worst_case_total_calls": manifest.sample.n * per_doc,
    }


@dataclass
class DocOutcome:
    record: DatasetRecord
    trace: SessionTrace | None = None
    metrics: dict | None = None
    error: str | None = None


@dataclass
class ExperimentResult:
    output_dir: Path
    stats: dict
    calls: dict
    failures: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


class _CallCounter:
    """Wraps a backend to tally where responses were served from."""

    def __init__(self, inner: CompletionBackend, counts: dict):
        self.inner = inner
        self.counts = counts

    def complete(self, request):
        response = self.inner.complete(request)
        self.counts[response.served_from.value] += 1
        return response


def _build_backend(
    manifest: RunManifest, counts: dict
) -> tuple[CompletionBackend | Callable[[], CompletionBackend], bool]:
    """Returns (backend, False) or (factory, True). Scripted backends are
    positional single-consumer mocks, so scripted mode returns a factory."""
    cache = ResponseCache(manifest.cache_path) if manifest.cache_path else None
    if manifest.backend_mode == "replay":
        return _CallCounter(ReplayBackend(cache), counts), False
    if manifest.backend_mode == "scripted":
        steps = load_script(manifest.script_path)

        def factory():
            backend: CompletionBackend = ScriptedBackend(steps)
            if cache is not None:
                backend = CachedBackend(backend, cache)
            return _CallCounter(backend, counts)

        return factory, True
    base_url = manifest.base_url
    if not base_url:
        raise ConfigError("live mode requires a base_url")
    limiter = RateLimiter(manifest.rpm) if manifest.rpm else None
    backend: CompletionBackend = HttpBackend(
        base_url,
        api_key=manifest.api_key,
        max_attempts=manifest.max_attempts,
        timeout=manifest.timeout,
        limiter=limiter,
    )
    if cache is not None:
        backend = CachedBackend(backend, cache)
    return _CallCounter(backend, counts), False


def _scoring_references(record: DatasetRecord, manifest: RunManifest) -> list[str]:
    # Control runs score against the topic-paired reference when topics exist.
    if (
        manifest.setting is Setting.CONTROL
        and record.topics
        and manifest.topic_index < len(record.summaries)
    ):
        return [record.summaries[manifest.topic_index]]
    return list(record.summaries)


def _record_topic(record: DatasetRecord, manifest: RunManifest) -> str | None:
    if manifest.setting is not Setting.CONTROL:
        return None
    if manifest.topic_query:
        return manifest.topic_query
    if manifest.topic_index < len(record.topics):
        return record.topics[manifest.topic_index]
    return None


def _doc_metrics(
    record: DatasetRecord,
    trace: SessionTrace,
    manifest: RunManifest,
    topic: str | None,
    scorer: FaithfulnessScorer | None,
) -> dict:
    references = _scoring_references(record, manifest)
    out: dict = {"iterations": len(trace.steps)}
    for label, step in (("init", trace.steps[0]), ("final", trace.steps[-1])):
        text = step.summary.text
        row = {
            "rouge1": rouge_n_multi(text, references, 1).f1,
            "rouge2": rouge_n_multi(text, references, 2).f1,
            "rougeL": rouge_l_multi(text, references).f1,
            "gpt_eval": step.feedback.expected_score,
        }
        if topic is not None:
            row["topic_similarity"] = topic_similarity(topic, text)
        if scorer is not None:
            row["faithfulness"] = scorer.score(record.document, text)
        out[label] = row
    return out


def _check_peek_guard(manifest: RunManifest, fingerprint: str, acknowledge_peek: bool) -> None:
    existing = manifest.output_dir / "manifest.json"
    if manifest.sample.split is not Split.TEST or not existing.exists():
        return
    try:
        old = json.loads(existing.read_text(encoding="utf-8"))
    except ValueError:
        return
    old_fp = old.get("prompt_fingerprint")
    if old_fp and old_fp != fingerprint and not acknowledge_peek:
        raise ConfigError(
            "prompts changed since this test-split run directory was created; "
            "tune prompts on a dev sample, or pass --acknowledge-peek to proceed"
        )


def run_experiment(
    manifest: RunManifest,
    yes: bool = False,
    acknowledge_peek: bool = False,
) -> ExperimentResult:
    """Process the manifest's sample and write traces + stats to its output dir."""
    prompts = PromptRegistry.load(manifest.prompts_dir)
    fingerprint = prompts.fingerprint()
    _check_peek_guard(manifest, fingerprint, acknowledge_peek)

    if manifest.backend_mode == "live" and not yes:
        estimate = estimate_calls(manifest)
        raise ConfigError(
            f"live run would issue up to {estimate['worst_case_total_calls']} calls "
            f"({estimate['documents']} documents x {estimate['worst_case_calls_per_document']}); "
            "pass --yes to proceed (see the estimate command)"
        )

    loaded = load_corpus(manifest.corpus_path, manifest.corpus_schema)
    records = sample(loaded.records, manifest.sample)

    if manifest.exemplars_path:
        manifest.session_params["exemplars"] = load_exemplars(manifest.exemplars_path, manifest.shots)

    counts = {"live": 0, "cache": 0, "script": 0}
    backend_or_factory, per_session = _build_backend(manifest, counts)
    extractor: TripletExtractor | None = None
    if manifest.knowledge_endpoint:
        extractor = RemoteExtractor(manifest.knowledge_endpoint)
        if manifest.knowledge_fallback:
            extractor = FallbackExtractor(extractor)
    scorer = (
        FaithfulnessScorer(manifest.faithfulness_endpoint)
        if manifest.faithfulness_endpoint
        else None
    )

    def process(record: DatasetRecord) -> DocOutcome:
        topic = _record_topic(record, manifest)
        if manifest.setting is Setting.CONTROL and topic is None:
            return DocOutcome(record, error="ConfigError: record has no topic to control on")
        config = manifest.session_for(topic)
        doc = Document(
            id=record.id,
            text=record.document,
            reference_summaries=record.summaries,
            topics=record.topics,
        )
        backend = backend_or_factory() if per_session else backend_or_factory
        try:
            trace = run_session(doc, config, backend, prompts, extractor)
            metrics = _doc_metrics(record, trace, manifest, topic, scorer)
        except SummitError as exc:
            return DocOutcome(record, error=f"{type(exc).__name__}: {exc}")
        return DocOutcome(record, trace=trace, metrics=metrics)

    if manifest.workers == 1 or len(records) <= 1:
        outcomes = [process(r) for r in records]
    else:
        with ThreadPoolExecutor(max_workers=manifest.workers) as pool:
            outcomes = list(pool.map(process, records))

    return _write_outputs(manifest, fingerprint, records, outcomes, counts)


def _write_outputs(manifest, fingerprint, records, outcomes, counts) -> ExperimentResult:
    outdir = manifest.output_dir
    (outdir / "traces").mkdir(parents=True, exist_ok=True)

    failures = []
    usage_total = {"prompt_tokens": 0, "completion_tokens": 0, "cache_hits": 0}
    per_metric: dict[str, dict[str, list[float]]] = {"init": {}, "final": {}}
    iteration_values: list[float] = []

    for outcome in outcomes:
        if outcome.error is not None:
            failures.append({"document_id": outcome.record.id, "error": outcome.error})
            continue
        write_trace(outcome.trace, outdir / "traces" / f"{outcome.record.id}.jsonl")
        usage_total["prompt_tokens"] += outcome.trace.usage.prompt_tokens
        usage_total["completion_tokens"] += outcome.trace.usage.completion_tokens
        usage_total["cache_hits"] += outcome.trace.usage.cache_hits
        iteration_values.append(float(outcome.metrics["iterations"]))
        for label in ("init", "final"):
            for metric, value in outcome.metrics[label].items():
                per_metric[label].setdefault(metric, []).append(value)

    # Everything in stats.json derives from the sample alone, never from the
    # backend mode, so a replayed run reproduces it byte-for-byte. Call and
    # token accounting (which legitimately differ between a live run and its
    # replay) go to calls.json instead.
    stats: dict = {
        "schema": STATS_SCHEMA,
        "version": STATS_VERSION,
        "run": {
            "name": manifest.name,
            "setting": manifest.setting.value,
            "sampled": len(records),
            "completed": len(records) - len(failures),
            "failures": len(failures),
        },
        "metrics": {},
    }
    if iteration_values:
        stats["iterations"] = aggregate(iteration_values, "iterations").to_dict()
    for label in ("init", "final"):
        stats["metrics"][label] = {
            metric: aggregate(values, f"{label}/{metric}").to_dict()
            for metric, values in sorted(per_metric[label].items())
        }

    manifest_dict = manifest.to_dict()
    manifest_dict["prompt_fingerprint"] = fingerprint
    manifest_dict["package_version"] = __version__
    (outdir / "manifest.json").write_text(
        json.dumps(manifest_dict, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (outdir / "stats.json").write_text(
        json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (outdir / "calls.json").write_text(
        json.dumps(
            {
                "schema": CALLS_SCHEMA,
                "version": 1,
                "mode": manifest.backend_mode,
                "calls": counts,
                "usage": usage_total,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    failures_path = outdir / "failures.jsonl"
    if failures:
        with failures_path.open("w", encoding="utf-8") as fh:
            for failure in failures:
                fh.write(json.dumps(failure, ensure_ascii=False, sort_keys=True) + "\n")
    elif failures_path.exists():
        failures_path.unlink()

    return ExperimentResult(output_dir=outdir, stats=stats, calls=counts, failures=failures)
