"""Command surface: summarize, run-exp, replay, report, estimate, convert.

Exit codes: 0 success, 2 configuration/usage error, 3 backend failure
(transport, auth, script exhaustion, replay miss, budget), 4 experiment
completed with per-document failures.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import sys
from pathlib import Path

import click

from ._version import __version__
from .backend import (
    CachedBackend,
    HttpBackend,
    ReplayBackend,
    ScriptedBackend,
    load_script,
)
from .cache import ResponseCache
from .config import load_config_file, resolve_backend_settings
from .corpus import convert_corpus
from .errors import (
    BackendError,
    BudgetExceeded,
    ConfigError,
    MissingSlot,
    MissingStats,
    SampleTooLarge,
    SchemaViolation,
    SummitError,
)
from .experiment import RunManifest, estimate_calls, load_exemplars, run_experiment
from .knowledge import FallbackExtractor, RemoteExtractor
from .prompting import DEFAULT_SHOTS, PromptRegistry
from .report import build_rows, format_table, write_csv
from .session import run_session
from .throttle import RateLimiter
from .trace_io import write_trace
from .types import Decoding, Document, SessionConfig, Setting

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_PARTIAL = 4

_CONFIG_ERRORS = (ConfigError, SchemaViolation, SampleTooLarge, MissingStats, MissingSlot)
_BACKEND_ERRORS = (BackendError, BudgetExceeded)


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _CONFIG_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except FileNotFoundError as exc:
            click.echo(f"error: file not found: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        except _BACKEND_ERRORS as exc:
            click.echo(f"backend error: {exc}", err=True)
            sys.exit(EXIT_BACKEND)
        except SummitError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.version_option(version=__version__, prog_name="summit")
def main():
    """Iterative summarization engine and evaluation harness."""


def _build_cli_backend(mode, settings, script):
    cache = ResponseCache(settings.cache) if settings.cache else None
    if mode == "scripted":
        if not script:
            raise ConfigError("--backend scripted requires --script")
        backend = ScriptedBackend(load_script(script))
        return CachedBackend(backend, cache) if cache else backend
    if mode == "replay":
        if cache is None:
            raise ConfigError("--backend replay requires a cache (--cache or config)")
        return ReplayBackend(cache)
    if not settings.base_url:
        raise ConfigError(
            "live backend requires a base URL (--base-url, SUMMIT_BASE_URL, or config)"
        )
    backend = HttpBackend(
        settings.base_url,
        api_key=settings.api_key,
        max_attempts=settings.max_attempts,
        timeout=settings.timeout,
        limiter=RateLimiter(settings.rpm) if settings.rpm else None,
    )
    return CachedBackend(backend, cache) if cache else backend


@main.command()
@click.option("--doc", type=click.Path(exists=True, dir_okay=False), help="Document file (default: stdin).")
@click.option("--doc-id", default="stdin", help="Identifier recorded in the trace.")
@click.option("--setting", type=click.Choice([s.value for s in Setting]), default="quality", show_default=True)
@click.option("--topic", default=None, help="Topic query (required for --setting control).")
@click.option("--max-iters", type=int, default=5, show_default=True)
@click.option("--model", default=None, help="Model id (default: SUMMIT_MODEL or config).")
@click.option("--trace-out", type=click.Path(dir_okay=False), default=None, help="Write the session trace here.")
@click.option("--backend", "backend_mode", type=click.Choice(["live", "scripted", "replay"]), default="live", show_default=True)
@click.option("--script", type=click.Path(exists=True, dir_okay=False), default=None, help="Script file for --backend scripted.")
@click.option("--cache", default=None, help="Response cache file.")
@click.option("--base-url", default=None, help="Chat-completions base URL.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--exemplars", type=click.Path(exists=True, dir_okay=False), default=None, help="JSONL exemplar file for few-shot prompts.")
@click.option("--shots", type=int, default=DEFAULT_SHOTS, show_default=True)
@click.option("--prompts-dir", type=click.Path(exists=True, file_okay=False), default=None, help="Override the packaged prompt templates.")
@click.option("--temperature", type=float, default=0.0, show_default=True)
@click.option("--max-output-tokens", type=int, default=512, show_default=True)
@click.option("--stop-marker", default="<STOP>", show_default=True)
@click.option("--strict", is_flag=True, help="Raise on unparseable evaluator output.")
@click.option("--token-budget", type=int, default=None, help="Abort the session past this many tokens.")
@click.option("--knowledge-endpoint", default=None, help="Remote triplet extractor for --setting faithfulness.")
@_handle_errors
def summarize(
    doc, doc_id, setting, topic, max_iters, model, trace_out, backend_mode, script,
    cache, base_url, config_path, exemplars, shots, prompts_dir, temperature,
    max_output_tokens, stop_marker, strict, token_budget, knowledge_endpoint,
):
    """Summarize one document and print the final summary."""
    if setting == "control" and not topic:
        raise ConfigError("--setting control requires --topic")
    text = Path(doc).read_text(encoding="utf-8") if doc else sys.stdin.read()
    if not text.strip():
        raise ConfigError("document is empty")
    file_config = load_config_file(config_path)
    settings = resolve_backend_settings(file_config, base_url=base_url, model=model, cache=cache)
    config = SessionConfig(
        model_id=settings.model,
        setting=Setting(setting),
        max_iterations=max_iters,
        topic_query=topic,
        exemplars=load_exemplars(exemplars, shots) if exemplars else [],
        decoding=Decoding(temperature=temperature, max_output_tokens=max_output_tokens),
        stop_marker=stop_marker,
        strict_parsing=strict,
        token_budget=token_budget,
    )
    backend = _build_cli_backend(backend_mode, settings, script)
    prompts = PromptRegistry.load(prompts_dir)
    document = Document(id=doc_id if doc is None else Path(doc).stem, text=text)
    endpoint = knowledge_endpoint or (file_config.get("knowledge") or {}).get("endpoint")
    extractor = FallbackExtractor(RemoteExtractor(endpoint)) if endpoint else None
    trace = run_session(document, config, backend, prompts, extractor)
    if trace_out:
        write_trace(trace, trace_out)
        click.echo(f"trace written to {trace_out}", err=True)
    click.echo(trace.final_summary.text)


def _load_manifest(manifest_path, mode, out, workers):
    manifest = RunManifest.from_file(manifest_path)
    changes = {}
    if mode:
        changes["backend_mode"] = mode
    if out:
        changes["output_dir"] = Path(out).resolve()
    if workers:
        changes["workers"] = workers
    return dataclasses.replace(manifest, **changes) if changes else manifest


def _finish_experiment(result):
    stats = result.stats
    click.echo(
        f"completed {stats['run']['completed']}/{stats['run']['sampled']} documents; "
        f"outputs in {result.output_dir}"
    )
    if result.failures:
        click.echo(f"{len(result.failures)} document(s) failed; see failures.jsonl", err=True)
        sys.exit(EXIT_PARTIAL)


@main.command("run-exp")
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["live", "replay", "scripted"]), default=None, help="Override the manifest's backend mode.")
@click.option("--out", default=None, help="Override the manifest's output directory.")
@click.option("--workers", type=int, default=None, help="Override the manifest's worker count.")
@click.option("--yes", is_flag=True, help="Confirm a live run after reviewing its estimate.")
@click.option("--acknowledge-peek", is_flag=True, help="Allow re-running a test split with changed prompts.")
@_handle_errors
def run_exp(manifest_path, mode, out, workers, yes, acknowledge_peek):
    """Run a batch experiment described by a manifest."""
    manifest = _load_manifest(manifest_path, mode, out, workers)
    result = run_experiment(manifest, yes=yes, acknowledge_peek=acknowledge_peek)
    _finish_experiment(result)


@main.command()
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=None, help="Override the manifest's output directory.")
@click.option("--workers", type=int, default=None)
@_handle_errors
def replay(manifest_path, out, workers):
    """Re-run an experiment entirely from its response cache (zero live calls)."""
    manifest = _load_manifest(manifest_path, "replay", out, workers)
    result = run_experiment(manifest)
    _finish_experiment(result)


@main.command()
@click.argument("run_dirs", nargs=-1, required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="Also write the table as CSV.")
@click.option("--include-init", is_flag=True, help="Add per-run rows for the initial summaries.")
@_handle_errors
def report(run_dirs, csv_path, include_init):
    """Print a metrics table over one or more run directories."""
    rows = build_rows(list(run_dirs), include_init=include_init)
    click.echo(format_table(rows))
    if csv_path:
        write_csv(rows, csv_path)
        click.echo(f"csv written to {csv_path}", err=True)


@main.command()
@click.argument("manifest_path", type=click.Path(exists=True, dir_okay=False))
@_handle_errors
def estimate(manifest_path):
    """Project worst-case backend call counts for a manifest."""
    manifest = RunManifest.from_file(manifest_path)
    click.echo(json.dumps(estimate_calls(manifest), indent=2, sort_keys=True))


@main.command()
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.argument("dest", type=click.Path(dir_okay=False))
@click.option("--format", "source_format", type=click.Choice(["xsum", "cnn_dm", "newts"]), required=True)
@_handle_errors
def convert(source, dest, source_format):
    """Convert a public-release JSONL file into the canonical corpus format."""
    from .corpus import load_corpus, word_stats

    count = convert_corpus(source, dest, source_format)
    stats = word_stats(load_corpus(dest).records)
    click.echo(
        f"wrote {count} records to {dest} "
        f"(mean words: document {stats.mean_document_words:.1f}, "
        f"summary {stats.mean_summary_words:.1f})"
    )


if __name__ == "__main__":
    main()
