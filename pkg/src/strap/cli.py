"""Command-line front end.

Every subcommand reads and writes plain files so each stage can run, cache,
and be diffed independently in CI. Machine-readable output goes to files
only; diagnostics go to stderr. Exit codes: 0 success, 1 input error, 2
internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Mapping, Sequence

from .benchmarks import BUILTIN_MUTANTS, BUILTIN_SCRIPTS
from .evaluation import (
    FaultVerdict,
    MetricsReport,
    evaluate_plan,
    fault_coverage,
    report_to_csv,
    report_to_json,
)
from .fileio import atomic_write_json, atomic_write_text, read_json
from .prioritization import (
    STRATEGIES,
    PrioritizedPlan,
    plan_from_json,
    plan_to_csv,
    plan_to_json,
    prioritize_cc,
    prioritize_ch,
    prioritize_rd,
    prioritize_rsc,
    prioritize_sc,
)
from .recording import (
    AlignedRecording,
    Recording,
    align_recording,
    dump_recording_jsonl,
    load_recording,
)
from .reduction import (
    ReductionConfig,
    Segment,
    reduce_vectors,
    segments_from_manifest,
    segments_to_manifest,
)
from .schema import (
    FrameVector,
    MODULE_KINDS,
    ModuleFilter,
    SchemaRegistry,
    default_registry,
    encode_recording,
    load_registry,
    registry_to_json,
)
from .synth import (
    MUTATION_OPERATORS,
    Mutant,
    generate_recording,
    load_mutants,
    load_script,
    make_module,
    mutable_targets,
    mutants_to_json,
    run_benchmark,
    run_regression,
    script_from_json,
)

MODULE_CHOICES = (*MODULE_KINDS, "all")


class UsageError(ValueError):
    """Bad flags or malformed input files; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _seed_or_env(seed: int | None) -> int:
    if seed is not None:
        return seed
    raw = os.environ.get("STRAP_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"STRAP_SEED must be an integer, got {raw!r}") from None


def _load_registry_arg(path: str | None) -> SchemaRegistry:
    return load_registry(path) if path else default_registry()


def _parse_strategies(raw: str) -> list[str]:
    names = [s.strip().upper() for s in raw.split(",") if s.strip()]
    if not names:
        raise UsageError("no strategies given")
    for name in names:
        if name not in STRATEGIES:
            raise UsageError(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")
    seen = set()
    return [n for n in names if not (n in seen or seen.add(n))]


def _reduction_config(args: argparse.Namespace) -> ReductionConfig:
    try:
        return ReductionConfig(window_w=args.window, clip_n=args.clip, warmup_frames=args.warmup)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {path}")
    return p


def _load_script_arg(source: str):
    if source.startswith("builtin:"):
        name = source[len("builtin:") :]
        try:
            return BUILTIN_SCRIPTS[name]()
        except KeyError:
            raise UsageError(
                f"unknown builtin script {name!r}; choose from {', '.join(sorted(BUILTIN_SCRIPTS))}"
            ) from None
    return load_script(_require_file(source))


def _load_mutants_arg(source: str) -> list[Mutant]:
    if source.startswith("builtin:"):
        name = source[len("builtin:") :]
        try:
            return BUILTIN_MUTANTS[name]()
        except KeyError:
            raise UsageError(
                f"unknown builtin mutant set {name!r}; choose from {', '.join(sorted(BUILTIN_MUTANTS))}"
            ) from None
    return load_mutants(_require_file(source))


def _vectors_doc(module: str, vectors: Sequence[FrameVector]) -> dict[str, Any]:
    return {
        "module": module,
        "t_ns": [v.t_ns for v in vectors],
        "vectors": [list(v.values) for v in vectors],
    }


def _vectors_from_doc(doc: Mapping[str, Any]) -> tuple[str, list[FrameVector]]:
    try:
        times = doc["t_ns"]
        rows = doc["vectors"]
        if len(times) != len(rows):
            raise UsageError(f"{len(times)} timestamps for {len(rows)} vectors")
        return doc.get("module", "all"), [
            FrameVector(tuple(int(x) for x in row), int(t)) for t, row in zip(times, rows)
        ]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"invalid vectors document: {exc}") from exc


def _aligned_vectors(
    rec: Recording, registry: SchemaRegistry, module: str
) -> tuple[AlignedRecording, list[FrameVector]]:
    ar = align_recording(rec)
    flt = None if module == "all" else ModuleFilter.for_module(module, registry)
    return ar, encode_recording(ar, registry, flt)


def _cmd_align(args: argparse.Namespace) -> None:
    rec = load_recording(_require_file(args.infile))
    ar = align_recording(rec)
    atomic_write_text(args.out, dump_recording_jsonl(ar.to_recording()))
    _say(f"aligned {len(ar)} frames across {len(ar.channel_names)} channels -> {args.out}")


def _cmd_vectorize(args: argparse.Namespace) -> None:
    rec = load_recording(_require_file(args.infile))
    registry = _load_registry_arg(args.schema)
    _, vectors = _aligned_vectors(rec, registry, args.module)
    atomic_write_json(args.out, _vectors_doc(args.module, vectors))
    _say(f"encoded {len(vectors)} frames under the {args.module!r} view -> {args.out}")


def _sniff_vectors_file(path: Path) -> Mapping[str, Any] | None:
    """A vectors document is a single JSON object with a "vectors" key."""
    with path.open(encoding="utf-8") as fh:
        head = fh.read(1)
        if head != "{":
            return None
    try:
        doc = read_json(path)
    except json.JSONDecodeError:
        return None
    return doc if isinstance(doc, dict) and "vectors" in doc else None


def _cmd_reduce(args: argparse.Namespace) -> None:
    cfg = _reduction_config(args)
    path = _require_file(args.infile)
    doc = _sniff_vectors_file(path)
    if doc is not None:
        # Vectors are already filtered; the file's own view label wins.
        module, vectors = _vectors_from_doc(doc)
        if args.module is not None and args.module != module:
            _say(f"note: vectors file was encoded under the {module!r} view; keeping it")
    else:
        module = args.module or "all"
        rec = load_recording(path)
        registry = _load_registry_arg(args.schema)
        _, vectors = _aligned_vectors(rec, registry, module)
    segments, _ = reduce_vectors(vectors, cfg)
    times = [v.t_ns for v in vectors]
    atomic_write_json(args.out, segments_to_manifest(segments, cfg, times, module))
    kept = sum(s.length for s in segments)
    pct = 100.0 * (1 - kept / len(vectors))
    _say(
        f"kept {len(segments)} segments, {kept}/{len(vectors)} frames "
        f"({pct:.1f}% reduction) -> {args.out}"
    )


def _build_plans(
    strategies: Sequence[str],
    segments: Sequence[Segment],
    vectors: Sequence[FrameVector] | None,
    *,
    seed: int,
    repetitions: int,
    rarity_mode: str,
    call_counts: Sequence[int] | None,
) -> dict[str, PrioritizedPlan]:
    plans: dict[str, PrioritizedPlan] = {}
    for name in strategies:
        if name == "RSC":
            if vectors is None:
                raise UsageError("RSC needs --vectors for rarity weights")
            plans[name] = prioritize_rsc(segments, vectors, rarity_mode=rarity_mode)
        elif name == "SC":
            plans[name] = prioritize_sc(segments)
        elif name == "CH":
            plans[name] = prioritize_ch(segments)
        elif name == "RD":
            plans[name] = prioritize_rd(segments, seed, repetitions)[0]
        elif name == "CC":
            if call_counts is None:
                raise UsageError("CC needs --call-counts (one integer per segment)")
            plans[name] = prioritize_cc(segments, call_counts)
    return plans


def _write_plan_files(plans: Mapping[str, PrioritizedPlan], out: str) -> None:
    out_path = Path(out)
    single_file = out_path.suffix == ".json"
    if single_file and len(plans) != 1:
        raise UsageError(f"--out {out} is a file but {len(plans)} strategies were requested")
    for name, plan in plans.items():
        base = out_path if single_file else out_path / f"plan_{name}.json"
        atomic_write_json(base, plan_to_json(plan))
        atomic_write_text(base.with_suffix(".csv"), plan_to_csv(plan))
        _say(f"{name}: {len(plan.order)} segments ranked -> {base}")


def _cmd_prioritize(args: argparse.Namespace) -> None:
    strategies = _parse_strategies(args.strategies)
    segments, _ = segments_from_manifest(read_json(_require_file(args.segments)))
    vectors = None
    if args.vectors:
        _, vectors = _vectors_from_doc(read_json(_require_file(args.vectors)))
    call_counts = None
    if args.call_counts:
        call_counts = [int(c) for c in read_json(_require_file(args.call_counts))]
    plans = _build_plans(
        strategies,
        segments,
        vectors,
        seed=_seed_or_env(args.seed),
        repetitions=args.repetitions,
        rarity_mode=args.rarity_mode,
        call_counts=call_counts,
    )
    _write_plan_files(plans, args.out)


def _verdicts_doc(module: str, details: Mapping[str, Any]) -> dict[str, Any]:
    """Extract the per-mutant verdict tables from a regression report."""
    full = {}
    segments: dict[str, Any] = {}
    for mid, entry in details["mutants"].items():
        segments[mid] = entry["segments"]
        full[mid] = {"detected": entry["detected_full"]}
    return {"module": module, "full": full, "segments": segments}


def _fault_sets_from_verdicts(doc: Mapping[str, Any]) -> tuple[dict[int, set[str]], set[str], set[str]]:
    try:
        seg_tables: Mapping[str, Mapping[str, Any]] = doc["segments"]
        fault_sets: dict[int, set[str]] = {}
        reduced_detected: set[str] = set()
        for mid, table in seg_tables.items():
            for sid_raw, cell in table.items():
                sid = int(sid_raw)
                verdict = FaultVerdict(sid, cell["mismatched_frames"], cell["total_frames"])
                fault_sets.setdefault(sid, set())
                if verdict.is_fault:
                    fault_sets[sid].add(mid)
                    reduced_detected.add(mid)
        full_detected = {mid for mid, cell in doc["full"].items() if cell["detected"]}
        return fault_sets, reduced_detected, full_detected
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid verdicts document: {exc}") from exc


def _cmd_evaluate(args: argparse.Namespace) -> None:
    doc = read_json(_require_file(args.verdicts))
    fault_sets, reduced_detected, full_detected = _fault_sets_from_verdicts(doc)
    if args.segments:
        segments, _ = segments_from_manifest(read_json(_require_file(args.segments)))
        known = {s.id for s in segments}
        for sid in known - set(fault_sets):
            fault_sets[sid] = set()
    apfd_by: dict[str, float | None] = {}
    topk_by: dict[str, float | None] = {}
    for path in args.plans:
        plan = plan_from_json(read_json(_require_file(path)))
        a, k = evaluate_plan(plan, fault_sets)
        apfd_by[plan.strategy] = a
        topk_by[plan.strategy] = k
    report = {
        "fault_coverage": fault_coverage(reduced_detected, full_detected),
        "apfd": apfd_by,
        "top_k": topk_by,
        "detected_full": sorted(full_detected),
        "detected_reduced": sorted(reduced_detected),
        "undetected": sorted(
            set(doc.get("full", {})) - full_detected - reduced_detected
        ),
    }
    atomic_write_json(args.out, report)
    lines = ["strategy,top_k,apfd"]
    for name in sorted(apfd_by):
        k, a = topk_by[name], apfd_by[name]
        lines.append(f"{name},{'' if k is None else k},{'' if a is None else repr(a)}")
    atomic_write_text(Path(args.out).with_suffix(".csv"), "\n".join(lines) + "\n")
    _say(f"evaluated {len(args.plans)} plan(s) -> {args.out}")


def _cmd_synth_generate(args: argparse.Namespace) -> None:
    script = _load_script_arg(args.script)
    seed = _seed_or_env(args.seed)
    rec = generate_recording(script, seed)
    atomic_write_text(args.out, dump_recording_jsonl(rec))
    if args.schema_out:
        atomic_write_json(args.schema_out, registry_to_json(default_registry()))
        _say(f"schema -> {args.schema_out}")
    _say(
        f"generated {script.duration_frames} frames, {rec.message_count()} messages "
        f"(seed {seed}) -> {args.out}"
    )


def _random_mutants(module: str, count: int, seed: int) -> list[Mutant]:
    import random

    if module not in MODULE_KINDS:
        raise UsageError(f"unknown module {module!r}")
    rng = random.Random(seed)
    targets = mutable_targets(module)
    defaults = make_module(module).params
    out = []
    for i in range(count):
        op = rng.choice(MUTATION_OPERATORS)
        if op == "flip_condition":
            target, delta = rng.choice(targets["conditions"]), 0.0
        else:
            target = rng.choice(targets["params"])
            base = defaults[target]
            if op == "change_constant":
                delta = round(base * rng.uniform(0.0, 2.0), 3)
            elif op == "change_variable":
                delta = round(base * rng.uniform(-0.5, 0.5), 3)
            else:
                delta = rng.choice((0.2, 0.5, 2.0, 5.0))
        out.append(Mutant(f"{module[:2]}{i}", module, target, op, delta))
    return out


def _cmd_synth_mutate(args: argparse.Namespace) -> None:
    if args.builtin:
        mutants = _load_mutants_arg(f"builtin:{args.builtin}")
    elif args.module:
        mutants = _random_mutants(args.module, args.count, _seed_or_env(args.seed))
    else:
        raise UsageError("pass --builtin NAME or --module KIND")
    atomic_write_json(args.out, mutants_to_json(mutants))
    _say(f"{len(mutants)} mutants -> {args.out}")


def _write_regression_artifacts(
    outdir: Path,
    rec: Recording,
    module: str,
    registry: SchemaRegistry,
    cfg: ReductionConfig,
    report: MetricsReport,
    strategies: Sequence[str],
    *,
    seed: int,
    repetitions: int,
    rarity_mode: str,
) -> None:
    """Recompute and save the pipeline intermediates for one module run.

    Uses the same library calls as the standalone subcommands, so the files
    match what align/vectorize/reduce/prioritize would produce.
    """
    outdir.mkdir(parents=True, exist_ok=True)
    ar = align_recording(rec)
    atomic_write_text(outdir / "aligned.jsonl", dump_recording_jsonl(ar.to_recording()))
    flt = None if module == "all" else ModuleFilter.for_module(module, registry)
    vectors = encode_recording(ar, registry, flt)
    atomic_write_json(outdir / "vectors.json", _vectors_doc(module, vectors))
    segments, _ = reduce_vectors(vectors, cfg)
    times = [v.t_ns for v in vectors]
    atomic_write_json(outdir / "segments.json", segments_to_manifest(segments, cfg, times, module))
    call_counts = report.details.get("call_counts")
    if call_counts is not None:
        atomic_write_json(outdir / "call_counts.json", list(call_counts))
    plans = _build_plans(
        strategies,
        segments,
        vectors,
        seed=seed,
        repetitions=repetitions,
        rarity_mode=rarity_mode,
        call_counts=call_counts,
    )
    _write_plan_files(plans, str(outdir))
    atomic_write_json(outdir / "verdicts.json", _verdicts_doc(module, report.details))


def _cmd_run_regression(args: argparse.Namespace) -> None:
    if bool(args.script) == bool(args.infile):
        raise UsageError("pass exactly one of --script or --in")
    seed = _seed_or_env(args.seed)
    if args.script:
        rec = generate_recording(_load_script_arg(args.script), seed)
    else:
        rec = load_recording(_require_file(args.infile))
    mutants = _load_mutants_arg(args.mutants) if args.mutants else []
    strategies = _parse_strategies(args.strategies)
    cfg = _reduction_config(args)
    registry = _load_registry_arg(args.schema)
    kwargs = dict(
        registry=registry,
        seed=seed,
        repetitions=args.repetitions,
        rarity_mode=args.rarity_mode,
        jobs=args.jobs,
    )
    if args.module == "all":
        if args.artifacts_dir:
            raise UsageError("--artifacts-dir needs a specific --module, not 'all'")
        report = run_benchmark(rec, mutants, strategies, cfg, **kwargs)
    else:
        own = [m for m in mutants if m.module == args.module]
        skipped = len(mutants) - len(own)
        if skipped:
            _say(f"note: {skipped} mutant(s) target other modules and replay clean")
        report = run_regression(rec, args.module, mutants, strategies, cfg, **kwargs)
        if args.artifacts_dir:
            _write_regression_artifacts(
                Path(args.artifacts_dir),
                rec,
                args.module,
                registry,
                cfg,
                report,
                strategies,
                seed=seed,
                repetitions=args.repetitions,
                rarity_mode=args.rarity_mode,
            )
    atomic_write_json(args.out, report_to_json(report))
    atomic_write_text(Path(args.out).with_suffix(".csv"), report_to_csv(report))
    _say(
        f"reduction {report.reduction_pct:.3f}, coverage {report.fault_coverage:.3f} "
        f"-> {args.out}"
    )


def _add_reduction_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, default=5, help="smoothing window (odd)")
    p.add_argument("--clip", type=int, default=45, help="max frames kept per segment")
    p.add_argument("--warmup", type=int, default=15, help="warm-up frames replayed before each segment")


def _add_rank_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategies", default="RSC,SC,CH,RD,CC", help="comma-separated strategy list")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: $STRAP_SEED or 0)")
    p.add_argument("--repetitions", type=int, default=100, help="RD shuffle count")
    p.add_argument("--rarity-mode", choices=("indicator", "literal"), default="indicator")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="strap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("align", help="align a recording onto its reference channel grid")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_align)

    p = sub.add_parser("vectorize", help="encode aligned frames as schema vectors")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--schema", default=None, help="schema JSON (default: built-in)")
    p.add_argument("--module", choices=MODULE_CHOICES, default="all")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_vectorize)

    p = sub.add_parser("reduce", help="smooth, segment, clip, and dedup")
    p.add_argument("--in", dest="infile", required=True, help="recording JSONL or vectors JSON")
    p.add_argument("--schema", default=None)
    p.add_argument("--module", choices=MODULE_CHOICES, default=None,
                   help="view for recording input (default all); vectors input keeps its own")
    _add_reduction_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_reduce)

    p = sub.add_parser("prioritize", help="rank segments under one or more strategies")
    p.add_argument("--segments", required=True)
    p.add_argument("--vectors", default=None, help="vectors JSON (required for RSC)")
    p.add_argument("--call-counts", default=None, help="JSON list, one count per segment (CC)")
    _add_rank_flags(p)
    p.add_argument("--out", required=True, help="plan .json path (one strategy) or directory")
    p.set_defaults(fn=_cmd_prioritize)

    p = sub.add_parser("evaluate", help="score plans against replay verdicts")
    p.add_argument("--verdicts", required=True)
    p.add_argument("--segments", default=None, help="segments JSON for zero-fault segments")
    p.add_argument("--plans", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("synth-generate", help="generate a recording from a scenario script")
    p.add_argument("--script", required=True, help="script JSON path or builtin:NAME")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--schema-out", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_synth_generate)

    p = sub.add_parser("synth-mutate", help="write a mutant set")
    p.add_argument("--builtin", default=None, help=f"one of: {', '.join(sorted(BUILTIN_MUTANTS))}")
    p.add_argument("--module", choices=MODULE_KINDS, default=None)
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_synth_mutate)

    p = sub.add_parser("run-regression", help="full pipeline: reduce, replay mutants, score plans")
    p.add_argument("--script", default=None, help="script JSON path or builtin:NAME")
    p.add_argument("--in", dest="infile", default=None, help="recording JSONL")
    p.add_argument("--mutants", default=None, help="mutants JSON path or builtin:NAME")
    p.add_argument("--schema", default=None)
    p.add_argument("--module", choices=MODULE_CHOICES, default="all")
    _add_reduction_flags(p)
    _add_rank_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel mutant replays")
    p.add_argument("--artifacts-dir", default=None, help="also save pipeline intermediates")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_run_regression)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.fn(args)
        return 0
    except UsageError as exc:
        _say(f"error: {exc}")
        return 1
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        _say(f"error: {exc}")
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        _say(f"internal error: {type(exc).__name__}: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
