"""Command-line surface: evaluation, selection, orchestration, correlation.

Exit codes: 0 success, 2 bad input or usage, 3 scorer/metric failure,
4 endpoint failure. Every subcommand prints its resolved configuration to
stderr before doing any work. Set DIVQ_LOG to control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .core import (
    CandidateSet,
    Instance,
    Question,
    _iter_jsonl,
    load_instances,
    read_json,
    write_json,
)
from .errors import (
    DivqError,
    EndpointFailure,
    KeyMismatch,
    MalformedLine,
    ScorerError,
)
from .metrics import (
    CorpusMetricReport,
    MetricSpec,
    corpus_metric,
    format_table,
    pearson,
    report_to_dict,
)
from .orchestrator import Orchestrator, RunConfig
from .relevance import make_scorer
from .selection import select_backward, select_forward, write_selection_outcome
from .textproc import TokenizeConfig

INPUT_ERRORS_EXIT = 2
METRIC_ERRORS_EXIT = 3
ENDPOINT_ERRORS_EXIT = 4

_PRESET_ITERATIONS = {"wq": 2, "pq": 1}


class UsageError(DivqError):
    """Bad flag combination or unusable parameter value."""


def _announce(config: dict) -> None:
    print("resolved config:", json.dumps(config, sort_keys=True), file=sys.stderr)


def _tokenize_config(args) -> TokenizeConfig:
    return TokenizeConfig(fold_case=not args.keep_case, strip_punct=not args.keep_punct)


def _build_scorer(args, config: TokenizeConfig):
    return make_scorer(
        args.scorer,
        embeddings_path=args.embeddings,
        embed_url=args.embed_url,
        config=config,
    )


def _require_explicit_gate(args, value, flag: str):
    """Embedding scorers default the 0.7 gate; other kinds must state theirs."""
    if value is not None:
        return value
    if args.scorer in ("embed-file", "embed-http"):
        return 0.7
    raise UsageError(
        f"{flag} must be given explicitly when --scorer is {args.scorer!r}; "
        "the 0.7 default is calibrated for embedding scorers only"
    )


def _parse_metric_tokens(tokens: list[str]) -> list[tuple[str, int]]:
    """Map tokens like diverse, dist-1, bleu-2, relevance to (kind, n)."""
    parsed = []
    for token in tokens:
        if token == "diverse":
            parsed.append(("diverse", 0))
        elif token == "relevance":
            parsed.append(("relevance", 0))
        elif token.startswith("dist-") or token.startswith("bleu-"):
            kind = "distinct" if token.startswith("dist-") else "bleu"
            try:
                n = int(token.split("-", 1)[1])
            except ValueError:
                raise UsageError(f"bad metric token {token!r}")
            if n < 1:
                raise UsageError(f"bad metric token {token!r}")
            parsed.append((kind, n))
        else:
            raise UsageError(
                f"unknown metric {token!r} (expected diverse, dist-N, bleu-N, relevance)"
            )
    return parsed


def _load_candidates_file(path: str) -> dict[str, CandidateSet]:
    sets: dict[str, CandidateSet] = {}
    for line_no, obj in _iter_jsonl(path):
        try:
            instance_id = obj["instance_id"]
            cand = CandidateSet.from_dict(obj, instance_id)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedLine(path, line_no, str(exc)) from exc
        if instance_id in sets:
            raise MalformedLine(path, line_no, f"duplicate instance_id {instance_id!r}")
        sets[instance_id] = cand
    return sets


def _join_candidates(instances: list[Instance], candidates_path: str | None) -> list[Instance]:
    if candidates_path is None:
        return instances
    table = _load_candidates_file(candidates_path)
    joined = []
    known = {inst.id for inst in instances}
    for cid in table:
        if cid not in known:
            raise UsageError(f"candidates file names unknown instance id {cid!r}")
    for inst in instances:
        if inst.id not in table:
            raise UsageError(f"candidates file lacks instance id {inst.id!r}")
        joined.append(inst.with_candidates(table[inst.id]))
    return joined


# --- subcommands ----------------------------------------------------------


def cmd_eval(args) -> int:
    config = _tokenize_config(args)
    metric_tokens = _parse_metric_tokens(args.metrics)
    needs_gate = any(kind == "diverse" for kind, _ in metric_tokens)
    alpha = _require_explicit_gate(args, args.alpha, "--alpha") if needs_gate else args.alpha
    for k in args.k:
        if k < 1 or (needs_gate and k < 2):
            raise UsageError(f"k={k} unusable: diverse@k needs k >= 2")
    _announce(
        {
            "command": "eval",
            "instances": args.instances,
            "candidates": args.candidates,
            "k": args.k,
            "metrics": args.metrics,
            "scorer": args.scorer,
            "alpha": alpha,
            "out_dir": args.out_dir,
            "keep_case": args.keep_case,
            "keep_punct": args.keep_punct,
        }
    )
    instances = _join_candidates(load_instances(args.instances), args.candidates)
    needs_scorer = any(kind in ("diverse", "relevance") for kind, _ in metric_tokens)
    scorer = _build_scorer(args, config) if needs_scorer else None

    os.makedirs(args.out_dir, exist_ok=True)
    reports: dict[tuple[int, str], CorpusMetricReport] = {}
    for k in args.k:
        for kind, n in metric_tokens:
            spec = MetricSpec(
                kind=kind,
                k=k,
                n=max(n, 1),
                alpha=alpha if alpha is not None else 0.7,
                config=config,
            )
            report = corpus_metric(instances, spec, scorer)
            reports[(k, kind)] = report
            out_path = os.path.join(args.out_dir, f"{kind}_top{k}.json")
            write_json(report_to_dict(report), out_path)

    headers = ["top-k"] + [
        reports[(args.k[0], kind)].metric_name.replace(f"@{args.k[0]}", "@k")
        for kind, _ in metric_tokens
    ]
    rows = [
        [str(k)] + [reports[(k, kind)].corpus_value for kind, _ in metric_tokens]
        for k in args.k
    ]
    table = format_table(headers, rows)
    with open(os.path.join(args.out_dir, "table.txt"), "w", encoding="utf-8") as handle:
        handle.write(table)
    sys.stdout.write(table)
    return 0


def cmd_correlate(args) -> int:
    _announce({"command": "correlate", "system": args.system, "human": args.human})
    system = read_json(args.system)
    human = read_json(args.human)
    if not isinstance(system, dict) or not isinstance(human, dict):
        raise UsageError("score files must be JSON objects of {id: value}")
    if set(system) != set(human):
        raise KeyMismatch(set(system) - set(human), set(human) - set(system))
    ids = sorted(system)
    value = pearson([float(system[i]) for i in ids], [float(human[i]) for i in ids])
    print(f"{value:.3f}")
    return 0


def _write_selection_dir(outcome, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_selection_outcome(
        outcome,
        pairs_path=os.path.join(out_dir, "selected.jsonl"),
        summary_path=os.path.join(out_dir, "summary.json"),
        audit_path=os.path.join(out_dir, "rejected.jsonl"),
    )
    print(
        f"selected {len(outcome.selected)} of {outcome.input_size} "
        f"(threshold {outcome.threshold_used})"
    )


def cmd_select_backward(args) -> int:
    config = _tokenize_config(args)
    threshold = _require_explicit_gate(args, args.threshold, "--threshold")
    _announce(
        {
            "command": "select-backward",
            "triples": args.triples,
            "threshold": threshold,
            "scorer": args.scorer,
            "out_dir": args.out_dir,
        }
    )
    triples = []
    for line_no, obj in _iter_jsonl(args.triples):
        try:
            triples.append(
                (
                    obj["source"],
                    Question.from_dict(obj["external"]),
                    Question.from_dict(obj["roundtrip"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedLine(args.triples, line_no, str(exc)) from exc
    scorer = _build_scorer(args, config)
    outcome = select_backward(triples, scorer, threshold)
    _write_selection_dir(outcome, args.out_dir)
    return 0


def cmd_select_forward(args) -> int:
    config = _tokenize_config(args)
    threshold = _require_explicit_gate(args, args.threshold, "--threshold")
    _announce(
        {
            "command": "select-forward",
            "instances": args.instances,
            "candidates": args.candidates,
            "threshold": threshold,
            "k": args.select_k,
            "scorer": args.scorer,
            "out_dir": args.out_dir,
        }
    )
    instances = _join_candidates(load_instances(args.instances), args.candidates)
    groups = []
    for inst in instances:
        if inst.candidates is None:
            raise UsageError(f"instance {inst.id!r} has no generated questions")
        groups.append((inst, list(inst.candidates.questions)))
    scorer = _build_scorer(args, config)
    outcome = select_forward(groups, scorer, threshold, k=args.select_k, config=config)
    _write_selection_dir(outcome, args.out_dir)
    return 0


def cmd_orchestrate(args) -> int:
    data = read_json(args.config)
    if not isinstance(data, dict):
        raise UsageError("run config must be a JSON object")
    if args.preset:
        data.setdefault("iterations", _PRESET_ITERATIONS[args.preset])
    if args.seed is not None:
        data["seed"] = args.seed
    if args.instances is not None:
        data["instances_path"] = args.instances
    if args.external_questions is not None:
        data["external_questions_path"] = args.external_questions
    try:
        config = RunConfig(**data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad run config: {exc}") from exc
    _announce({"command": "orchestrate", **{k: v for k, v in sorted(data.items())}})
    state = Orchestrator(config).run()
    print(f"run {state.run_id}: phase {state.phase}")
    return 0


def cmd_resume(args) -> int:
    config_path = os.path.join(args.run_dir, "config.json")
    if not os.path.isfile(config_path):
        raise UsageError(f"no config.json under {args.run_dir!r}")
    data = read_json(config_path)
    data["run_dir"] = args.run_dir
    try:
        config = RunConfig(**data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad run config: {exc}") from exc
    _announce({"command": "resume", "run_dir": args.run_dir})
    orchestrator = Orchestrator(config)
    state = orchestrator.resume()
    if state.phase == "done":
        print(f"run {state.run_id}: already done")
    else:
        print(f"run {state.run_id}: phase {state.phase}")
    return 0


# --- parser ---------------------------------------------------------------


def _add_scorer_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--scorer",
        choices=["lexical", "embed-file", "embed-http"],
        default="lexical",
        help="relevance scorer kind (default: lexical)",
    )
    parser.add_argument("--embeddings", help="embedding table JSONL (embed-file)")
    parser.add_argument("--embed-url", help="embedder endpoint base URL (embed-http)")


def _add_tokenize_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--keep-case", action="store_true", help="do not lowercase before tokenizing"
    )
    parser.add_argument(
        "--keep-punct", action="store_true", help="do not strip punctuation to spaces"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="divq",
        description="Diversity evaluation, pseudo-pair selection, and dual-model "
        "training orchestration for top-k question generation.",
    )
    parser.add_argument("--version", action="version", version=f"divq {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_eval = sub.add_parser("eval", help="compute corpus metrics over top-k candidates")
    p_eval.add_argument("--instances", required=True, help="instance corpus JSONL")
    p_eval.add_argument("--candidates", help="separate candidate JSONL joined by instance_id")
    p_eval.add_argument(
        "--k", type=int, nargs="+", default=[3, 5, 10], help="top-k windows (default: 3 5 10)"
    )
    p_eval.add_argument(
        "--metrics",
        nargs="+",
        default=["relevance", "bleu-1", "diverse", "dist-1"],
        help="metrics: relevance, bleu-N, diverse, dist-N "
        "(default: relevance bleu-1 diverse dist-1)",
    )
    p_eval.add_argument(
        "--alpha", type=float, help="relevance gate for diverse@k (required for lexical)"
    )
    p_eval.add_argument("--out-dir", required=True, help="directory for report files")
    _add_scorer_flags(p_eval)
    _add_tokenize_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_corr = sub.add_parser("correlate", help="Pearson correlation of two {id: value} files")
    p_corr.add_argument("system", help="system scores JSON")
    p_corr.add_argument("human", help="human scores JSON")
    p_corr.set_defaults(func=cmd_correlate)

    p_sb = sub.add_parser(
        "select-backward", help="filter pseudo pairs by round-trip semantic score"
    )
    p_sb.add_argument(
        "--triples", required=True,
        help="JSONL of {source, external:{id,text}, roundtrip:{id,text}}",
    )
    p_sb.add_argument(
        "--threshold", type=float, help="strict selection threshold (required for lexical)"
    )
    p_sb.add_argument("--out-dir", required=True)
    _add_scorer_flags(p_sb)
    _add_tokenize_flags(p_sb)
    p_sb.set_defaults(func=cmd_select_backward)

    p_sf = sub.add_parser(
        "select-forward", help="keep the most diverse relevant candidate per instance"
    )
    p_sf.add_argument("--instances", required=True, help="instance corpus JSONL")
    p_sf.add_argument("--candidates", help="separate candidate JSONL joined by instance_id")
    p_sf.add_argument(
        "--threshold", type=float, help="inclusive relevance gate (required for lexical)"
    )
    p_sf.add_argument(
        "--select-k", type=int, default=5, help="candidate window per instance (default: 5)"
    )
    p_sf.add_argument("--out-dir", required=True)
    _add_scorer_flags(p_sf)
    _add_tokenize_flags(p_sf)
    p_sf.set_defaults(func=cmd_select_forward)

    p_orc = sub.add_parser("orchestrate", help="run the full training loop from a config")
    p_orc.add_argument("--config", required=True, help="run config JSON")
    p_orc.add_argument(
        "--preset",
        choices=sorted(_PRESET_ITERATIONS),
        help="iteration-count preset applied when the config omits iterations",
    )
    p_orc.add_argument("--seed", type=int, help="override the generation seed")
    p_orc.add_argument("--instances", help="override the config's instance corpus")
    p_orc.add_argument(
        "--external-questions", help="override the config's external question corpus"
    )
    p_orc.set_defaults(func=cmd_orchestrate)

    p_res = sub.add_parser("resume", help="continue a checkpointed run")
    p_res.add_argument("--run-dir", required=True, help="run directory with state.json")
    p_res.set_defaults(func=cmd_resume)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("DIVQ_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EndpointFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ENDPOINT_ERRORS_EXIT
    except (UsageError, MalformedLine) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERRORS_EXIT
    except ScorerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return METRIC_ERRORS_EXIT
    except DivqError as exc:
        from .errors import (
            BothEmpty,
            EmptyBatch,
            EmptyGroup,
            InvalidK,
            InvalidN,
            LengthMismatch,
            TooFewQuestions,
            ZeroVariance,
        )

        metric_kinds = (
            BothEmpty, EmptyBatch, EmptyGroup, InvalidK, InvalidN,
            LengthMismatch, TooFewQuestions, ZeroVariance,
        )
        print(f"error: {exc}", file=sys.stderr)
        return METRIC_ERRORS_EXIT if isinstance(exc, metric_kinds) else INPUT_ERRORS_EXIT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERRORS_EXIT


if __name__ == "__main__":
    sys.exit(main())
