"""Command-line entry point.

Exit codes: 0 success, 1 data or runtime failure, 2 configuration or
usage error.  Data goes to files only; summaries go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, SpkfixError
from .formats import FormatKind
from .metrics import aggregate, evaluate_session
from .pipeline import BACKENDS, CorrectionStats, PipelineConfig, build_backend, correct_sessions, load_config
from .scores import Variant, pool_word_scores
from .synth import synth_posteriors, synth_sessions
from .transcript import load_posteriors, load_sessions, save_posteriors, save_sessions
from .transfer import make_oracle_target

logger = logging.getLogger("spkfix")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2

# CLI flag dest -> config key
_OVERRIDES = {
    "format": "format",
    "variant": "conditioning_variant",
    "backend": "backend",
    "endpoint": "endpoint",
    "chunk_size": "chunk_size",
    "workers": "workers",
    "seed": "seed",
    "th_low": "th_low",
    "th_med": "th_med",
    "max_steps": "max_steps",
    "median_window": "median_window",
}


def _pipeline_config(args) -> PipelineConfig:
    values = load_config(args.config) if args.config else {}
    for dest, key in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            values[key] = value
    if getattr(args, "best_effort", False):
        values["best_effort"] = True
    if getattr(args, "tpst_baseline", False):
        values["tpst_baseline"] = True
    return PipelineConfig.from_mapping(values)


def _summary(**fields):
    print(json.dumps(fields), file=sys.stderr)


def cmd_correct(args) -> int:
    config = _pipeline_config(args)
    sessions = load_sessions(args.input)
    references = None
    if config.backend == "mock-scripted":
        if not args.script:
            raise ConfigError("--script REF.jsonl is required for the mock-scripted backend", "script")
        references = {s.session_id: s for s in load_sessions(args.script)}
    stats = CorrectionStats()
    corrected = correct_sessions(sessions, build_backend(config, references), config, stats)
    save_sessions(corrected, args.output)
    _summary(command="correct", mode="tpst" if config.tpst_baseline else "constrained", **stats.to_dict())
    return EXIT_OK


def cmd_evaluate(args) -> int:
    refs = load_sessions(args.ref)
    hyps = {s.session_id: s for s in load_sessions(args.hyp)}
    ref_ids = {s.session_id for s in refs}
    missing = sorted(ref_ids ^ set(hyps))
    if missing:
        raise SpkfixError(f"unmatched session ids: {', '.join(missing)}")
    lines, reports = [], []
    for ref in refs:
        report = evaluate_session(ref, hyps[ref.session_id])
        assert abs(report.delta_cp - (report.cpwer - report.wer)) <= 1e-12
        reports.append(report)
        lines.append(json.dumps({"session_id": ref.session_id, **report.to_dict()}))
    agg = aggregate(reports)
    lines.append(json.dumps({"aggregate": agg}))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    _summary(
        command="evaluate",
        sessions=agg["sessions"],
        wer=f"{100 * agg['wer']:.2f}",
        cpwer=f"{100 * agg['cpwer']:.2f}",
        delta_cp=f"{100 * agg['delta_cp']:.2f}",
    )
    return EXIT_OK


def cmd_make_oracle(args) -> int:
    sessions = load_sessions(args.input)
    refs = {s.session_id: s for s in load_sessions(args.ref)} if args.ref else {}
    out = []
    for s in sessions:
        if args.ref and s.session_id not in refs:
            raise SpkfixError(f"no reference for session {s.session_id!r}")
        out.append(make_oracle_target(s, refs.get(s.session_id)))
    save_sessions(out, args.output)
    _summary(command="make-oracle", sessions=len(out))
    return EXIT_OK


def cmd_pool_scores(args) -> int:
    window = args.median_window
    if args.config and window is None:
        window = load_config(args.config).get("median_window")
    window = 11 if window is None else window
    sessions = load_sessions(args.input)
    posteriors = load_posteriors(args.posteriors)
    out = []
    for s in sessions:
        if s.session_id not in posteriors:
            raise SpkfixError(f"no posteriors for session {s.session_id!r}")
        out.append(pool_word_scores(posteriors[s.session_id], s, window))
    save_sessions(out, args.output)
    _summary(command="pool-scores", sessions=len(out), median_window=window)
    return EXIT_OK


def cmd_synth(args) -> int:
    if not 0.0 <= args.corruption_rate <= 1.0:
        raise ConfigError("must lie in [0, 1]", "corruption_rate")
    refs, hyps = synth_sessions(
        args.num_sessions,
        seed=args.seed if args.seed is not None else 0,
        corruption_rate=args.corruption_rate,
        turn_bias=args.turn_bias,
        num_speakers=args.num_speakers,
        min_words=args.min_words,
        max_words=args.max_words,
    )
    save_sessions(refs, args.ref_out)
    save_sessions(hyps, args.hyp_out)
    if args.posteriors:
        save_posteriors([synth_posteriors(h) for h in hyps], args.posteriors)
    _summary(command="synth", sessions=len(refs), words=sum(len(r) for r in refs))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML config file")
    common.add_argument("--format", choices=[k.value for k in FormatKind])
    common.add_argument("--variant", choices=[v.value for v in Variant])
    common.add_argument("--backend", choices=BACKENDS)
    common.add_argument("--endpoint", metavar="URL")
    common.add_argument("--chunk-size", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--th-low", type=float)
    common.add_argument("--th-med", type=float)
    common.add_argument("--max-steps", type=int)
    common.add_argument("--best-effort", action="store_true")
    common.add_argument("--tpst-baseline", action="store_true")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="spkfix", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("correct", parents=[common], help="correct speaker labels")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--script", metavar="REF.jsonl", help="reference sessions for the mock-scripted backend")
    p.set_defaults(func=cmd_correct)

    p = sub.add_parser("evaluate", parents=[common], help="WER / cpWER / delta-cp report")
    p.add_argument("ref")
    p.add_argument("hyp")
    p.add_argument("--out", required=True, metavar="REPORT.jsonl")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("make-oracle", parents=[common], help="transfer reference speakers onto hypotheses")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--ref", metavar="REF.jsonl", help="reference sessions (defaults to ref_speakers)")
    p.set_defaults(func=cmd_make_oracle)

    p = sub.add_parser("pool-scores", parents=[common], help="word scores from frame posteriors")
    p.add_argument("input")
    p.add_argument("posteriors")
    p.add_argument("output")
    p.add_argument("--median-window", type=int)
    p.set_defaults(func=cmd_pool_scores)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic reference/hypothesis sets")
    p.add_argument("ref_out")
    p.add_argument("hyp_out")
    p.add_argument("--num-sessions", type=int, default=100)
    p.add_argument("--corruption-rate", type=float, default=0.1)
    p.add_argument("--turn-bias", type=float, default=4.0)
    p.add_argument("--num-speakers", type=int, default=2)
    p.add_argument("--min-words", type=int, default=30)
    p.add_argument("--max-words", type=int, default=150)
    p.add_argument("--posteriors", metavar="PATH", help="also write frame posteriors")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"spkfix: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SpkfixError, OSError) as e:
        print(f"spkfix: error: {e}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
