"""Command-line front end.

    convmix synth-pool    --out pool/ --speakers 20 --per-speaker 50
    convmix simulate      --pool pool/manifest.jsonl --params ch1.json --n 100 --out sim/
    convmix extract-stats sim/rttm --mode markov --out params.json
    convmix compare       real.rttm sim/ --json report.json

Exit codes: 0 success, 1 usage error, 2 data error, 3 too many failed mixtures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import corpus_io, extract, metrics, synth
from ._kernels import BACKEND
from .corpus_io import FormatError
from .render import AudioStore, RenderConfig, load_wav_dir, render_mixture
from .sampling import RNG_ALGORITHM, derive_seed, make_rng
from .simulator import (
    PoolExhaustedError,
    concat_and_sum_plan,
    draw_speaker_lists,
    simulate_plan,
    transition_histogram,
)
from .timeline import annotation_from_plan, callhome1_params

log = logging.getLogger("convmix")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3
MAX_FAILURE_FRACTION = 0.01


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(s):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


# -- simulate ---------------------------------------------------------------

_CTX: dict = {}


def _init_worker(ctx):
    _CTX.clear()
    _CTX.update(ctx)


def _mixture_id(i: int) -> str:
    return f"mix{i:06d}"


def _build_plan(ctx, index):
    seed = derive_seed(ctx["seed"], index)
    mid = _mixture_id(index)
    if ctx["method"] == "proposed":
        return simulate_plan(ctx["pool"], ctx["params"], seed, mid)
    rng = make_rng(seed, 1)
    lists = draw_speaker_lists(ctx["pool"], ctx["params"].n_spk, ctx["per_speaker"], rng)
    return concat_and_sum_plan(lists, ctx["beta"], seed, mid)


def _simulate_one(index):
    ctx = _CTX
    out = Path(ctx["out"])
    try:
        plan = _build_plan(ctx, index)
        ann = annotation_from_plan(plan)
        if not ctx["labels_only"]:
            res = render_mixture(plan, ctx["audio"], ctx["render"], plan.seed)
            corpus_io.write_wav(out / "wav" / f"{plan.mixture_id}.wav", res.waveform)
        (out / "rttm" / f"{plan.mixture_id}.rttm").write_text(corpus_io.write_rttm([ann]))
        corpus_io.write_plan(out / "plan" / f"{plan.mixture_id}.json", plan)
    except (ValueError, OSError, PoolExhaustedError, KeyError) as e:
        return index, None, f"{type(e).__name__}: {e}"
    record = {
        "id": plan.mixture_id,
        "seed": plan.seed,
        "n_utt": len(plan.placements),
        "duration": plan.extent,
        "transitions": transition_histogram(plan),
    }
    return index, record, None


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    pool = corpus_io.load_pool(args.pool, args.min_duration)
    params = corpus_io.load_params(args.params) if args.params else callhome1_params()
    overrides = {}
    if args.selection:
        overrides["mode"] = args.selection
    if args.n_utt:
        overrides["n_utt"] = args.n_utt
    if args.n_spk:
        overrides["n_spk"] = args.n_spk
    if overrides:
        params = params.replace(**overrides)
    if params.mode == "markov" and params.p_markov is None:
        raise UsageError("markov selection needs p_markov in the params file")

    out = Path(args.out)
    for sub in ("rttm", "plan") + (() if args.labels_only else ("wav",)):
        (out / sub).mkdir(parents=True, exist_ok=True)

    ctx = {
        "pool": pool,
        "params": params,
        "method": args.method,
        "beta": args.beta,
        "per_speaker": args.per_speaker or max(params.n_utt // params.n_spk, 1),
        "seed": args.seed,
        "out": str(out),
        "labels_only": args.labels_only,
    }
    if not args.labels_only:
        rirs = load_wav_dir(args.rir_dir) if args.rir_dir else []
        noises = load_wav_dir(args.noise_dir) if args.noise_dir else []
        ctx["render"] = RenderConfig(rirs, noises, params.snr_choices, args.rate, args.clip)
        ctx["audio"] = AudioStore.from_pool(pool)

    indices = range(args.n)
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers, initializer=_init_worker, initargs=(ctx,)) as ex:
            results = list(ex.map(_simulate_one, indices, chunksize=max(1, args.n // (4 * args.workers))))
    else:
        _init_worker(ctx)
        results = [_simulate_one(i) for i in indices]

    failures = []
    with open(out / "mixtures.jsonl", "w") as f:
        for index, record, err in sorted(results, key=lambda r: r[0]):
            if err:
                log.error("mixture %s failed: %s", _mixture_id(index), err)
                failures.append({"id": _mixture_id(index), "error": err})
                continue
            line = json.dumps(record, sort_keys=True)
            log.info(line)
            f.write(line + "\n")

    written = sorted((out / "rttm").glob("*.rttm"))
    stats = metrics.dataset_stats(corpus_io.read_rttm_inputs(written)) if written else None
    summary = {
        "method": args.method,
        "selection": params.mode if args.method == "proposed" else None,
        "beta": args.beta if args.method == "concat-sum" else None,
        "seed": args.seed,
        "rng": RNG_ALGORITHM,
        "n_requested": args.n,
        "n_written": args.n - len(failures),
        "failures": failures,
        "silence_ratio": stats.silence_ratio if stats else None,
        "overlap_ratio": stats.overlap_ratio if stats else None,
        "total_hours": stats.total_duration if stats else 0.0,
        "params": corpus_io.params_to_dict(params),
    }
    summary_path = Path(args.json) if args.json else out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps({k: summary[k] for k in ("n_written", "silence_ratio", "overlap_ratio",
                                              "total_hours")}))
    if len(failures) > MAX_FAILURE_FRACTION * args.n:
        log.error("%d of %d mixtures failed", len(failures), args.n)
        return EXIT_PARTIAL
    return EXIT_OK


# -- extract-stats ----------------------------------------------------------

def cmd_extract(args) -> int:
    annotations = corpus_io.read_rttm_inputs(args.rttm)
    annotations = [a for a in annotations if a.segments]
    if not annotations:
        raise FormatError("no annotations")
    stats = extract.collect(annotations)
    params, fallback = extract.fit(stats, args.mode, args.epsilon, args.fallback_uniform)
    corpus_io.save_params(args.out, params)
    diag = extract.diagnostics(stats, params, fallback)
    diag_path = Path(args.json) if args.json else Path(args.out).with_suffix(".diagnostics.json")
    diag_path.write_text(json.dumps(diag, indent=2) + "\n")
    print(json.dumps(corpus_io.params_to_dict(params)))
    return EXIT_OK


# -- compare ----------------------------------------------------------------

def _dataset_inputs(path):
    p = Path(path)
    if p.is_dir() and (p / "rttm").is_dir():
        p = p / "rttm"
    return corpus_io.read_rttm_inputs([p])


def cmd_compare(args) -> int:
    a = metrics.dataset_stats(_dataset_inputs(args.a))
    b = metrics.dataset_stats(_dataset_inputs(args.b))
    report = metrics.compare_datasets(a, b, args.gamma)
    sys.stdout.write(metrics.format_report(report, Path(args.a).name, Path(args.b).name))
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


# -- synth-pool -------------------------------------------------------------

def cmd_synth_pool(args) -> int:
    recs = synth.synth_pool(args.out, args.speakers, args.per_speaker, args.mean, args.min,
                            args.max, args.rate, args.seed, write_audio=not args.labels_only,
                            shape=args.shape, sigma=args.sigma)
    if args.noises:
        synth.synth_noises(Path(args.out) / "noise", args.noises, sample_rate=args.rate, seed=args.seed)
    if args.rirs:
        synth.synth_rirs(Path(args.out) / "rir", args.rirs, sample_rate=args.rate, seed=args.seed)
    print(json.dumps({"manifest": str(Path(args.out) / "manifest.jsonl"), "rows": len(recs)}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="convmix", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="simulate a dataset of mixtures")
    s.add_argument("--method", choices=("proposed", "concat-sum"), default="proposed")
    s.add_argument("--selection", choices=("random", "markov"),
                   help="transition selection (overrides the params file)")
    s.add_argument("--params", help="params JSON (default: CALLHOME1 table values)")
    s.add_argument("--pool", required=True, help="utterance manifest (JSON lines)")
    s.add_argument("--min-duration", type=float, default=0.0,
                   help="drop utterances shorter than this (s)")
    s.add_argument("--n", type=int, required=True, help="number of mixtures")
    s.add_argument("--n-utt", type=_positive_int)
    s.add_argument("--n-spk", type=_positive_int)
    s.add_argument("--beta", type=_positive_float, default=2.0,
                   help="concat-sum mean silence (s)")
    s.add_argument("--per-speaker", type=_positive_int,
                   help="concat-sum utterances per speaker (default n_utt // n_spk)")
    s.add_argument("--labels-only", action="store_true", help="write RTTM and plans only")
    s.add_argument("--rir-dir")
    s.add_argument("--noise-dir")
    s.add_argument("--rate", type=_positive_int, default=corpus_io.DEFAULT_SAMPLE_RATE)
    s.add_argument("--clip", choices=("rescale", "clamp"), default="rescale")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=_positive_int, default=1)
    s.add_argument("--json", help="summary JSON path (default OUT/summary.json)")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("extract-stats", help="estimate simulation parameters from RTTM")
    e.add_argument("rttm", nargs="+", help="RTTM files or directories")
    e.add_argument("--mode", choices=("random", "markov"), default="markov")
    e.add_argument("--epsilon", type=float, default=corpus_io.DEFAULT_EPSILON)
    e.add_argument("--fallback-uniform", action="store_true",
                   help="fill unsupported P_Markov columns uniformly over observed types "
                        "instead of failing")
    e.add_argument("--out", required=True, help="params JSON to write")
    e.add_argument("--json", help="diagnostics JSON (default OUT with .diagnostics.json)")
    e.add_argument("--seed", type=int, default=0, help=argparse.SUPPRESS)
    e.add_argument("--workers", type=_positive_int, default=1, help=argparse.SUPPRESS)
    e.set_defaults(func=cmd_extract)

    c = sub.add_parser("compare", help="silence/overlap ratios and similarities of two datasets")
    c.add_argument("a", help="RTTM file, directory, or simulate output directory")
    c.add_argument("b")
    c.add_argument("--gamma", type=_positive_float, default=metrics.DEFAULT_GAMMA)
    c.add_argument("--json", help="write the report as JSON")
    c.set_defaults(func=cmd_compare)

    g = sub.add_parser("synth-pool", help="generate a synthetic utterance pool")
    g.add_argument("--out", required=True)
    g.add_argument("--speakers", type=_positive_int, default=20)
    g.add_argument("--per-speaker", type=_positive_int, default=50)
    g.add_argument("--mean", type=_positive_float, default=3.0)
    g.add_argument("--shape", choices=("exponential", "lognormal"), default="exponential")
    g.add_argument("--sigma", type=_positive_float, default=0.25, help="log-normal shape")
    g.add_argument("--min", type=float, default=0.3)
    g.add_argument("--max", type=float, default=10.0)
    g.add_argument("--rate", type=_positive_int, default=corpus_io.DEFAULT_SAMPLE_RATE)
    g.add_argument("--noises", type=int, default=0, help="also write N noise files")
    g.add_argument("--rirs", type=int, default=0, help="also write N impulse responses")
    g.add_argument("--labels-only", action="store_true", help="manifest only, no WAVs")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_synth_pool)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("kernel backend: %s", BACKEND)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"convmix: usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ValueError, FileNotFoundError, PoolExhaustedError) as e:
        print(f"convmix: error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
