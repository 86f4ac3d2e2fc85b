"""Command-line entry point: corpus, fingerprint, index, query, calibrate, evaluate.

Exit codes: 0 success, 1 runtime error, 2 usage error. Settings resolve as
flags over ``--config`` file over defaults, and the resolved settings are
written at the top of every report.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .ard import ArdConfig
from .features import FeatureConfig
from .fingerprint import Fingerprint, PipelineConfig, fingerprint_video, format_float
from .frames import FrameError, load_frames, write_pgm_sequence
from .matchdb import FingerprintDatabase, MatchError, calibrate_adjustment_factor

__all__ = ["main", "build_parser"]

DEFAULT_A = 0.3
DEFAULT_TAU = 0.32
DEFAULT_GRID = "0,0.02,0.05,0.1,0.15,0.2,0.3,0.4,0.5,0.7,1"


class UsageError(Exception):
    pass


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _unit_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _ranks(text):
    try:
        r = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated integers: {text!r}") from None
    if len(r) != 3 or min(r) < 1:
        raise argparse.ArgumentTypeError(f"expected three positive integers: {text!r}")
    return r


# -- configuration -----------------------------------------------------------


def _load_config_file(path):
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return data


def resolve_settings(args) -> dict:
    """Merge defaults, the config file and flags; validate before any work starts."""
    data = _load_config_file(getattr(args, "config", None))
    pipe = dict(data.get("pipeline", {}))
    feature = dict(pipe.pop("feature", {}))
    ard = dict(pipe.pop("ard", {}))
    for flag, target, key in (
        ("frames", pipe, "frames"),
        ("local_points", feature, "local_points"),
        ("max_ranks", ard, "max_ranks"),
        ("prior", ard, "prior"),
        ("snr_db", ard, "snr_db"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            target[key] = value
    seed = getattr(args, "seed", None)
    if seed is not None:
        pipe["seed"] = seed
    try:
        config = PipelineConfig(feature=FeatureConfig(**feature), ard=ArdConfig(**ard), **pipe)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid pipeline settings: {exc}") from None
    a = getattr(args, "a", None)
    tau = getattr(args, "tau", None)
    a = data.get("a", DEFAULT_A) if a is None else a
    tau = data.get("tau", DEFAULT_TAU) if tau is None else tau
    if not 0.0 <= float(a) <= 1.0:
        raise UsageError(f"adjustment factor must lie in [0, 1], got {a}")
    if not float(tau) > 0:
        raise UsageError(f"tau must be positive, got {tau}")
    return {"pipeline": config, "a": float(a), "tau": float(tau)}


def settings_header(settings: dict, extra: dict | None = None) -> list:
    lines = [
        "# pipeline=" + json.dumps(settings["pipeline"].to_dict(), sort_keys=True),
        "# config_digest=" + settings["pipeline"].digest(),
        "# a=" + format_float(settings["a"]),
        "# tau=" + format_float(settings["tau"]),
    ]
    for k, v in sorted((extra or {}).items()):
        lines.append(f"# {k}={v}")
    return lines


# -- parallel helpers --------------------------------------------------------


def _fingerprint_path(job):
    path, config = job
    return fingerprint_video(load_frames(path), config)


def _ordered_map(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _video_id(path) -> str:
    p = Path(path)
    return p.stem if p.suffix in (".raw", ".json") else p.name


# -- commands ----------------------------------------------------------------


def cmd_corpus(args) -> int:
    from .evaluation.corpus import CorpusSpec, synth_video

    try:
        spec = CorpusSpec(
            n_videos=args.n, frames=args.frames_per_video, width=args.width, height=args.height, seed=args.seed
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digits = max(3, len(str(spec.n_videos - 1)))
    for i in range(spec.n_videos):
        write_pgm_sequence(out / f"video_{i:0{digits}d}", synth_video(spec, i))
    print(f"wrote {spec.n_videos} videos to {out}")
    return 0


def cmd_fingerprint(args) -> int:
    settings = resolve_settings(args)
    fps = _ordered_map(_fingerprint_path, [(p, settings["pipeline"]) for p in args.inputs], args.threads)
    lines = [fp.to_json(_video_id(p)) for p, fp in zip(args.inputs, fps)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _open_db(path, config: PipelineConfig, create: bool) -> FingerprintDatabase:
    if os.path.exists(path):
        db = FingerprintDatabase.load(path)
        if db.config_digest != config.digest():
            raise MatchError(
                f"database {path} was built with config {db.config_digest}, current config is {config.digest()}"
            )
        return db
    if not create:
        raise MatchError(f"database {path} does not exist")
    return FingerprintDatabase(config.digest())


def cmd_index(args) -> int:
    settings = resolve_settings(args)
    config = settings["pipeline"]
    db = _open_db(args.db, config, create=True)
    ids = [_video_id(p) for p in args.inputs]
    clash = sorted({i for i in ids if i in db} | {i for i in ids if ids.count(i) > 1})
    if clash:
        raise MatchError(f"duplicate ids: {clash}")
    fps = _ordered_map(_fingerprint_path, [(p, config) for p in args.inputs], args.threads)
    for rid, path, fp in zip(ids, args.inputs, fps):
        db.add(rid, fp, {"source": str(path)})
    db.save(args.db)
    print(f"indexed {len(fps)} videos into {args.db} ({len(db)} records)")
    return 0


def cmd_query(args) -> int:
    settings = resolve_settings(args)
    config = settings["pipeline"]
    db = _open_db(args.db, config, create=False)
    query = fingerprint_video(load_frames(args.input), config)
    if args.exhaustive:
        hits = db.search_exhaustive(query, settings["tau"])
    else:
        hits = db.search(query, settings["a"], settings["tau"])
    mode = "exhaustive" if args.exhaustive else "pre-match"
    lines = settings_header(settings, {"mode": mode, "query": args.input, "records": len(db)})
    if not hits:
        lines.append("no match")
    else:
        lines.append("rank,id,distance,decision")
        for k, h in enumerate(hits[: args.top], start=1):
            lines.append(f"{k},{h.id},{format_float(h.distance)},{h.decision.value}")
    print("\n".join(lines))
    return 0


def _parse_grid(text):
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad grid {text!r}") from None
    if not grid or any(not 0 <= a <= 1 for a in grid):
        raise UsageError("grid values must lie in [0, 1]")
    return grid


def cmd_calibrate(args) -> int:
    settings = resolve_settings(args)
    config = settings["pipeline"]
    grid = _parse_grid(args.grid)
    db = _open_db(args.db, config, create=False)
    pairs = []
    with open(args.pairs, "r", encoding="utf-8") as fh:
        for no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pairs.append((Fingerprint.from_obj(obj), list(obj["positives"])))
            except (ValueError, KeyError, TypeError) as exc:
                raise MatchError(f"{args.pairs} line {no}: {exc}") from None
    curve = calibrate_adjustment_factor(db, pairs, grid)
    extra = {"chosen_a": format_float(curve.chosen), "meets_target": curve.meets_target}
    text = "\n".join(settings_header(settings, extra)) + "\n" + curve.to_csv()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_evaluate(args) -> int:
    from .evaluation.corpus import CorpusSpec, synth_corpus
    from .evaluation.modifications import by_name, single_modifications
    from .evaluation.runner import System, compute_outputs, evaluate_outputs

    settings = resolve_settings(args)
    config = settings["pipeline"]
    if args.corpus:
        root = Path(args.corpus)
        if not root.is_dir():
            raise FrameError(f"{root}: corpus directory not found")
        dirs = sorted(p for p in root.iterdir() if p.is_dir())
        videos = [load_frames(d) for d in dirs]
    else:
        try:
            videos = synth_corpus(CorpusSpec(n_videos=args.n, seed=args.seed))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        mods = [by_name(m) for m in args.mods.split(",")] if args.mods else single_modifications()
    except (ValueError, KeyError) as exc:
        raise UsageError(f"unknown modification: {exc}") from None
    systems = [System.COMPREHENSIVE, System.CONCATENATED] if args.system == "both" else [System(args.system)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tau = args.tau
    for system in systems:
        outputs = compute_outputs(videos, mods, system, config, args.seed, args.threads)
        header = {
            "pipeline": json.dumps(config.to_dict(), sort_keys=True),
            "config_digest": config.digest(),
            "seed": args.seed,
            "videos": len(videos),
            "modifications": ",".join(m.name for m in mods),
            "tau_source": "flag" if tau is not None else "fitted",
        }
        report = evaluate_outputs(outputs, tau=tau, thresholds=args.thresholds or (), header=header)
        (out / f"report_{system.value}.csv").write_text(report.to_csv(), encoding="utf-8")
        (out / f"roc_{system.value}.csv").write_text(report.roc_csv(), encoding="utf-8")
        if report.threshold_model is not None:
            (out / f"threshold_{system.value}.csv").write_text(report.threshold_model.to_csv(), encoding="utf-8")
        print(report.summary())
    return 0


# -- parser ------------------------------------------------------------------


def _pipeline_flags(p):
    p.add_argument("--config", help="JSON file with pipeline settings, a and tau")
    p.add_argument("--frames", type=_positive_int, help="frames sampled per video (I3)")
    p.add_argument("--local-points", dest="local_points", type=int, help="interest points per frame (K)")
    p.add_argument("--max-ranks", dest="max_ranks", type=_ranks, help="ARD rank caps, e.g. 8,6,8")
    p.add_argument("--prior", choices=["gaussian", "laplace"])
    p.add_argument("--snr-db", dest="snr_db", type=float)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=_positive_int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tensorprint", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corpus", help="write a synthetic PGM corpus")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", dest="frames_per_video", type=int, default=64)
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corpus)

    p = sub.add_parser("fingerprint", help="fingerprint videos, one JSON line each")
    p.add_argument("inputs", nargs="+", help="PGM directories or raw frame files")
    p.add_argument("--out")
    _pipeline_flags(p)
    p.set_defaults(func=cmd_fingerprint)

    p = sub.add_parser("index", help="add videos to a fingerprint database")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--db", required=True)
    _pipeline_flags(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="search a database for copies of a video")
    p.add_argument("input")
    p.add_argument("--db", required=True)
    p.add_argument("--a", type=_unit_float)
    p.add_argument("--tau", type=_positive_float)
    p.add_argument("--exhaustive", action="store_true", help="skip tag pre-matching")
    p.add_argument("--top", type=_positive_int, default=10)
    _pipeline_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("calibrate", help="tabulate Ps and Pnd over adjustment factors")
    p.add_argument("--db", required=True)
    p.add_argument("--pairs", required=True, help="JSON lines: fingerprint fields plus a 'positives' id list")
    p.add_argument("--grid", default=DEFAULT_GRID)
    p.add_argument("--out")
    _pipeline_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="copy-detection report over a corpus")
    p.add_argument("--corpus", help="directory of PGM video directories; synthesized when omitted")
    p.add_argument("--n", type=int, default=50, help="synthetic corpus size")
    p.add_argument("--mods", help="comma-separated modification names (default: the 11 single ones)")
    p.add_argument("--system", choices=["comprehensive", "concatenated", "both"], default="comprehensive")
    p.add_argument("--tau", type=_positive_float, help="fixed decision threshold (default: fitted)")
    p.add_argument("--thresholds", type=lambda s: [float(x) for x in s.split(",")], help="extra report thresholds")
    p.add_argument("--out", required=True)
    _pipeline_flags(p)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is None and args.command == "evaluate":
        args.seed = 0
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, FrameError, MatchError, ValueError) as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
