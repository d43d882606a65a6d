"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluation, published
from .errors import DataError
from .focus_curve import AcquisitionEvaluator, FocusCurve, ground_truth_position
from .image_model import measure_star_fwhm, normalized_variance
from .search_algorithms import ALGORITHMS, DISPLAY_NAMES, SearchParams, canonical_algorithm, run_search
from .sequence_io import (
    outcome_record,
    read_curve_csv,
    read_manifest,
    read_records,
    write_curve_csv,
    write_records,
)
from . import sequence_sim as sim

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_search_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--start", type=int, default=0, help="start index for Global/MFCS (default 0)")
    p.add_argument("--coarse-step", type=int, default=8, help="grid step for Global/MFCS coarse scan (default 8)")
    p.add_argument("--min-interval", type=int, default=2, help="Binary/Subbarao reduction stop (default 2)")
    p.add_argument("--n-evals", type=int, default=None, help="Fibonacci probe count (default: smallest n with F_n >= samples)")
    p.add_argument("--fit", choices=("quadratic", "gaussian"), default="quadratic")
    p.add_argument("--reuse-fit-frames", action="store_true",
                   help="Subbarao: reuse cached levels for the fit instead of fresh exposures")
    p.add_argument("--count-revisits", action="store_true", help="charge a step for every query, not only new frames")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="focussearch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="render a synthetic focus sequence")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(sim.PRESET_TABLE))
    src.add_argument("--spec", type=Path, help="JSON sequence description")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--size", type=int, default=512, help="square frame size in pixels for presets")
    g.add_argument("--noise-free", action="store_true")
    g.add_argument("--workers", type=int, default=1)

    m = sub.add_parser("measure", help="per-frame focus level and FWHM")
    m.add_argument("--manifest", type=Path, required=True)
    m.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("search", help="run one search algorithm")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--curve", type=Path)
    src.add_argument("--manifest", type=Path)
    s.add_argument("--algorithm", required=True)
    _add_search_options(s)
    s.add_argument("--out", type=Path, help="JSON-lines record (default stdout)")

    b = sub.add_parser("bench", help="score algorithms on one or more sequences")
    b.add_argument("--input", type=Path, nargs="+", required=True, help="manifests or curve CSVs")
    b.add_argument("--algorithms", default="all", help="'all' or a comma-separated list")
    b.add_argument("--truth", choices=("fwhm", "measure", "declared"), default="fwhm")
    b.add_argument("--out-dir", type=Path, required=True)
    _add_search_options(b)

    pd = sub.add_parser("plot-data", help="trajectory rows from a search record")
    pd.add_argument("--from", dest="source", type=Path, required=True)
    pd.add_argument("--out", type=Path, required=True)
    pd.add_argument("--record", type=int, default=0, help="which record of the file (default 0)")

    v = sub.add_parser("verify-paper", help="re-score the published comparison tables")
    v.add_argument("--out", type=Path, required=True)
    return parser


def _params(args, algorithm: str) -> SearchParams:
    try:
        return SearchParams(
            algorithm=algorithm,
            start_index=args.start,
            coarse_step=args.coarse_step,
            n_evals=args.n_evals,
            min_interval=args.min_interval,
            fit=args.fit,
            fresh_fit=not args.reuse_fit_frames,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_input(path: Path):
    if path.suffix.lower() == ".csv":
        return read_curve_csv(path)
    return read_manifest(path)


def _evaluator(source, count_revisits: bool) -> AcquisitionEvaluator:
    if isinstance(source, FocusCurve):
        return AcquisitionEvaluator.from_curve(source, count_revisits)
    return AcquisitionEvaluator.from_frames(source, normalized_variance, count_revisits)


def _load_spec(path: Path, seed: int) -> sim.SequenceSpec:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
        d = doc["defocus"]
        model = sim.DefocusModel(float(d["z_best_um"]), float(d["fwhm_seeing_px"]), float(d["defocus_coeff"]))
        f = doc.get("field", {})
        size = tuple(int(v) for v in f.get("image_size_px", (512, 512)))
        noise = {
            "background_level": float(f.get("background_level", 1000.0)),
            "read_noise_sigma": float(f.get("read_noise_sigma", 0.0)),
            "photon_noise": bool(f.get("photon_noise", False)),
        }
        if "stars" in f:
            stars = tuple(tuple(float(v) for v in star) for star in f["stars"])
            field = sim.StarFieldSpec(image_size_px=size, stars=stars, seed=seed, **noise)
        else:
            field = sim.random_star_field(seed, size, **noise)
        return sim.SequenceSpec(
            name=str(doc.get("name", path.stem)),
            start_um=float(doc["start_um"]),
            step_um=float(doc["step_um"]),
            frame_count=int(doc["frame_count"]),
            defocus=model,
            field=field,
        )
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: bad sequence spec ({exc})") from None


def cmd_generate(args) -> int:
    if args.seed < 0:
        raise UsageError("--seed must be an unsigned integer")
    if args.preset:
        seq = sim.preset(args.preset, seed=args.seed, image_size_px=(args.size, args.size), noise_free=args.noise_free)
    else:
        seq = _load_spec(args.spec, args.seed)
        if args.noise_free:
            seq = sim.without_noise(seq)
    manifest = sim.generate_sequence(seq, args.out, workers=args.workers)
    print(f"wrote {manifest.frame_count} frames and {args.out / 'manifest.txt'}")
    return 0


def cmd_measure(args) -> int:
    manifest = read_manifest(args.manifest)
    levels, fwhm = [], []
    for i in range(manifest.frame_count):
        img = manifest.load_frame(i)
        levels.append(normalized_variance(img))
        try:
            fwhm.append(measure_star_fwhm(img).fwhm_px)
        except DataError as exc:
            raise DataError(f"frame {i} ({manifest.frames[i]}): {exc}") from None
    curve = FocusCurve(manifest.start_um, manifest.step_um, tuple(levels), manifest.name, tuple(fwhm))
    write_curve_csv(curve, args.out)
    print(f"wrote {curve.count} rows to {args.out}")
    return 0


def _record_for(source, params: SearchParams, count_revisits: bool) -> dict:
    ev = _evaluator(source, count_revisits)
    try:
        outcome = run_search(ev, params)
    except ValueError as exc:
        if isinstance(exc, DataError):
            raise
        raise UsageError(str(exc)) from None
    rec = outcome_record(outcome, source.name, ev.start_um, ev.step_um)
    rec["count_revisits"] = count_revisits
    return rec


def cmd_search(args) -> int:
    algorithm = _canonical_or_usage(args.algorithm)
    source = read_curve_csv(args.curve) if args.curve else read_manifest(args.manifest)
    rec = _record_for(source, _params(args, algorithm), args.count_revisits)
    if args.out:
        write_records([rec], args.out)
    else:
        sys.stdout.write(json.dumps(rec, sort_keys=True) + "\n")
    return 0


def _canonical_or_usage(name: str) -> str:
    try:
        return canonical_algorithm(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_bench(args) -> int:
    if args.algorithms.strip().lower() == "all":
        algorithms = list(ALGORITHMS)
    else:
        algorithms = [_canonical_or_usage(a) for a in args.algorithms.split(",") if a.strip()]
    if not algorithms:
        raise UsageError("no algorithms selected")
    args.out_dir.mkdir(parents=True, exist_ok=True)

    tables, names, records = [], [], []
    for path in args.input:
        source = _load_input(path)
        name = source.name
        while name in names:
            name += "_"
        names.append(name)
        truth = ground_truth_position(source, args.truth)
        rows = []
        for algorithm in algorithms:
            rec = _record_for(source, _params(args, algorithm), args.count_revisits)
            rec["truth_um"] = truth
            rec["error_um"] = abs(rec["best_position_um"] - truth)
            records.append(rec)
            rows.append((DISPLAY_NAMES[algorithm], rec["steps"], rec["error_um"]))
        table = evaluation.score_table(rows, name, error_floor_um=source.step_um / 2)
        tables.append(table)
        (args.out_dir / f"{name}.csv").write_text(evaluation.table_csv(table), encoding="utf-8")
        (args.out_dir / f"{name}.txt").write_text(evaluation.render_table(table), encoding="utf-8")

    summary = evaluation.overall_summary(tables)
    (args.out_dir / "summary.csv").write_text(evaluation.summary_csv(summary, names), encoding="utf-8")
    (args.out_dir / "summary.txt").write_text(evaluation.render_summary(summary, names), encoding="utf-8")
    write_records(records, args.out_dir / "records.jsonl")
    sys.stdout.write(evaluation.render_summary(summary, names))
    return 0


def cmd_plot_data(args) -> int:
    records = read_records(args.source)
    if not 0 <= args.record < len(records):
        raise UsageError(f"--record {args.record} out of range (file has {len(records)})")
    rec = records[args.record]
    try:
        rows = zip(rec["positions_um"], rec["focus_levels"])
        lines = ["step,position_um,focus_level"]
        lines += [f"{k},{pos!r},{level!r}" for k, (pos, level) in enumerate(rows, 1)]
    except KeyError as exc:
        raise DataError(f"{args.source}: record lacks {exc.args[0]}") from None
    args.out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


CELL_TOLERANCE = 1e-3
OVERALL_TOLERANCE = 5e-4


def cmd_verify_paper(args) -> int:
    tables, summary, cell_dev, overall_dev = published.recompute()
    args.out.mkdir(parents=True, exist_ok=True)
    report = []
    for table in tables:
        (args.out / f"{table.sequence_name}.csv").write_text(evaluation.table_csv(table), encoding="utf-8")
        report.append(evaluation.render_table(table))
    names = list(published.SEQUENCES)
    (args.out / "summary.csv").write_text(evaluation.summary_csv(summary, names), encoding="utf-8")
    report.append("Overall\n" + evaluation.render_summary(summary, names))
    ok = cell_dev <= CELL_TOLERANCE and overall_dev <= OVERALL_TOLERANCE
    verdict = (
        f"max score deviation {cell_dev:.2e} (tolerance {CELL_TOLERANCE:g}); "
        f"max overall deviation {overall_dev:.2e} (tolerance {OVERALL_TOLERANCE:g}): {'PASS' if ok else 'FAIL'}\n"
    )
    report.append(verdict)
    (args.out / "report.txt").write_text("\n".join(report), encoding="utf-8")
    sys.stdout.write(verdict)
    return 0 if ok else EXIT_DATA


COMMANDS = {
    "generate": cmd_generate,
    "measure": cmd_measure,
    "search": cmd_search,
    "bench": cmd_bench,
    "plot-data": cmd_plot_data,
    "verify-paper": cmd_verify_paper,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"focussearch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"focussearch: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # bad option values rejected by the library
        print(f"focussearch: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
