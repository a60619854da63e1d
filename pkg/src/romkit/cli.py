"""Operator-facing command line: offline analysis, cohort batches,
reliability reports, and the live session server.

Exit codes: 0 success, 1 fatal input/config error, 2 partial batch
failure. Angle-series and regression data can be dumped as CSV for
external plotting.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import io as rio
from .config import Config, apply_engine_overrides, data_dir, load_config
from .engine import Evaluation, evaluate_movement
from .errors import RomKitError
from .landmarks import registry_lookup
from .stats import (
    RegressionResult,
    movement_labels,
    pick_predictor_rater,
    pivot_inter_rater,
    pivot_test_retest,
    raters,
    regress,
    reliability_report,
)


def _add_engine_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--visibility-threshold", type=float, default=None,
                        help="minimum landmark visibility (default 0.5)")
    parser.add_argument("--min-valid-frames", type=int, default=None,
                        help="minimum surviving frames (default 10)")
    parser.add_argument("--period", default=None,
                        help="decomposition period in samples, or 'auto'")
    parser.add_argument("--anomaly-sd", type=float, default=None,
                        help="residual SD multiple marking anomalies (default 3)")
    parser.add_argument("--near-tie", type=float, default=None,
                        help="near-tie fraction for the review flag (default 0.05)")
    parser.add_argument("--baseline-window", type=int, default=None,
                        help="frames averaged into the reference vector (default 1)")


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--data-dir", default=None,
                        help="data directory (or ROMKIT_DATA_DIR)")


def _build_config(args) -> Config:
    config = load_config(args.config)
    period = getattr(args, "period", None)
    if period is not None and period != "auto":
        period = int(period)
    return apply_engine_overrides(
        config,
        visibility_threshold=getattr(args, "visibility_threshold", None),
        min_valid_frames=getattr(args, "min_valid_frames", None),
        decomposition_period=period,
        anomaly_sd=getattr(args, "anomaly_sd", None),
        near_tie_fraction=getattr(args, "near_tie", None),
        baseline_window=getattr(args, "baseline_window", None),
    )


def _evaluate_file(path: Path, config: Config, *, movement=None, side=None,
                   phase=None, subject=None, repetition=None,
                   marker_map=None, rate=None) -> tuple[Evaluation, dict]:
    mocap_kwargs = {}
    if path.suffix.lower() == ".csv":
        mocap_kwargs = {
            "marker_name_map": marker_map,
            "movement": movement or "",
            "subject": subject or "",
            "repetition": repetition or 1,
            "side": side,
            "phase": phase,
        }
        if rate:
            mocap_kwargs["nominal_rate"] = rate
    recording = rio.read_recording(path, **mocap_kwargs)
    movement = movement or recording.movement
    side = side if side is not None else recording.side
    phase = phase if phase is not None else recording.phase
    subject = subject or recording.subject
    repetition = repetition or recording.repetition
    if not movement:
        raise RomKitError(
            f"{path}: no movement named in the file header; pass --movement")
    definition = registry_lookup(movement, side, config.registry_overrides)
    recording = replace(recording, movement=movement, side=side, phase=phase,
                        subject=subject or "", repetition=int(repetition or 1))
    evaluation = evaluate_movement(recording, definition, config.engine)
    context = {
        "subject": subject,
        "movement": movement,
        "side": side,
        "phase": phase,
        "repetition": int(repetition),
        "source": recording.source,
    }
    return evaluation, context


def _write_series_csv(evaluation: Evaluation, path: Path) -> None:
    decomp = evaluation.decomposition
    anomaly_set = set(evaluation.anomaly_indices)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "alpha_deg", "trend", "seasonal", "residual",
                         "is_anomaly"])
        for i in range(len(evaluation.series)):
            def cell(arr):
                if arr is None or math.isnan(arr[i]):
                    return ""
                return repr(float(arr[i]))
            writer.writerow([
                repr(float(evaluation.series.t[i])),
                repr(float(evaluation.series.alpha_deg[i])),
                cell(decomp.trend if decomp else None),
                cell(decomp.seasonal if decomp else None),
                cell(decomp.residual if decomp else None),
                int(i in anomaly_set),
            ])


def cmd_analyze(args) -> int:
    config = _build_config(args)
    marker_map = None
    if args.marker_map:
        marker_map = json.loads(Path(args.marker_map).read_text())
    evaluation, ctx = _evaluate_file(
        Path(args.recording), config,
        movement=args.movement, side=args.side, phase=args.phase,
        subject=args.subject, repetition=args.repetition,
        marker_map=marker_map, rate=args.rate,
    )
    result = evaluation.result
    rater = args.rater or ctx["source"]
    record = rio.result_record(
        subject=ctx["subject"], movement=ctx["movement"], side=ctx["side"],
        phase=ctx["phase"], rater=rater, repetition=ctx["repetition"],
        rom_deg=result.rom_deg, peak_t=result.peak_t,
        needs_review=result.needs_review, anomaly_count=len(result.anomalies),
        config_fingerprint=config.engine.fingerprint(),
    )
    if not args.dry_run:
        results_file = (Path(args.results_file) if args.results_file
                        else data_dir(args.data_dir) / "results.jsonl")
        rio.write_result(record, results_file)
    if args.json:
        payload = dict(record)
        payload["candidate_peaks"] = [list(p) for p in result.candidate_peaks]
        payload["dropped_low_visibility"] = evaluation.visibility.dropped_count
        payload["frames_used"] = len(evaluation.series)
        payload["messages"] = list(evaluation.messages)
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"ROM: {result.rom_deg:.2f}°")
        print(f"peak at t={result.peak_t:.3f} s")
        print(f"anomalies removed: {len(result.anomalies)}")
        print(f"needs review: {'yes' if result.needs_review else 'no'}")
        for msg in evaluation.messages:
            print(f"note: {msg}")
    if args.series_csv:
        _write_series_csv(evaluation, Path(args.series_csv))
    return 0


def cmd_batch(args) -> int:
    config = _build_config(args)
    entries = rio.read_manifest(Path(args.manifest))
    out = (Path(args.out) if args.out
           else data_dir(args.data_dir) / "results.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    failures = 0
    with open(out, "w", encoding="utf-8"):
        pass  # batch output is a fresh file; reruns are byte-identical
    for entry in entries:
        label = (f"{entry.subject} {entry.movement!r} {entry.rater} "
                 f"rep{entry.repetition}")
        try:
            if entry.rom_deg is not None:
                record = rio.result_record(
                    subject=entry.subject, movement=entry.movement,
                    side=entry.side, phase=entry.phase, rater=entry.rater,
                    repetition=entry.repetition, rom_deg=entry.rom_deg,
                    peak_t=None, needs_review=False, anomaly_count=0,
                    config_fingerprint=config.engine.fingerprint(),
                )
            else:
                evaluation, ctx = _evaluate_file(
                    entry.path, config, movement=entry.movement,
                    side=entry.side, phase=entry.phase, subject=entry.subject,
                    repetition=entry.repetition,
                )
                result = evaluation.result
                record = rio.result_record(
                    subject=entry.subject, movement=entry.movement,
                    side=entry.side, phase=entry.phase, rater=entry.rater,
                    repetition=entry.repetition, rom_deg=result.rom_deg,
                    peak_t=result.peak_t, needs_review=result.needs_review,
                    anomaly_count=len(result.anomalies),
                    config_fingerprint=config.engine.fingerprint(),
                )
            rio.write_result(record, out)
            print(f"ok   {label} rom={record['rom_deg']:.2f}")
        except (RomKitError, OSError) as exc:
            failures += 1
            print(f"FAIL {label}: {exc}")
    done = len(entries) - failures
    print(f"{done}/{len(entries)} entries analyzed -> {out}")
    return 2 if failures else 0


def _format_icc(report) -> str:
    r = report.icc
    return f"{r.icc:.2f} ({r.ci_low:.2f}, {r.ci_high:.2f})"


def _report_rows_test_retest(records, form):
    rows = []
    for label in movement_labels(records):
        in_movement = [r for r in records
                       if (r["movement"] if not r.get("phase")
                           else f"{r['movement']} ({r['phase']})") == label]
        for rater in raters(in_movement):
            table = pivot_test_retest(records, label, rater)
            rows.append((label, rater, reliability_report(table, form)))
    return rows


def _report_rows_inter_rater(records, form, layout, predictor):
    rows = []
    for label in movement_labels(records):
        table = pivot_inter_rater(records, label, layout)
        report = reliability_report(table, form)
        rater_list = list(table.col_labels)
        pred = pick_predictor_rater(rater_list, predictor)
        pred_idx = rater_list.index(pred)
        regressions = {}
        for j, rater in enumerate(rater_list):
            if j == pred_idx:
                continue
            regressions[rater] = regress(table.values[:, pred_idx].tolist(),
                                         table.values[:, j].tolist())
        rows.append((label, report, pred, regressions, table))
    return rows


def _render_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [line(headers), line(["-" * w for w in widths])]
    out.extend(line(r) for r in rows)
    return "\n".join(out)


def cmd_reliability(args) -> int:
    config = _build_config(args)
    path = Path(args.input)
    if path.suffix.lower() == ".csv":
        records = rio.read_measurements_csv(path)
    else:
        records = rio.read_results(path)
    records = [r for r in records if r.get("rom_deg") is not None]
    if not records:
        raise RomKitError(f"{path}: no measurements found")
    form = args.form
    if args.analysis == "test-retest":
        form = form or config.stats.test_retest_form
        rows = _report_rows_test_retest(records, form)
        if args.json:
            payload = {
                "analysis": "test-retest", "form": form,
                "movements": {
                    f"{label}::{rater}": {
                        "icc": rep.icc.icc, "ci_low": rep.icc.ci_low,
                        "ci_high": rep.icc.ci_high, "band": rep.icc.band,
                        "sem_deg": rep.sem_deg, "mdc_deg": rep.mdc_deg,
                        "total_variance": rep.total_variance,
                    } for label, rater, rep in rows
                },
            }
            print(json.dumps(payload, sort_keys=True))
        else:
            print(f"Test-retest (intra-rater) reliability — ICC form: {form}")
            table_rows = [
                [label, rater, _format_icc(rep), f"{rep.sem_deg:.2f}",
                 f"{rep.mdc_deg:.2f}", rep.icc.band]
                for label, rater, rep in rows
            ]
            print(_render_table(
                ["Movement", "Rater", "ICC (95% CI)", "SE_M (°)", "MDC (°)",
                 "Band"], table_rows))
        return 0

    form = form or config.stats.inter_rater_form
    layout = args.layout or config.stats.inter_rater_layout
    rows = _report_rows_inter_rater(records, form, layout, args.predictor)
    if args.pairs_csv:
        with open(args.pairs_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["movement", "row", "predictor_rater",
                             "predictor_rom_deg", "rater", "rom_deg"])
            for label, _rep, pred, regs, table in rows:
                pred_idx = list(table.col_labels).index(pred)
                for j, rater in enumerate(table.col_labels):
                    if j == pred_idx:
                        continue
                    for i, row_label in enumerate(table.row_labels):
                        writer.writerow([
                            label, row_label, pred,
                            repr(float(table.values[i, pred_idx])),
                            rater, repr(float(table.values[i, j])),
                        ])
    if args.json:
        payload = {"analysis": "inter-rater", "form": form, "layout": layout,
                   "movements": {}}
        for label, rep, pred, regs, _table in rows:
            payload["movements"][label] = {
                "icc": rep.icc.icc, "ci_low": rep.icc.ci_low,
                "ci_high": rep.icc.ci_high, "band": rep.icc.band,
                "sem_deg": rep.sem_deg, "mdc_deg": rep.mdc_deg,
                "total_variance": rep.total_variance,
                "predictor": pred,
                "regressions": {
                    rater: {"slope": reg.slope, "intercept": reg.intercept,
                            "r_squared": reg.r_squared, "n": reg.n}
                    for rater, reg in regs.items()
                },
            }
        print(json.dumps(payload, sort_keys=True))
    else:
        print(f"Inter-rater reliability — ICC form: {form}, layout: {layout}")
        table_rows = []
        for label, rep, pred, regs, _table in rows:
            reg: RegressionResult | None = next(iter(regs.values()), None)
            table_rows.append([
                label, _format_icc(rep), f"{rep.sem_deg:.2f}",
                f"{rep.mdc_deg:.2f}", rep.icc.band,
                f"{reg.slope:.2f}" if reg else "",
                f"{reg.intercept:.2f}" if reg else "",
                f"{reg.r_squared:.2f}" if reg else "",
            ])
        print(_render_table(
            ["Movement", "ICC (95% CI)", "SE_M (°)", "MDC (°)", "Band",
             "Slope", "Intercept", "r²"], table_rows))
    return 0


def cmd_serve(args) -> int:
    import uvicorn
    from .service import create_app
    config = _build_config(args)
    host, _, port = args.bind.rpartition(":")
    host = host or "127.0.0.1"
    app = create_app(data_dir(args.data_dir), config.engine,
                     config.registry_overrides)
    server = uvicorn.Server(uvicorn.Config(app, host=host, port=int(port),
                                           log_level="warning"))
    try:
        server.run()  # returns after SIGINT/SIGTERM graceful shutdown
    except (OSError, SystemExit) as exc:
        print(f"error: cannot serve on {args.bind}: {exc}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="romkit",
        description="Joint range-of-motion evaluation and reliability statistics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="evaluate one recording file")
    p.add_argument("recording", help="landmark JSONL or mocap CSV file")
    p.add_argument("--movement", default=None)
    p.add_argument("--side", choices=["left", "right"], default=None)
    p.add_argument("--phase", default=None)
    p.add_argument("--subject", default=None)
    p.add_argument("--repetition", type=int, default=None)
    p.add_argument("--rater", default=None,
                   help="rater label in the results store (default: source)")
    p.add_argument("--marker-map", default=None,
                   help="JSON file mapping mocap CSV marker names to ids")
    p.add_argument("--rate", type=float, default=None,
                   help="nominal rate for mocap frame-index files")
    p.add_argument("--json", action="store_true")
    p.add_argument("--dry-run", action="store_true",
                   help="do not append to the results store")
    p.add_argument("--results-file", default=None)
    p.add_argument("--series-csv", default=None,
                   help="dump the angle series + decomposition as CSV")
    _add_engine_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("batch", help="run every manifest entry")
    p.add_argument("manifest", help="cohort manifest CSV")
    p.add_argument("--out", default=None, help="results file to (over)write")
    _add_engine_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("reliability", help="cohort reliability report")
    p.add_argument("input", help="results JSONL or long-format measurements CSV")
    p.add_argument("--analysis", choices=["test-retest", "inter-rater"],
                   required=True)
    p.add_argument("--form", choices=["consistency-single",
                                      "consistency-average",
                                      "agreement-single",
                                      "agreement-average"], default=None)
    p.add_argument("--layout", choices=["pooled", "averaged"], default=None,
                   help="inter-rater row layout (default from config)")
    p.add_argument("--predictor", default=None,
                   help="rater used as the regression predictor")
    p.add_argument("--pairs-csv", default=None,
                   help="dump predictor/response ROM pairs as CSV")
    p.add_argument("--json", action="store_true")
    _add_common_flags(p)
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("serve", help="run the live session service")
    p.add_argument("--bind", default="127.0.0.1:8000")
    _add_engine_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RomKitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
