"""Scoring searches by cost (steps) and accuracy.

For ``n`` algorithms run on one sequence with steps ``s_i`` and errors
``a_i`` the score is ``max(s) * min(a) / (s_i * a_i)``; higher is better.
Per-sequence tables are averaged per algorithm into an overall ranking.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from statistics import fmean
from typing import Iterable, Sequence

from .errors import DataError, EmptyInput, MissingAlgorithm


@dataclass(frozen=True)
class RunRecord:
    algorithm_name: str
    sequence_name: str
    steps: int
    accuracy_error_um: float
    score: float
    scored_error_um: float
    clamped: bool = False


@dataclass(frozen=True)
class ScoreTable:
    sequence_name: str
    rows: tuple[RunRecord, ...]

    def by_algorithm(self) -> dict[str, RunRecord]:
        return {r.algorithm_name: r for r in self.rows}


@dataclass(frozen=True)
class SummaryRow:
    algorithm_name: str
    overall_score: float
    per_sequence: tuple[float, ...]


def accuracy_error(outcome, truth_um: float) -> float:
    position = getattr(outcome, "best_position_um", outcome)
    return abs(float(position) - float(truth_um))


def score_table(
    records: Iterable[Sequence],
    sequence_name: str = "",
    error_floor_um: float | None = None,
) -> ScoreTable:
    """Score ``(algorithm, steps, error_um)`` triples against each other.

    Errors below ``error_floor_um`` (normally half the grid step) are raised
    to it before scoring so that an exact hit gives a finite score; the
    affected rows are flagged ``clamped``.
    """
    records = [(str(a), int(s), float(e)) for a, s, e in records]
    if not records:
        raise EmptyInput("score_table needs at least one record")
    for name, steps, err in records:
        if steps < 1:
            raise DataError(f"{name}: steps must be >= 1, got {steps}")
        if err < 0:
            raise DataError(f"{name}: accuracy error must be >= 0, got {err}")
    floor = 0.0 if error_floor_um is None else float(error_floor_um)
    scored = [max(err, floor) for _, _, err in records]
    if min(scored) <= 0:
        raise DataError("zero accuracy error needs a positive error floor")
    max_s = max(s for _, s, _ in records)
    min_a = min(scored)
    rows = [
        RunRecord(
            algorithm_name=name,
            sequence_name=sequence_name,
            steps=steps,
            accuracy_error_um=err,
            score=(max_s * min_a) / (steps * a),
            scored_error_um=a,
            clamped=a != err,
        )
        for (name, steps, err), a in zip(records, scored)
    ]
    rows.sort(key=lambda r: (-r.score, r.steps, r.algorithm_name))
    return ScoreTable(sequence_name, tuple(rows))


def overall_summary(tables: Sequence[ScoreTable]) -> list[SummaryRow]:
    """Mean score per algorithm over all tables, best first."""
    if not tables:
        raise EmptyInput("overall_summary needs at least one table")
    algorithms: list[str] = []
    for t in tables:
        for r in t.rows:
            if r.algorithm_name not in algorithms:
                algorithms.append(r.algorithm_name)
    summary = []
    for name in algorithms:
        scores = []
        for t in tables:
            row = t.by_algorithm().get(name)
            if row is None:
                raise MissingAlgorithm(f"{name} missing from table {t.sequence_name!r}")
            scores.append(row.score)
        summary.append(SummaryRow(name, fmean(scores), tuple(scores)))
    summary.sort(key=lambda r: (-r.overall_score, r.algorithm_name))
    return summary


def table_csv(table: ScoreTable) -> str:
    buf = io.StringIO()
    buf.write("algorithm,steps,error_um,score\n")
    for r in table.rows:
        buf.write(f"{r.algorithm_name},{r.steps},{r.accuracy_error_um:.3f},{r.score:.4f}\n")
    return buf.getvalue()


def summary_csv(summary: Sequence[SummaryRow], sequence_names: Sequence[str]) -> str:
    buf = io.StringIO()
    buf.write(",".join(["algorithm", *sequence_names, "overall"]) + "\n")
    for row in summary:
        cells = [f"{s:.4f}" for s in row.per_sequence]
        buf.write(",".join([row.algorithm_name, *cells, f"{row.overall_score:.4f}"]) + "\n")
    return buf.getvalue()


def render_table(table: ScoreTable) -> str:
    """Aligned plain-text table; ``*`` marks errors raised to the floor."""
    header = ("Search Name", "Number of steps", "Accuracy Error (um)", "Score")
    body = [
        (r.algorithm_name, str(r.steps), f"{r.accuracy_error_um:.1f}" + ("*" if r.clamped else ""), f"{r.score:.4f}")
        for r in table.rows
    ]
    text = _align(header, body)
    title = f"Results for {table.sequence_name}\n" if table.sequence_name else ""
    note = ""
    if any(r.clamped for r in table.rows):
        floor = next(r.scored_error_um for r in table.rows if r.clamped)
        note = f"* error raised to the {floor:g} um floor before scoring\n"
    return title + text + note


def render_summary(summary: Sequence[SummaryRow], sequence_names: Sequence[str]) -> str:
    header = ("Search Name", *sequence_names, "Overall Score")
    body = [
        (r.algorithm_name, *(f"{s:.4f}" for s in r.per_sequence), f"{r.overall_score:.4f}") for r in summary
    ]
    return _align(header, body)


def _align(header, body) -> str:
    widths = [max(len(row[c]) for row in [header, *body]) for c in range(len(header))]
    lines = []
    for k, row in enumerate([header, *body]):
        cells = [row[0].ljust(widths[0])] + [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
