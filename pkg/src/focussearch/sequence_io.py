"""On-disk formats: binary PGM frames, sequence manifests, curve CSVs and search records."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DuplicateIndex,
    MalformedHeader,
    MissingFrame,
    NonFiniteValue,
    NonUniformStep,
    TruncatedData,
    UnsupportedMaxval,
)
from .focus_curve import FocusCurve
from .image_model import DEFAULT_SATURATION, Image

# ---------------------------------------------------------------------------
# PGM
# ---------------------------------------------------------------------------

_WHITESPACE = b" \t\n\r\v\f"


def _pgm_header(data: bytes) -> tuple[int, int, int, int]:
    """Parse ``P5 width height maxval``; return the fields and the data offset."""
    if data[:2] != b"P5":
        raise MalformedHeader(f"expected binary PGM magic 'P5', got {data[:2]!r}")
    if len(data) < 3 or (data[2:3] not in _WHITESPACE and data[2:3] != b"#"):
        raise MalformedHeader("missing whitespace after magic")
    pos = 2
    tokens = []
    while len(tokens) < 3:
        if pos >= len(data):
            raise MalformedHeader("header ended early")
        c = data[pos : pos + 1]
        if c == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
            continue
        if c in _WHITESPACE:
            pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos : pos + 1] not in _WHITESPACE and data[pos : pos + 1] != b"#":
            pos += 1
        token = data[start:pos]
        if not token.isdigit():
            raise MalformedHeader(f"non-numeric header field {token!r}")
        tokens.append(int(token))
    if pos >= len(data) or data[pos : pos + 1] not in _WHITESPACE:
        raise MalformedHeader("header must end with a single whitespace byte")
    width, height, maxval = tokens
    if width < 1 or height < 1:
        raise MalformedHeader(f"bad dimensions {width}x{height}")
    return width, height, maxval, pos + 1


def read_pgm(path, saturation_level: float | None = None) -> Image:
    """Read a binary (P5) PGM file.

    Samples wider than one byte are big-endian. The image's saturation level
    defaults to the file's maxval.
    """
    data = Path(path).read_bytes()
    width, height, maxval, offset = _pgm_header(data)
    if not 1 <= maxval <= 65535:
        raise UnsupportedMaxval(f"maxval {maxval} outside 1..65535")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    needed = width * height * dtype.itemsize
    if len(data) - offset < needed:
        raise TruncatedData(f"{path}: expected {needed} data bytes, found {len(data) - offset}")
    pixels = np.frombuffer(data, dtype=dtype, count=width * height, offset=offset).reshape(height, width)
    sat = float(maxval) if saturation_level is None else float(saturation_level)
    return Image(pixels.astype(np.float64), sat)


def write_pgm(img: Image, path, maxval: int | None = None) -> None:
    """Write ``img`` as binary PGM; pixels must already be whole numbers."""
    p = img.pixels
    if maxval is None:
        sat = img.saturation_level
        maxval = int(sat) if float(sat).is_integer() and 1 <= sat <= 65535 else 65535
        if p.max() > maxval:
            maxval = 65535
    if not 1 <= maxval <= 65535:
        raise UnsupportedMaxval(f"maxval {maxval} outside 1..65535")
    if np.any(p != np.floor(p)):
        raise DataError("PGM stores integers; round the image first")
    if p.max() > maxval:
        raise DataError(f"pixel value {p.max()} exceeds maxval {maxval}")
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + p.astype(dtype).tobytes())


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

_GENERATOR_PREFIXES = ("generator.", "model.", "field.")


def _fmt_num(x: float) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


@dataclass(frozen=True)
class SequenceManifest:
    """A focus sequence on disk: one frame file per grid position."""

    name: str
    start_um: float
    step_um: float
    frames: tuple[str, ...]
    z_best_um: float | None = None
    saturation_level: float = DEFAULT_SATURATION
    generator: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    directory: Path = field(default=Path("."), compare=False)

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    def position(self, index: int) -> float:
        return self.start_um + index * self.step_um

    def frame_path(self, index: int) -> Path:
        return Path(self.directory) / self.frames[index]

    def load_frame(self, index: int) -> Image:
        return read_pgm(self.frame_path(index), self.saturation_level)


def write_manifest(m: SequenceManifest, path) -> None:
    lines = [
        "# focus sequence manifest",
        f"name = {m.name}",
        f"start_um = {_fmt_num(m.start_um)}",
        f"step_um = {_fmt_num(m.step_um)}",
        f"saturation_level = {_fmt_num(m.saturation_level)}",
    ]
    if m.z_best_um is not None:
        lines.append(f"z_best_um = {_fmt_num(m.z_best_um)}")
    lines += [f"{k} = {v}" for k, v in m.generator.items()]
    lines += [f"{k} = {v}" for k, v in m.extra.items()]
    lines.append("")
    lines.append("[frames]")
    lines += [f"{i}, {_fmt_num(m.position(i))}, {rel}" for i, rel in enumerate(m.frames)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> SequenceManifest:
    """Parse a manifest; frame paths resolve relative to its directory."""
    path = Path(path)
    header: dict[str, str] = {}
    entries: dict[int, tuple[float, str]] = {}
    in_frames = False
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.lower() == "[frames]":
            in_frames = True
            continue
        if not in_frames:
            key, sep, value = line.partition("=")
            if not sep:
                raise DataError(f"{path}:{lineno}: expected 'key = value'")
            header[key.strip()] = value.strip()
            continue
        parts = [s.strip() for s in line.split(",", 2)]
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected 'index, position_um, path'")
        try:
            index, pos = int(parts[0]), float(parts[1])
        except ValueError:
            raise DataError(f"{path}:{lineno}: bad frame entry {line!r}") from None
        if index in entries:
            raise DuplicateIndex(f"{path}:{lineno}: frame index {index} repeated")
        entries[index] = (pos, parts[2])

    try:
        name = header.pop("name")
        start = float(header.pop("start_um"))
        step = float(header.pop("step_um"))
    except KeyError as exc:
        raise DataError(f"{path}: missing required key {exc.args[0]}") from None
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    saturation = float(header.pop("saturation_level", DEFAULT_SATURATION))
    z_best = header.pop("z_best_um", None)
    generator = {k: v for k, v in header.items() if k.startswith(_GENERATOR_PREFIXES)}
    extra = {k: v for k, v in header.items() if k not in generator}

    if not step > 0:
        raise NonUniformStep(f"{path}: step_um must be positive")
    for i in range(len(entries)):
        if i not in entries:
            raise MissingFrame(f"{path}: frame {i} missing (have {len(entries)} entries)")
    frames = []
    for i in range(len(entries)):
        pos, rel = entries[i]
        if not _close(pos, start + i * step):
            raise NonUniformStep(f"{path}: frame {i} at {pos}, expected {start + i * step}")
        frames.append(rel)
    return SequenceManifest(
        name=name,
        start_um=start,
        step_um=step,
        frames=tuple(frames),
        z_best_um=None if z_best is None else float(z_best),
        saturation_level=saturation,
        generator=generator,
        extra=extra,
        directory=path.parent,
    )


# ---------------------------------------------------------------------------
# Curve CSV
# ---------------------------------------------------------------------------


def write_curve_csv(curve: FocusCurve, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    has_fwhm = curve.fwhm_px is not None
    w.writerow(["position_um", "focus_level"] + (["fwhm_px"] if has_fwhm else []))
    for i, v in enumerate(curve.values):
        row = [_fmt_num(curve.position(i)), repr(v)]
        if has_fwhm:
            row.append(repr(curve.fwhm_px[i]))
        w.writerow(row)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_curve_csv(path, name: str | None = None) -> FocusCurve:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if header not in (["position_um", "focus_level"], ["position_um", "focus_level", "fwhm_px"]):
        raise DataError(f"{path}: header must be position_um,focus_level[,fwhm_px], got {','.join(header)}")
    width = len(header)
    cols: list[list[float]] = [[] for _ in range(width)]
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != width:
            raise DataError(f"{path}:{lineno}: expected {width} columns")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}:{lineno}: not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise NonFiniteValue(f"{path}:{lineno}: non-finite value {cell!r}")
            cols[c].append(v)
    positions = cols[0]
    if len(positions) < 3:
        raise DataError(f"{path}: need at least 3 rows, got {len(positions)}")
    start, step = positions[0], positions[1] - positions[0]
    if not step > 0:
        raise NonUniformStep(f"{path}: positions must be strictly ascending")
    for i, p in enumerate(positions):
        if not _close(p, start + i * step):
            raise NonUniformStep(f"{path}: row {i + 2} position {p} breaks the uniform step {step}")
    return FocusCurve(
        start_um=start,
        step_um=step,
        values=tuple(cols[1]),
        name=name or path.stem,
        fwhm_px=tuple(cols[2]) if width == 3 else None,
    )


# ---------------------------------------------------------------------------
# Search records (one JSON object per line)
# ---------------------------------------------------------------------------


def outcome_record(outcome, sequence_name: str, start_um: float, step_um: float) -> dict:
    from .search_algorithms import DISPLAY_NAMES

    return {
        "sequence": sequence_name,
        "algorithm": outcome.algorithm,
        "display_name": DISPLAY_NAMES.get(outcome.algorithm, outcome.algorithm),
        "start_um": start_um,
        "step_um": step_um,
        "best_position_um": outcome.best_position_um,
        "best_index": outcome.best_index,
        "steps": outcome.steps,
        "final_interval": list(outcome.final_interval),
        "trajectory": list(outcome.trajectory),
        "positions_um": [start_um + i * step_um for i in outcome.trajectory],
        "focus_levels": list(outcome.trajectory_levels),
        "params": outcome.params,
    }


def write_records(records: list[dict], path) -> None:
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    Path(path).write_text(text, encoding="utf-8")


def read_records(path) -> list[dict]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    if not out:
        raise DataError(f"{path}: no search records")
    return out
