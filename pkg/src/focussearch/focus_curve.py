"""The search domain: a uniform focuser grid and a memoizing acquisition oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DataError, IndexOutOfRange, NonFiniteValue
from .image_model import Image, measure_star_fwhm, normalized_variance


@dataclass(frozen=True)
class FocusCurve:
    """Focus levels sampled at ``start_um + i * step_um``.

    ``fwhm_px`` optionally carries a per-position star FWHM used as ground
    truth when no image frames are available.
    """

    start_um: float
    step_um: float
    values: tuple[float, ...]
    name: str = "curve"
    fwhm_px: tuple[float, ...] | None = None

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if len(values) < 3:
            raise DataError(f"a focus curve needs at least 3 samples, got {len(values)}")
        if not self.step_um > 0:
            raise DataError(f"step_um must be positive, got {self.step_um}")
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteValue("focus curve contains non-finite values")
        if self.fwhm_px is not None:
            fwhm = tuple(float(v) for v in self.fwhm_px)
            if len(fwhm) != len(values):
                raise DataError("fwhm_px length differs from values length")
            if not all(math.isfinite(v) for v in fwhm):
                raise NonFiniteValue("fwhm column contains non-finite values")
            object.__setattr__(self, "fwhm_px", fwhm)

    @property
    def count(self) -> int:
        return len(self.values)

    def position(self, index: int) -> float:
        return self.start_um + index * self.step_um

    def positions(self) -> np.ndarray:
        return self.start_um + np.arange(self.count) * self.step_um

    def nearest_index(self, position_um: float) -> int:
        i = int(math.floor((position_um - self.start_um) / self.step_um + 0.5))
        return min(max(i, 0), self.count - 1)


class AcquisitionEvaluator:
    """Maps grid index to focus level, charging one step per new acquisition.

    Repeated queries are served from the cache. With ``count_revisits`` every
    query is charged, which models a focuser that re-exposes on every visit.
    """

    def __init__(
        self,
        count: int,
        start_um: float,
        step_um: float,
        acquire: Callable[[int], float],
        name: str = "sequence",
        count_revisits: bool = False,
    ):
        if count < 3:
            raise DataError(f"need at least 3 grid positions, got {count}")
        self.count = count
        self.start_um = float(start_um)
        self.step_um = float(step_um)
        self.name = name
        self.count_revisits = count_revisits
        self._acquire = acquire
        self._cache: dict[int, float] = {}
        self.acquisitions: list[int] = []

    @classmethod
    def from_curve(cls, curve: FocusCurve, count_revisits: bool = False) -> "AcquisitionEvaluator":
        values = curve.values
        return cls(curve.count, curve.start_um, curve.step_um, values.__getitem__, curve.name, count_revisits)

    @classmethod
    def from_frames(
        cls,
        frames,
        measure: Callable[[Image], float] = normalized_variance,
        count_revisits: bool = False,
    ) -> "AcquisitionEvaluator":
        """Evaluate by loading frame ``i`` from ``frames`` and applying ``measure``.

        ``frames`` needs ``frame_count``, ``start_um``, ``step_um``, ``name``
        and ``load_frame(i)``; a :class:`~focussearch.sequence_io.SequenceManifest`
        qualifies.
        """
        return cls(
            frames.frame_count,
            frames.start_um,
            frames.step_um,
            lambda i: float(measure(frames.load_frame(i))),
            frames.name,
            count_revisits,
        )

    def position(self, index: int) -> float:
        return self.start_um + index * self.step_um

    def snap(self, position_um: float) -> int:
        """Nearest grid index to a continuous position, clamped to the grid."""
        i = int(math.floor((position_um - self.start_um) / self.step_um + 0.5))
        return min(max(i, 0), self.count - 1)

    def evaluate(self, index: int) -> float:
        index = int(index)
        if not 0 <= index < self.count:
            raise IndexOutOfRange(f"index {index} outside 0..{self.count - 1}")
        if index in self._cache:
            if self.count_revisits:
                self.acquisitions.append(index)
            return self._cache[index]
        value = float(self._acquire(index))
        self._cache[index] = value
        self.acquisitions.append(index)
        return value

    __call__ = evaluate

    def reacquire(self, index: int) -> float:
        """Take a fresh exposure at ``index``, charged even if already cached."""
        if index not in self._cache:
            return self.evaluate(index)
        value = float(self._acquire(int(index)))
        self._cache[index] = value
        self.acquisitions.append(index)
        return value

    def is_acquired(self, index: int) -> bool:
        return index in self._cache

    def cached(self, index: int) -> float:
        return self._cache[index]

    def steps(self) -> int:
        return len(self.acquisitions)


def brute_force_argmax(curve: FocusCurve | Sequence[float]) -> int:
    """Index of the maximum value; the lowest index wins ties."""
    values = curve.values if isinstance(curve, FocusCurve) else tuple(curve)
    best = 0
    for i, v in enumerate(values):
        if v > values[best]:
            best = i
    return best


def _argmin(values: Sequence[float]) -> int:
    best = 0
    for i, v in enumerate(values):
        if v < values[best]:
            best = i
    return best


TRUTH_MODES = ("declared", "fwhm", "measure")


def ground_truth_position(seq, truth: str | None = None) -> float:
    """Best-focus position of a sequence or curve in µm.

    ``truth`` selects the source: ``declared`` uses the generator's
    ``z_best_um``, ``fwhm`` the frame with the smallest star FWHM and
    ``measure`` the frame with the largest focus level. The default is
    ``declared`` when the sequence carries a declared focus, else ``fwhm``.
    """
    declared = getattr(seq, "z_best_um", None)
    if truth is None:
        truth = "declared" if declared is not None else "fwhm"
    if truth not in TRUTH_MODES:
        raise ValueError(f"unknown truth mode {truth!r}")

    if truth == "declared":
        if declared is None:
            raise DataError(f"{getattr(seq, 'name', 'input')} has no declared best focus")
        return float(declared)

    if isinstance(seq, FocusCurve):
        if truth == "measure":
            return seq.position(brute_force_argmax(seq))
        if seq.fwhm_px is None:
            raise DataError(f"curve {seq.name} has no fwhm_px column")
        return seq.position(_argmin(seq.fwhm_px))

    frames = [seq.load_frame(i) for i in range(seq.frame_count)]
    if truth == "measure":
        best = brute_force_argmax([normalized_variance(f) for f in frames])
    else:
        best = _argmin([measure_star_fwhm(f).fwhm_px for f in frames])
    return seq.start_um + best * seq.step_um
