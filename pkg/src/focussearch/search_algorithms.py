"""Autofocus search procedures over an :class:`AcquisitionEvaluator`.

Every procedure maximises the focus level on the evaluator's integer grid
and reports a :class:`SearchOutcome`. Cost is whatever the evaluator charges,
normally one step per distinct frame acquired.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DegenerateGeometry, IntervalTooSmall, NonPositiveFocusLevel
from .focus_curve import AcquisitionEvaluator

INT64_MAX = 2**63 - 1

ALGORITHMS = ("binary", "mfcs", "fibonacci", "subbarao-binary", "subbarao-fibonacci", "global")

DISPLAY_NAMES = {
    "global": "Global",
    "fibonacci": "Fibonacci",
    "binary": "Binary",
    "mfcs": "Modified Fast Climbing",
    "subbarao-binary": "Subbarao-Binary",
    "subbarao-fibonacci": "Subbarao-Fibonacci",
}

_ALIASES = {
    "global": "global",
    "fibonacci": "fibonacci",
    "binary": "binary",
    "intervalhalving": "binary",
    "mfcs": "mfcs",
    "modifiedfastclimbing": "mfcs",
    "subbaraobinary": "subbarao-binary",
    "subbarao": "subbarao-binary",
    "subbaraofibonacci": "subbarao-fibonacci",
}


def canonical_algorithm(name: str) -> str:
    """Normalise ``"SubbaraoBinary"``, ``"Subbarao-Binary"`` etc. to a registry key."""
    key = re.sub(r"[^a-z]", "", name.lower())
    try:
        return _ALIASES[key]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}") from None


@dataclass(frozen=True)
class SearchOutcome:
    algorithm: str
    best_position_um: float
    best_index: int | None
    steps: int
    trajectory: tuple[int, ...]
    trajectory_levels: tuple[float, ...]
    final_interval: tuple[int, int]
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        lo, hi = self.final_interval
        if lo > hi:
            raise ValueError(f"inverted final interval {self.final_interval}")
        if self.best_index is not None and not lo <= self.best_index <= hi:
            raise ValueError(f"best index {self.best_index} outside final interval {self.final_interval}")


@dataclass(frozen=True)
class SearchParams:
    algorithm: str = "binary"
    start_index: int = 0
    coarse_step: int = 8
    n_evals: int | None = None
    min_interval: int = 2
    fit: str = "quadratic"
    fresh_fit: bool = True

    def __post_init__(self):
        object.__setattr__(self, "algorithm", canonical_algorithm(self.algorithm))
        if self.coarse_step < 1:
            raise ValueError("coarse_step must be >= 1")
        if self.min_interval < 2:
            raise ValueError("min_interval must be >= 2")
        if self.n_evals is not None and self.n_evals < 3:
            raise ValueError("n_evals must be >= 3")
        if self.fit not in ("quadratic", "gaussian"):
            raise ValueError(f"fit must be 'quadratic' or 'gaussian', got {self.fit!r}")


def _outcome(ev: AcquisitionEvaluator, algorithm: str, best_index: int, interval, params, position=None):
    trajectory = tuple(ev.acquisitions)
    return SearchOutcome(
        algorithm=algorithm,
        best_position_um=ev.position(best_index) if position is None else float(position),
        best_index=best_index,
        steps=ev.steps(),
        trajectory=trajectory,
        trajectory_levels=tuple(ev.cached(i) for i in trajectory),
        final_interval=(int(interval[0]), int(interval[1])),
        params=params,
    )


def _best_acquired(ev: AcquisitionEvaluator, lo: int, hi: int) -> int:
    best = None
    for i in range(lo, hi + 1):
        if ev.is_acquired(i) and (best is None or ev.cached(i) > ev.cached(best)):
            best = i
    if best is None:
        # nothing acquired inside: take the middle sample
        best = (lo + hi) // 2
        ev(best)
    return best


def _check_range(ev: AcquisitionEvaluator, lo: int, hi: int | None) -> tuple[int, int]:
    hi = ev.count - 1 if hi is None else hi
    if not 0 <= lo <= hi < ev.count:
        raise IntervalTooSmall(f"interval [{lo}, {hi}] not inside grid 0..{ev.count - 1}")
    return lo, hi


def fibonacci_numbers(n: int) -> list[int]:
    """``[F_0, ..., F_n]`` with ``F_0 = F_1 = 1``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    fib = [1, 1][: n + 1]
    while len(fib) <= n:
        nxt = fib[-1] + fib[-2]
        if nxt > INT64_MAX:
            raise OverflowError(f"F_{len(fib)} exceeds the signed 64-bit range")
        fib.append(nxt)
    return fib


def default_n_evals(sample_count: int) -> int:
    """Smallest ``n`` with ``F_n >= sample_count``."""
    fib = [1, 1]
    while fib[-1] < sample_count:
        fib.append(fib[-1] + fib[-2])
    return max(len(fib) - 1, 3)


def global_search(ev: AcquisitionEvaluator, start_index: int = 0, coarse_step: int = 8) -> SearchOutcome:
    """Fixed-step scan that stops at the first decrease.

    The position before the decrease is the result. When the end of the grid
    is reached without a decrease the last evaluated position is returned.
    """
    if not 0 <= start_index < ev.count:
        raise ValueError(f"start_index {start_index} outside 0..{ev.count - 1}")
    if coarse_step < 1 or start_index + coarse_step >= ev.count:
        raise ValueError(f"start_index + coarse_step must stay inside the grid (count {ev.count})")
    best, f_best = _coarse_scan(ev, start_index, coarse_step)
    interval = (max(0, best - coarse_step), min(ev.count - 1, best + coarse_step))
    return _outcome(ev, "global", best, interval, {"start_index": start_index, "coarse_step": coarse_step})


def _coarse_scan(ev, start, step):
    prev, f_prev = start, ev(start)
    i = start + step
    while i < ev.count:
        f = ev(i)
        if f < f_prev:
            break
        prev, f_prev = i, f
        i += step
    return prev, f_prev


def mfcs(ev: AcquisitionEvaluator, start_index: int = 0, coarse_step: int = 8) -> SearchOutcome:
    """Modified Fast Climbing Search.

    A coarse scan with ``coarse_step`` locates a provisional peak; a unit-step
    hill climb from there, in the direction of the larger neighbour, advances
    while the focus level strictly increases.
    """
    if not 0 <= start_index < ev.count:
        raise ValueError(f"start_index {start_index} outside 0..{ev.count - 1}")
    if coarse_step < 2:
        raise ValueError("MFCS needs coarse_step >= 2")
    if start_index + coarse_step >= ev.count:
        raise ValueError(f"start_index + coarse_step must stay inside the grid (count {ev.count})")
    peak, f_peak = _coarse_scan(ev, start_index, coarse_step)

    f_left = ev(peak - 1) if peak > 0 else -math.inf
    f_right = ev(peak + 1) if peak < ev.count - 1 else -math.inf
    if f_right > f_peak and f_right >= f_left:
        direction = 1
    elif f_left > f_peak:
        direction = -1
    else:
        direction = 0

    if direction:
        peak += direction
        f_peak = ev(peak)
        while 0 <= peak + direction < ev.count:
            f_next = ev(peak + direction)
            if not f_next > f_peak:
                break
            peak += direction
            f_peak = f_next

    interval = (max(0, peak - 1), min(ev.count - 1, peak + 1))
    return _outcome(ev, "mfcs", peak, interval, {"start_index": start_index, "coarse_step": coarse_step})


def fibonacci_search(
    ev: AcquisitionEvaluator, lo: int = 0, hi: int | None = None, n_evals: int | None = None
) -> SearchOutcome:
    """Fibonacci interval reduction on the integer grid.

    ``[lo, hi]`` is embedded in the open lattice bracket ``(lo - 1, lo - 1 + F_{n+1})``;
    positions past ``hi`` read as ``-inf`` and cost nothing. On a bracket of
    length ``F_k`` the probes sit at offsets ``F_{k-2}`` and ``F_{k-1}``,
    i.e. at ``a + (F_{k-2}/F_k)(b - a)`` exactly, so the surviving probe of
    one round is always a probe of the next. Exactly ``n_evals`` probes are
    made, of which at most ``n_evals`` are real acquisitions.
    """
    lo, hi = _check_range(ev, lo, hi)
    if hi - lo < 2:
        raise IntervalTooSmall(f"Fibonacci search needs at least 3 samples, got {hi - lo + 1}")
    samples = hi - lo + 1
    n = default_n_evals(samples) if n_evals is None else int(n_evals)
    if n < 3:
        raise ValueError("n_evals must be >= 3")
    k = n + 1
    fib = fibonacci_numbers(k)
    if fib[k] < samples + 1:
        raise ValueError(f"n_evals={n} cannot resolve {samples} samples (F_{n} = {fib[n]})")

    def f(i):
        return ev(i) if i <= hi else -math.inf

    a = lo - 1
    p1, p2 = a + fib[k - 2], a + fib[k - 1]
    f1, f2 = f(p1), f(p2)
    while k > 3:
        k -= 1
        if f1 < f2:
            a = p1
            p1, f1 = p2, f2
            p2 = a + fib[k - 1]
            f2 = f(p2)
        else:
            p2, f2 = p1, f1
            p1 = a + fib[k - 2]
            f1 = f(p1)
    winner = p2 if f1 < f2 else p1
    interval = (max(lo, winner - 1), min(hi, winner + 1))
    best = _best_acquired(ev, *interval)
    return _outcome(ev, "fibonacci", best, interval, {"lo": lo, "hi": hi, "n_evals": n})


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def binary_search(ev: AcquisitionEvaluator, lo: int = 0, hi: int | None = None, min_interval: int = 2) -> SearchOutcome:
    """Interval halving with three probes per round.

    Probes are the two quarter points and the midpoint. The half beyond a
    larger quarter point is discarded, or both outer quarters when the
    midpoint is largest. The surviving probe becomes the next midpoint, so
    rounds after the first acquire at most two new frames. Reduction stops
    once the interval holds ``min_interval + 1`` samples or fewer (at least
    one round is always run).
    """
    lo, hi = _check_range(ev, lo, hi)
    if min_interval < 2:
        raise ValueError("min_interval must be >= 2")
    if hi - lo < min_interval:
        raise IntervalTooSmall(f"interval [{lo}, {hi}] shorter than min_interval={min_interval}")
    first_lo, first_hi = lo, hi
    mid = lo + _half_up((hi - lo) / 2)
    history = [[lo, hi]]
    while True:
        x1 = mid - (mid - lo + 1) // 2
        x2 = mid + (hi - mid + 1) // 2
        f1, fm, f2 = ev(x1), ev(mid), ev(x2)
        if f1 > fm:
            hi, mid = mid, x1
        elif f2 > fm:
            lo, mid = mid, x2
        else:
            lo, hi = x1, x2
        history.append([lo, hi])
        if hi - lo + 1 <= min_interval + 1 or hi - lo < 2:
            break
    best = _best_acquired(ev, lo, hi)
    params = {"lo": first_lo, "hi": first_hi, "min_interval": min_interval, "intervals": history}
    return _outcome(ev, "binary", best, (lo, hi), params)


def quadratic_peak(p0: Sequence[float], p1: Sequence[float], p2: Sequence[float]) -> float:
    """Vertex of the parabola through three ``(position, level)`` points.

    When the parabola opens upward or is flat there is no interior maximum
    and the position of the largest sample is returned instead.
    """
    pts = sorted((float(x), float(y)) for x, y in (p0, p1, p2))
    (x0, y0), (x1, y1), (x2, y2) = pts
    if x0 == x1 or x1 == x2:
        raise DegenerateGeometry("quadratic fit needs three distinct positions")
    d0, d2 = x0 - x1, x2 - x1
    s0, s2 = (y0 - y1) / d0, (y2 - y1) / d2
    curvature = (s0 - s2) / (d0 - d2)
    if not curvature < 0:
        return max(pts, key=lambda p: p[1])[0]
    slope = s0 - curvature * d0
    return x1 - slope / (2.0 * curvature)


def gaussian_peak(p0: Sequence[float], p1: Sequence[float], p2: Sequence[float]) -> float:
    """Mean of the Gaussian through three points (a log-parabola vertex)."""
    logged = []
    for x, y in (p0, p1, p2):
        if not y > 0:
            raise NonPositiveFocusLevel(f"Gaussian fit needs positive focus levels, got {y}")
        logged.append((x, math.log(y)))
    return quadratic_peak(*logged)


def subbarao_search(
    ev: AcquisitionEvaluator,
    lo: int = 0,
    hi: int | None = None,
    reducer: str = "binary",
    fit: str = "quadratic",
    min_interval: int = 2,
    n_evals: int | None = None,
    fresh_fit: bool = True,
) -> SearchOutcome:
    """Interval reduction followed by a three-point peak fit.

    The reducer's final interval is sampled at both ends and the grid point
    nearest its middle, and the fitted peak, clamped to that interval, is the
    result. With ``fresh_fit`` the three fit frames are exposed back to back
    (so they share seeing conditions) and each is charged as a step even if
    the reducer already visited that position; otherwise cached levels are
    reused.
    """
    lo, hi = _check_range(ev, lo, hi)
    if reducer == "binary":
        reduced = binary_search(ev, lo, hi, min_interval)
    elif reducer == "fibonacci":
        reduced = fibonacci_search(ev, lo, hi, n_evals)
    else:
        raise ValueError(f"reducer must be 'binary' or 'fibonacci', got {reducer!r}")
    if fit == "quadratic":
        peak_fn = quadratic_peak
    elif fit == "gaussian":
        peak_fn = gaussian_peak
    else:
        raise ValueError(f"fit must be 'quadratic' or 'gaussian', got {fit!r}")

    a, b = reduced.final_interval
    if b - a < 2:
        a = max(lo, b - 2)
        b = min(hi, a + 2)
    m = _half_up((a + b) / 2)
    acquire = ev.reacquire if fresh_fit else ev.evaluate
    samples = [(ev.position(i), acquire(i)) for i in (a, m, b)]
    peak = peak_fn(*samples)
    peak = min(max(peak, ev.position(a)), ev.position(b))
    best_index = min(max(ev.snap(peak), a), b)
    params = {**reduced.params, "reducer": reducer, "fit": fit, "fresh_fit": fresh_fit}
    return _outcome(ev, f"subbarao-{reducer}", best_index, (a, b), params, position=peak)


def run_search(ev: AcquisitionEvaluator, params: SearchParams) -> SearchOutcome:
    """Dispatch on ``params.algorithm``."""
    algo = params.algorithm
    if algo == "global":
        return global_search(ev, params.start_index, params.coarse_step)
    if algo == "mfcs":
        return mfcs(ev, params.start_index, params.coarse_step)
    if algo == "fibonacci":
        return fibonacci_search(ev, n_evals=params.n_evals)
    if algo == "binary":
        return binary_search(ev, min_interval=params.min_interval)
    reducer = algo.split("-", 1)[1]
    return subbarao_search(
        ev,
        reducer=reducer,
        fit=params.fit,
        min_interval=params.min_interval,
        n_evals=params.n_evals,
        fresh_fit=params.fresh_fit,
    )
