import numpy as np
import pytest

from focussearch.errors import DataError, IndexOutOfRange, NonFiniteValue
from focussearch.focus_curve import (
    AcquisitionEvaluator,
    FocusCurve,
    brute_force_argmax,
    ground_truth_position,
)
from focussearch.search_algorithms import ALGORITHMS, SearchParams, run_search
from focussearch.sequence_io import SequenceManifest
from focussearch.sequence_sim import (
    DefocusModel,
    SequenceSpec,
    StarFieldSpec,
    generate_sequence,
    render_sequence,
)
from focussearch.image_model import normalized_variance, measure_star_fwhm

from oracles import linear_scan_argmax


def curve(values, start=1000.0, step=100.0, **kw):
    return FocusCurve(start, step, tuple(values), **kw)


def test_curve_validation():
    with pytest.raises(DataError):
        curve([1, 2])
    with pytest.raises(DataError):
        curve([1, 2, 3], step=0.0)
    with pytest.raises(NonFiniteValue):
        curve([1, float("nan"), 3])
    with pytest.raises(DataError):
        curve([1, 2, 3], fwhm_px=(1.0, 2.0))


def test_curve_positions():
    c = curve([1, 2, 3, 4])
    assert c.count == 4
    assert c.position(2) == 1200.0
    assert list(c.positions()) == [1000.0, 1100.0, 1200.0, 1300.0]
    assert c.nearest_index(1149.0) == 1
    assert c.nearest_index(-5e9) == 0 and c.nearest_index(5e9) == 3


def test_repeat_evaluation_is_memoized():
    ev = AcquisitionEvaluator.from_curve(curve([1, 5, 2]))
    assert ev.evaluate(1) == ev.evaluate(1) == 5
    assert ev.steps() == 1


def test_distinct_indices_are_counted():
    ev = AcquisitionEvaluator.from_curve(curve([1, 5, 2]))
    for i in (0, 1, 2):
        ev(i)
    assert ev.steps() == 3
    assert ev.acquisitions == [0, 1, 2]


def test_count_revisits_charges_every_query():
    ev = AcquisitionEvaluator.from_curve(curve([1, 5, 2]), count_revisits=True)
    ev(1)
    ev(1)
    assert ev.steps() == 2


def test_reacquire_is_charged():
    calls = []

    def acquire(i):
        calls.append(i)
        return float(i)

    ev = AcquisitionEvaluator(3, 0.0, 1.0, acquire)
    ev(2)
    ev.reacquire(2)
    ev.reacquire(0)
    assert ev.steps() == 3 and calls == [2, 2, 0]


def test_out_of_range_index():
    ev = AcquisitionEvaluator.from_curve(curve([1, 5, 2]))
    with pytest.raises(IndexOutOfRange):
        ev(3)
    with pytest.raises(IndexError):
        ev(-1)
    assert ev.steps() == 0


def test_snap_clamps_to_grid():
    ev = AcquisitionEvaluator.from_curve(curve([1, 5, 2, 0]))
    assert ev.snap(1160.0) == 2
    assert ev.snap(0.0) == 0 and ev.snap(9999.0) == 3


def test_brute_force_argmax_examples():
    assert brute_force_argmax([1, 3, 2]) == 1
    assert brute_force_argmax([2, 2, 1]) == 0


def test_brute_force_argmax_matches_linear_scan():
    values = np.random.default_rng(7).normal(size=66)
    got = brute_force_argmax(curve(values))
    assert got == linear_scan_argmax(list(values))


def test_declared_truth():
    manifest = SequenceManifest("S", 48300.0, 100.0, ("a", "b", "c"), z_best_um=51500.0)
    assert ground_truth_position(manifest) == 51500.0


def test_curve_truth_modes():
    c = curve([1, 4, 3, 2], fwhm_px=(5.0, 4.0, 3.0, 6.0))
    assert ground_truth_position(c) == 1200.0
    assert ground_truth_position(c, "measure") == 1100.0
    with pytest.raises(DataError):
        ground_truth_position(c, "declared")
    with pytest.raises(ValueError):
        ground_truth_position(c, "bogus")


def test_monotone_fwhm_truth_is_endpoint():
    c = curve([1, 2, 3, 4], fwhm_px=(9.0, 8.0, 7.0, 6.0))
    assert ground_truth_position(c, "fwhm") == c.position(3)


class _Frames:
    """Minimal in-memory frame source without a declared focus."""

    def __init__(self, spec):
        self.name = spec.name
        self.start_um = spec.start_um
        self.step_um = spec.step_um
        self._frames = render_sequence(spec)
        self.frame_count = len(self._frames)

    def load_frame(self, i):
        return self._frames[i]


def _small_spec(z_best=51530.0):
    field = StarFieldSpec(image_size_px=(96, 96), stars=((47.6, 48.3, 2e5),), background_level=800.0)
    return SequenceSpec("small", 50000.0, 100.0, 31, DefocusModel(z_best, 3.0, 0.004), field)


def test_noise_free_fwhm_truth_is_nearest_grid_point():
    frames = _Frames(_small_spec())
    assert getattr(frames, "z_best_um", None) is None
    assert ground_truth_position(frames) == 51500.0


def test_curve_and_frame_modes_agree(tmp_path):
    manifest = generate_sequence(_small_spec(), tmp_path)
    values = [normalized_variance(manifest.load_frame(i)) for i in range(manifest.frame_count)]
    c = FocusCurve(manifest.start_um, manifest.step_um, tuple(values))
    for algo in ALGORITHMS:
        params = SearchParams(algorithm=algo, start_index=3, coarse_step=4)
        a = run_search(AcquisitionEvaluator.from_curve(c), params)
        b = run_search(AcquisitionEvaluator.from_frames(manifest), params)
        assert a.trajectory == b.trajectory
        assert a.best_position_um == b.best_position_um
        assert a.steps == b.steps


def test_frame_mode_accepts_custom_measure(tmp_path):
    manifest = generate_sequence(_small_spec(), tmp_path)
    ev = AcquisitionEvaluator.from_frames(manifest, measure=lambda img: -measure_star_fwhm(img).fwhm_px)
    assert ev(15) > ev(0)
