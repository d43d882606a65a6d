"""Exit criteria, one test each; outcomes are listed in the terminal summary."""

import filecmp
import math
import time

import numpy as np
import pytest

from focussearch import published
from focussearch.cli import main
from focussearch.focus_curve import AcquisitionEvaluator, FocusCurve, brute_force_argmax
from focussearch.image_model import FWHM_PER_SIGMA, Image, measure_star_fwhm, normalized_variance, pixel_scale
from focussearch.search_algorithms import (
    binary_search,
    fibonacci_search,
    gaussian_peak,
    global_search,
    mfcs,
    quadratic_peak,
    subbarao_search,
)
from focussearch.sequence_io import read_records
from focussearch.sequence_sim import preset, render_sequence

from oracles import gaussian_star_frame, linear_scan_argmax, naive_normalized_variance, random_unimodal


@pytest.mark.acceptance("1", "published scores recomputed (cells <= 1e-3, overall <= 5e-4, < 1 s)")
def test_score_reproduction(tmp_path, capsys):
    t0 = time.perf_counter()
    code = main(["verify-paper", "--out", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    assert code == 0 and "PASS" in capsys.readouterr().out
    tables, summary, cell_dev, overall_dev = published.recompute()
    assert sum(len(t.rows) for t in tables) == 30
    assert cell_dev <= 1e-3
    assert overall_dev <= 5e-4
    m103 = tables[0].by_algorithm()["Binary"].score
    assert m103 == pytest.approx(26 * 162 / (17 * 162), abs=1e-12)
    assert {r.algorithm_name: r.overall_score for r in summary}["Binary"] == pytest.approx(1.3175, abs=5e-4)
    assert elapsed < 1.0


@pytest.mark.acceptance("2", "pixel scale 22.53 arcsec/mm, 27.6 mm, 2048 px in [0.3035, 0.3037]")
def test_pixel_scale():
    assert 0.3035 <= pixel_scale(22.53, 27.6, 2048) <= 0.3037


@pytest.mark.acceptance("3", "1000 random unimodal curves: containment and exact argmax (< 10 s)")
def test_unimodal_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240501)
    for _ in range(1000):
        n = int(rng.integers(55, 72))
        values, peak = random_unimodal(rng, n)
        assert linear_scan_argmax(values) == peak == brute_force_argmax(values)
        curve = FocusCurve(0.0, 100.0, tuple(values))

        for out in (fibonacci_search(AcquisitionEvaluator.from_curve(curve)),
                    binary_search(AcquisitionEvaluator.from_curve(curve))):
            lo, hi = out.final_interval
            assert lo <= peak <= hi

        for step in (4, 8):
            if peak == 0:
                continue
            start = int(rng.integers(0, min(peak, n - step)))
            assert mfcs(AcquisitionEvaluator.from_curve(curve), start, step).best_index == peak

        assert global_search(AcquisitionEvaluator.from_curve(curve), 0, 1).best_index == peak
    assert time.perf_counter() - t0 < 10.0


@pytest.fixture(scope="module")
def m103_curve():
    seq = preset("m103", noise_free=True)
    frames = render_sequence(seq)
    values = tuple(normalized_variance(f) for f in frames)
    return seq, FocusCurve(seq.start_um, seq.step_um, values, seq.name)


@pytest.mark.acceptance("4", "M103 step budgets: binary <= 18 < subbarao-binary <= 27, fibonacci <= 11")
def test_step_budgets(m103_curve):
    _, curve = m103_curve
    assert curve.count == 66
    binary = binary_search(AcquisitionEvaluator.from_curve(curve)).steps
    sub = subbarao_search(AcquisitionEvaluator.from_curve(curve), reducer="binary").steps
    fib = fibonacci_search(AcquisitionEvaluator.from_curve(curve)).steps
    print(f"binary {binary}, subbarao-binary {sub}, fibonacci {fib}")
    assert binary <= 18
    assert binary < sub <= 27
    assert fib <= 11


@pytest.mark.acceptance("5", "noise-free M103 end to end: errors <= 200 um, Subbarao quadratic <= 100 um (< 30 s)")
def test_end_to_end_benchmark(tmp_path):
    t0 = time.perf_counter()
    seq_dir, out_dir = tmp_path / "m103", tmp_path / "bench"
    assert main(["generate", "--preset", "m103", "--noise-free", "--out", str(seq_dir)]) == 0
    assert main(["bench", "--input", str(seq_dir / "manifest.txt"), "--algorithms", "all",
                 "--truth", "declared", "--out-dir", str(out_dir)]) == 0
    elapsed = time.perf_counter() - t0
    records = {r["algorithm"]: r for r in read_records(out_dir / "records.jsonl")}
    assert len(records) == 6
    for algo, rec in records.items():
        assert rec["truth_um"] == 51540.0
        if algo == "global":
            continue
        assert rec["error_um"] <= 200.0, algo
        if algo.startswith("subbarao"):
            assert rec["params"]["fit"] == "quadratic"
            assert rec["error_um"] <= 100.0, algo
    assert elapsed < 30.0


@pytest.mark.acceptance("6", "focus measure: scale equivariance, zero iff constant, naive oracle at 1e-12")
def test_focus_measure_properties():
    rng = np.random.default_rng(6)
    for _ in range(100):
        shape = tuple(int(v) for v in rng.integers(2, 40, size=2))
        pixels = rng.uniform(0.0, 60000.0, size=shape)
        img = Image(pixels)
        fm = normalized_variance(img)
        c = float(rng.uniform(0.01, 100.0))
        assert normalized_variance(Image(pixels * c)) == pytest.approx(c * fm, rel=1e-9)
        assert fm > 0
        assert fm == pytest.approx(naive_normalized_variance(pixels), rel=1e-12)
        level = float(rng.uniform(0.1, 60000.0))
        assert normalized_variance(Image(np.full(shape, level))) == 0.0


@pytest.mark.acceptance("7", "FWHM of noise-free Gaussian stars, sigma 1.5..5 px, within 2%")
def test_fwhm_estimator():
    for sigma in (1.5, 2.0, 3.0, 4.0, 5.0):
        est = measure_star_fwhm(Image(gaussian_star_frame(sigma, flux=2e5)))
        expected = FWHM_PER_SIGMA * sigma
        assert abs(est.fwhm_px - expected) / expected <= 0.02, sigma
    assert FWHM_PER_SIGMA == pytest.approx(2.3548, abs=1e-4)


@pytest.mark.acceptance("8", "three-point fits exact to 1e-9 on 100 random quadratics and Gaussians")
def test_fit_exactness():
    rng = np.random.default_rng(8)
    for _ in range(100):
        vertex = float(rng.uniform(40000.0, 60000.0))
        a = -float(rng.uniform(1e-6, 10.0))
        c = float(rng.uniform(-1e3, 1e3))
        xs = vertex + np.sort(rng.choice(np.arange(-30, 31), size=3, replace=False)) * 100.0
        pts = [(float(x), a * (x - vertex) ** 2 + c) for x in xs]
        assert quadratic_peak(*pts) == pytest.approx(vertex, rel=1e-9)

        mu = float(rng.uniform(-50.0, 50.0))
        s = float(rng.uniform(0.5, 10.0))
        amp = float(rng.uniform(0.1, 1e5))
        xs = mu + np.sort(rng.choice(np.arange(-20, 21), size=3, replace=False)) * (s / 10)
        pts = [(float(x), amp * math.exp(-((x - mu) ** 2) / (2 * s * s))) for x in xs]
        assert gaussian_peak(*pts) == pytest.approx(mu, rel=1e-9, abs=1e-9)


@pytest.mark.acceptance("9", "generate and bench are byte-identical across runs")
def test_determinism(tmp_path):
    for run in ("a", "b"):
        assert main(["generate", "--preset", "n7788", "--seed", "11", "--size", "256",
                     "--out", str(tmp_path / run / "seq")]) == 0
        assert main(["bench", "--input", str(tmp_path / run / "seq" / "manifest.txt"),
                     "--out-dir", str(tmp_path / run / "bench")]) == 0
    for sub in ("seq", "bench"):
        left, right = tmp_path / "a" / sub, tmp_path / "b" / sub
        names = sorted(p.name for p in left.iterdir())
        assert names == sorted(p.name for p in right.iterdir())
        match, mismatch, errors = filecmp.cmpfiles(left, right, names, shallow=False)
        assert not mismatch and not errors
