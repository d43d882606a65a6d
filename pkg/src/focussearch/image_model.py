"""Images, the Normalized Variance focus measure and star FWHM estimation.

Pixel coordinates follow the numpy convention: ``pixels[y, x]`` with the
centre of pixel ``(x, y)`` at integer coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateProfile,
    EmptyImage,
    NoUnsaturatedStar,
    WindowOutOfBounds,
    ZeroMeanImage,
)

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
DEFAULT_SATURATION = 65535.0


def pixel_scale(plate_scale_arcsec_per_mm: float, sensor_size_mm: float, pixels_across: int) -> float:
    """Angular size of one pixel in arcsec."""
    if plate_scale_arcsec_per_mm <= 0 or sensor_size_mm <= 0 or pixels_across <= 0:
        raise ValueError("pixel_scale inputs must all be positive")
    return plate_scale_arcsec_per_mm * sensor_size_mm / pixels_across


# 74-inch Newtonian focus with a 27.6 mm, 2048 px detector.
KAO_PIXEL_SCALE = pixel_scale(22.53, 27.6, 2048)


@dataclass(frozen=True, eq=False)
class Image:
    """A grayscale raster, stored read-only as ``(height, width)`` float64."""

    pixels: np.ndarray
    saturation_level: float = DEFAULT_SATURATION

    def __post_init__(self):
        arr = np.array(self.pixels, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite intensities")
        if np.any(arr < 0):
            raise ValueError("image contains negative intensities")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_rows(cls, width: int, height: int, values, saturation_level: float = DEFAULT_SATURATION) -> "Image":
        """Build from a flat row-major sequence of ``width * height`` values."""
        flat = np.asarray(values, dtype=np.float64)
        if flat.size != width * height:
            raise ValueError(f"expected {width * height} values, got {flat.size}")
        return cls(flat.reshape(height, width), saturation_level)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return (
            self.saturation_level == other.saturation_level
            and self.pixels.shape == other.pixels.shape
            and bool(np.array_equal(self.pixels, other.pixels))
        )


@dataclass(frozen=True)
class StarDetection:
    cx: float
    cy: float
    peak: float
    background: float
    saturated: bool = False


@dataclass(frozen=True)
class FwhmEstimate:
    fwhm_px: float
    fwhm_arcsec: float
    sigma_px: float
    sigma_x_px: float = field(default=float("nan"), compare=False)
    sigma_y_px: float = field(default=float("nan"), compare=False)


def normalized_variance(img: Image) -> float:
    """Image variance divided by its mean intensity.

    Both moments use numpy's pairwise summation, so the result does not
    depend on pixel order beyond ~1e-15 relative. Deviations are taken
    from the first pixel, which makes a constant frame score exactly zero.
    """
    p = img.pixels
    mean = float(np.mean(p))
    if mean == 0.0:
        raise ZeroMeanImage("focus measure undefined for an all-dark frame")
    d = p - p.flat[0]
    variance = float(np.mean(np.square(d - np.mean(d))))
    return variance / mean


def _perimeter_median(window: np.ndarray) -> float:
    if window.shape[0] < 2 or window.shape[1] < 2:
        return float(np.median(window))
    edge = np.concatenate([window[0, :], window[-1, :], window[1:-1, 0], window[1:-1, -1]])
    return float(np.median(edge))


def _filter3x3(p: np.ndarray, op) -> np.ndarray:
    padded = np.pad(p, 1, mode="edge")
    rows = op(op(padded[:, :-2], padded[:, 1:-1]), padded[:, 2:])
    return op(op(rows[:-2], rows[1:-1]), rows[2:])


def _local_maxima(p: np.ndarray, margin: int) -> tuple[np.ndarray, np.ndarray]:
    """Interior pixels that equal their 3x3 maximum and are not flat there."""
    nb_max = _filter3x3(p, np.maximum)
    nb_min = _filter3x3(p, np.minimum)
    is_max = (p == nb_max) & (nb_max > nb_min)
    h, w = p.shape
    interior = np.zeros_like(is_max)
    interior[margin : h - margin, margin : w - margin] = True
    return np.nonzero(is_max & interior)


def detect_brightest_star(img: Image, margin_px: int = 8) -> StarDetection:
    """Locate the brightest isolated unsaturated star.

    Candidates are interior local maxima at least ``margin_px`` from every
    border. A candidate is rejected as saturated when any pixel of its
    ``(2*margin_px+1)`` square window reaches the saturation level. The
    centroid is the background-subtracted centre of mass of that window and
    the background is the median of the window perimeter.
    """
    if margin_px < 0 or 2 * margin_px >= min(img.width, img.height):
        raise ValueError(f"margin_px={margin_px} too large for a {img.width}x{img.height} image")
    p = img.pixels
    ys, xs = _local_maxima(p, margin_px)
    if ys.size == 0:
        raise EmptyImage("no local maximum in the image interior")
    # brightest first; ties resolved by raster order
    order = np.lexsort((xs, ys, -p[ys, xs]))
    for k in order:
        y, x = int(ys[k]), int(xs[k])
        window = p[y - margin_px : y + margin_px + 1, x - margin_px : x + margin_px + 1]
        if window.max() >= img.saturation_level:
            continue
        background = _perimeter_median(window)
        weights = np.clip(window - background, 0.0, None)
        total = weights.sum()
        if total > 0:
            offs = np.arange(-margin_px, margin_px + 1, dtype=np.float64)
            cy = y + float((weights.sum(axis=1) * offs).sum() / total)
            cx = x + float((weights.sum(axis=0) * offs).sum() / total)
        else:
            cy, cx = float(y), float(x)
        return StarDetection(cx=cx, cy=cy, peak=float(p[y, x]), background=background, saturated=False)
    raise NoUnsaturatedStar(f"all {ys.size} candidate maxima are saturated")


def _fit_marginal_sigma(profile: np.ndarray) -> float:
    peak_at = int(np.argmax(profile))
    peak = profile[peak_at]
    if peak <= 0:
        raise DegenerateProfile("no flux above background in the window")
    above = profile > 0.1 * peak
    # keep only the contiguous run around the maximum
    lo = peak_at
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = peak_at
    while hi < profile.size - 1 and above[hi + 1]:
        hi += 1
    if hi - lo + 1 < 3:
        raise DegenerateProfile(f"only {hi - lo + 1} samples above 10% of peak")
    y = profile[lo : hi + 1]
    x = np.arange(lo, hi + 1, dtype=np.float64) - peak_at
    # weighting by amplitude counters the log transform's noise amplification
    a, _, _ = np.polyfit(x, np.log(y), 2, w=y)
    if not a < 0:
        raise DegenerateProfile("marginal profile is not peaked")
    return math.sqrt(-1.0 / (2.0 * a))


def estimate_fwhm(
    img: Image,
    star: StarDetection,
    window_radius_px: int,
    arcsec_per_px: float = KAO_PIXEL_SCALE,
) -> FwhmEstimate:
    """Gaussian FWHM of a star from its x and y marginal profiles.

    The window is centred on the rounded centroid; its perimeter median is
    subtracted as background before the marginals are formed. Each marginal
    is fitted with a log-parabola over the samples above 10% of its peak.
    """
    r = int(window_radius_px)
    if r < 1:
        raise ValueError("window_radius_px must be >= 1")
    x0, y0 = int(round(star.cx)), int(round(star.cy))
    if x0 - r < 0 or y0 - r < 0 or x0 + r >= img.width or y0 + r >= img.height:
        raise WindowOutOfBounds(f"radius {r} window around ({x0}, {y0}) leaves the image")
    window = img.pixels[y0 - r : y0 + r + 1, x0 - r : x0 + r + 1]
    sub = window - _perimeter_median(window)
    sigma_x = _fit_marginal_sigma(sub.sum(axis=0))
    sigma_y = _fit_marginal_sigma(sub.sum(axis=1))
    sigma = 0.5 * (sigma_x + sigma_y)
    fwhm = FWHM_PER_SIGMA * sigma
    return FwhmEstimate(
        fwhm_px=fwhm,
        fwhm_arcsec=fwhm * arcsec_per_px,
        sigma_px=sigma,
        sigma_x_px=sigma_x,
        sigma_y_px=sigma_y,
    )


def measure_star_fwhm(
    img: Image,
    margin_px: int = 8,
    window_radius_px: int | None = None,
    arcsec_per_px: float = KAO_PIXEL_SCALE,
) -> FwhmEstimate:
    """Detect the brightest unsaturated star and estimate its FWHM.

    Without an explicit ``window_radius_px`` the radius grows until it spans
    at least two FWHM plus a margin, bounded by the image edges.
    """
    star = detect_brightest_star(img, margin_px)
    if window_radius_px is not None:
        return estimate_fwhm(img, star, window_radius_px, arcsec_per_px)

    x0, y0 = int(round(star.cx)), int(round(star.cy))
    r_max = min(x0, y0, img.width - 1 - x0, img.height - 1 - y0)
    r = min(max(margin_px, 4), r_max)
    est = estimate_fwhm(img, star, r, arcsec_per_px)
    for _ in range(6):
        wanted = min(int(math.ceil(2.0 * est.fwhm_px)) + 2, r_max)
        if wanted <= r:
            break
        r = wanted
        est = estimate_fwhm(img, star, r, arcsec_per_px)
    return est
