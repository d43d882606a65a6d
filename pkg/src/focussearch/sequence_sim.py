"""Deterministic synthetic star-field focus sequences.

Stars are circular Gaussians whose FWHM grows with defocus as the
quadrature sum of a seeing floor and a linear blur term. Noise comes from
numpy's PCG64 generator seeded per frame from ``(seed, position)``, so a
frame is reproducible on its own regardless of rendering order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path

import numpy as np

from .image_model import DEFAULT_SATURATION, FWHM_PER_SIGMA, Image

RNG_NAME = "numpy.PCG64"
RENDER_HALF_WIDTH_SIGMA = 5.0


@dataclass(frozen=True)
class DefocusModel:
    z_best_um: float
    fwhm_seeing_px: float
    defocus_coeff: float

    def __post_init__(self):
        if not self.fwhm_seeing_px > 0:
            raise ValueError("fwhm_seeing_px must be positive")
        if self.defocus_coeff < 0:
            raise ValueError("defocus_coeff must be non-negative")


@dataclass(frozen=True)
class StarFieldSpec:
    image_size_px: tuple[int, int] = (512, 512)
    stars: tuple[tuple[float, float, float], ...] = ()
    background_level: float = 1000.0
    read_noise_sigma: float = 0.0
    photon_noise: bool = False
    seed: int = 0
    saturation_level: float = DEFAULT_SATURATION

    def __post_init__(self):
        w, h = self.image_size_px
        if w < 1 or h < 1:
            raise ValueError("image size must be positive")
        for x, y, flux in self.stars:
            if not (0 <= x < w and 0 <= y < h):
                raise ValueError(f"star at ({x}, {y}) outside a {w}x{h} image")
            if not flux > 0:
                raise ValueError("star fluxes must be positive")
        if self.seed < 0:
            raise ValueError("seed must be an unsigned integer")

    @property
    def noise_free(self) -> bool:
        return self.read_noise_sigma == 0 and not self.photon_noise


@dataclass(frozen=True)
class SequenceSpec:
    name: str
    start_um: float
    step_um: float
    frame_count: int
    defocus: DefocusModel
    field: StarFieldSpec = dc_field(default_factory=StarFieldSpec)

    def __post_init__(self):
        if self.frame_count < 3:
            raise ValueError("frame_count must be >= 3")
        if not self.step_um > 0:
            raise ValueError("step_um must be positive")

    def positions(self) -> list[float]:
        return [self.start_um + i * self.step_um for i in range(self.frame_count)]


def fwhm_at(model: DefocusModel, z: float) -> float:
    blur = model.defocus_coeff * abs(z - model.z_best_um)
    return math.sqrt(model.fwhm_seeing_px**2 + blur**2)


def _frame_rng(seed: int, z: float) -> np.random.Generator:
    # nanometre key keeps distinct grid positions distinct
    key = int(round(z * 1000.0)) & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), key])))


def _add_star(canvas: np.ndarray, x: float, y: float, flux: float, sigma: float) -> None:
    h, w = canvas.shape
    half = int(math.ceil(RENDER_HALF_WIDTH_SIGMA * sigma))
    x0, x1 = max(0, int(round(x)) - half), min(w, int(round(x)) + half + 1)
    y0, y1 = max(0, int(round(y)) - half), min(h, int(round(y)) + half + 1)
    if x0 >= x1 or y0 >= y1:
        return
    gx = np.exp(-0.5 * ((np.arange(x0, x1) - x) / sigma) ** 2)
    gy = np.exp(-0.5 * ((np.arange(y0, y1) - y) / sigma) ** 2)
    amplitude = flux / (2.0 * math.pi * sigma * sigma)
    canvas[y0:y1, x0:x1] += amplitude * np.outer(gy, gx)


def render_frame(spec: StarFieldSpec, model: DefocusModel, z: float) -> Image:
    """Render the star field as seen at focuser position ``z``."""
    w, h = spec.image_size_px
    sigma = fwhm_at(model, z) / FWHM_PER_SIGMA
    canvas = np.zeros((h, w), dtype=np.float64)
    for x, y, flux in spec.stars:
        _add_star(canvas, x, y, flux, sigma)
    canvas += spec.background_level
    if not spec.noise_free:
        rng = _frame_rng(spec.seed, z)
        if spec.photon_noise:
            canvas = rng.poisson(canvas).astype(np.float64)
        if spec.read_noise_sigma > 0:
            canvas += rng.normal(0.0, spec.read_noise_sigma, size=canvas.shape)
    np.clip(canvas, 0.0, spec.saturation_level, out=canvas)
    return Image(canvas, spec.saturation_level)


def quantize(img: Image) -> Image:
    """Round to integer ADU, as stored in a 16-bit frame."""
    return Image(np.rint(img.pixels), img.saturation_level)


def random_star_field(
    seed: int,
    image_size_px: tuple[int, int] = (512, 512),
    grid: int = 4,
    flux_range: tuple[float, float] = (5e4, 7e5),
    jitter_px: float = 12.0,
    **kwargs,
) -> StarFieldSpec:
    """A jittered ``grid x grid`` lattice of isolated stars with log-uniform fluxes.

    Jitter is capped at a quarter of a grid cell so stars stay inside small frames.
    """
    w, h = image_size_px
    jitter_px = min(jitter_px, 0.25 * min(w, h) / grid)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0x57A2])))
    stars = []
    for j in range(grid):
        for i in range(grid):
            x = (i + 0.5) * w / grid + rng.uniform(-jitter_px, jitter_px)
            y = (j + 0.5) * h / grid + rng.uniform(-jitter_px, jitter_px)
            flux = math.exp(rng.uniform(math.log(flux_range[0]), math.log(flux_range[1])))
            stars.append((round(float(x), 3), round(float(y), 3), round(flux, 1)))
    return StarFieldSpec(image_size_px=image_size_px, stars=tuple(stars), seed=int(seed), **kwargs)


# Blur at ~3500 µm from focus reaches ~4.5x the seeing FWHM.
_EDGE_DEFOCUS_UM = 3500.0
_EDGE_RATIO = 4.5


def edge_defocus_coeff(fwhm_seeing_px: float) -> float:
    return round(fwhm_seeing_px * math.sqrt(_EDGE_RATIO**2 - 1.0) / _EDGE_DEFOCUS_UM, 7)


# name: (start µm, step µm, frames, seeing FWHM px, best focus µm)
PRESET_TABLE = {
    "m103": (48300.0, 100.0, 66, 4.15, 51540.0),
    "n6793": (49000.0, 100.0, 61, 4.279, 52030.0),
    "n7067": (49000.0, 100.0, 55, 3.68, 51720.0),
    "n7788": (48600.0, 100.0, 61, 4.78, 51460.0),
    "n7789": (48000.0, 100.0, 71, 3.89, 51280.0),
}


def preset(
    name: str,
    seed: int = 0,
    image_size_px: tuple[int, int] = (512, 512),
    noise_free: bool = False,
    read_noise_sigma: float = 8.0,
    photon_noise: bool = True,
) -> SequenceSpec:
    """A sequence laid out like one of the five KAO star-cluster runs.

    Start, step, frame count and seeing FWHM follow the observed runs; the
    best-focus position and star field are synthetic.
    """
    key = name.lower()
    if key not in PRESET_TABLE:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESET_TABLE)}")
    start, step, count, seeing, z_best = PRESET_TABLE[key]
    model = DefocusModel(z_best_um=z_best, fwhm_seeing_px=seeing, defocus_coeff=edge_defocus_coeff(seeing))
    noise = {"read_noise_sigma": 0.0, "photon_noise": False} if noise_free else {
        "read_noise_sigma": read_noise_sigma,
        "photon_noise": photon_noise,
    }
    star_field = random_star_field(seed, image_size_px, **noise)
    return SequenceSpec(name=key.upper(), start_um=start, step_um=step, frame_count=count, defocus=model, field=star_field)


def render_sequence(seq: SequenceSpec, workers: int = 1) -> list[Image]:
    """All frames, quantized to integers, in position order."""
    positions = seq.positions()

    def one(z):
        return quantize(render_frame(seq.field, seq.defocus, z))

    if workers <= 1:
        return [one(z) for z in positions]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, positions))


def generate_sequence(seq: SequenceSpec, out_dir, workers: int = 1):
    """Render every frame to ``out_dir`` as PGM and write ``manifest.txt``.

    Returns the :class:`~focussearch.sequence_io.SequenceManifest` written.
    """
    from .sequence_io import SequenceManifest, write_manifest, write_pgm

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frames = render_sequence(seq, workers)
    paths = []
    for i, img in enumerate(frames):
        rel = f"frame_{i:03d}.pgm"
        write_pgm(img, out / rel)
        paths.append(rel)
    manifest = SequenceManifest(
        name=seq.name,
        start_um=seq.start_um,
        step_um=seq.step_um,
        frames=tuple(paths),
        z_best_um=seq.defocus.z_best_um,
        saturation_level=seq.field.saturation_level,
        generator=generator_params(seq),
        directory=out,
    )
    write_manifest(manifest, out / "manifest.txt")
    return manifest


def generator_params(seq: SequenceSpec) -> dict[str, str]:
    f = seq.field
    params = {
        "generator.rng": RNG_NAME,
        "generator.seed": str(f.seed),
        "model.fwhm_seeing_px": repr(seq.defocus.fwhm_seeing_px),
        "model.defocus_coeff": repr(seq.defocus.defocus_coeff),
        "field.width": str(f.image_size_px[0]),
        "field.height": str(f.image_size_px[1]),
        "field.background_level": repr(f.background_level),
        "field.read_noise_sigma": repr(f.read_noise_sigma),
        "field.photon_noise": str(f.photon_noise).lower(),
        "field.stars": ";".join(f"{x!r} {y!r} {flux!r}" for x, y, flux in f.stars),
    }
    return params


def sequence_from_params(name: str, start_um: float, step_um: float, frame_count: int, z_best_um: float,
                         params: dict[str, str], saturation_level: float = DEFAULT_SATURATION) -> SequenceSpec:
    """Rebuild a :class:`SequenceSpec` from manifest generator keys."""
    stars = tuple(
        tuple(float(v) for v in item.split()) for item in params["field.stars"].split(";") if item.strip()
    )
    star_field = StarFieldSpec(
        image_size_px=(int(params["field.width"]), int(params["field.height"])),
        stars=stars,
        background_level=float(params["field.background_level"]),
        read_noise_sigma=float(params["field.read_noise_sigma"]),
        photon_noise=params["field.photon_noise"] == "true",
        seed=int(params["generator.seed"]),
        saturation_level=saturation_level,
    )
    model = DefocusModel(
        z_best_um=z_best_um,
        fwhm_seeing_px=float(params["model.fwhm_seeing_px"]),
        defocus_coeff=float(params["model.defocus_coeff"]),
    )
    return SequenceSpec(name, start_um, step_um, frame_count, model, star_field)


def without_noise(seq: SequenceSpec) -> SequenceSpec:
    return replace(seq, field=replace(seq.field, read_noise_sigma=0.0, photon_noise=False))
