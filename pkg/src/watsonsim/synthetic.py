"""Synthetic 2AFC datasets with rule-based judgement labels.

Each record crops a patch from a base texture and distorts it twice. The
judge fraction comes from a deterministic oracle: within a family the weaker
distortion wins, an undistorted copy always wins, and across families a
fixed mildness ordering assigns soft labels. Desk-scale stand-in for human
judgement corpora; the on-disk layout doubles as both a CSV manifest and a
ref/p0/p1/judge directory tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter, zoom

from watsonsim.color import Colorspace, Image, load_png, save_png, to_grey
from watsonsim.errors import DataError, InputDomainError

# Families ordered from mildest to harshest at matched nominal strength;
# ranks feed the cross-family label table.
FAMILY_RANK = {
    "translate": 0,
    "blur": 1,
    "contrast": 2,
    "quantize": 3,
    "noise": 4,
}
FAMILIES = tuple(FAMILY_RANK)

# Cross-family label: 0.5 + STEP * (rank_first - rank_second), clipped soft.
CROSS_FAMILY_STEP = 0.15
CROSS_FAMILY_LO = 0.2
CROSS_FAMILY_HI = 0.8

# Same-family labels: the weaker distortion's side takes the high value.
SAME_FAMILY_HI = 0.9
SAME_FAMILY_LO = 0.1

# Same-family pairs with nearly equal severities would make the 0.9/0.1
# labels noise rather than signal; pairs are redrawn until the relative
# severity gap reaches this floor.
SAME_FAMILY_MIN_GAP = 0.3

# Chance that a drawn distortion has exactly zero strength (identity copy).
ZERO_STRENGTH_PROB = 1.0 / 8.0


@dataclass(frozen=True)
class SyntheticConfig:
    """Generation settings; identical configs produce identical bytes."""

    n_records: int
    out_dir: str | Path
    seed: int
    base_images: tuple[str, ...] = ()
    patch_size: int = 64
    color: bool = True
    n_textures: int = 16

    def validate(self) -> None:
        if self.n_records < 0:
            raise InputDomainError("n_records must be nonnegative")
        if self.patch_size < 8:
            raise InputDomainError("patch_size must be at least 8")
        if not self.base_images and self.n_textures < 1:
            raise InputDomainError("need at least one base texture")


# ---------------------------------------------------------------------------
# distortions


def _draw_distortion(rng: np.random.Generator):
    """Pick (family, parameter, severity); parameter None means identity."""
    family = FAMILIES[int(rng.integers(len(FAMILIES)))]
    if rng.random() < ZERO_STRENGTH_PROB:
        return family, None, 0.0
    if family == "noise":
        u = rng.random()
        sigma = 0.02 + 0.38 * u * u
        return family, sigma, sigma
    if family == "blur":
        sigma = 0.5 + 2.0 * rng.random()
        return family, sigma, sigma
    if family == "quantize":
        levels = int(rng.integers(3, 25))
        return family, levels, 1.0 / (levels - 1)
    if family == "translate":
        while True:
            dy = int(rng.integers(-5, 6))
            dx = int(rng.integers(-5, 6))
            if dy or dx:
                break
        return family, (dy, dx), float(abs(dy) + abs(dx))
    u = (rng.random() - 0.58) * 1.2
    if abs(u) < 0.02:
        u = 0.05
    return "contrast", math.exp(u), abs(u)


def _draw_pair(rng: np.random.Generator):
    """Two distortion draws, redrawn while a same-family pair is a near tie."""
    while True:
        first = _draw_distortion(rng)
        second = _draw_distortion(rng)
        if first[0] != second[0] or first[2] == 0.0 or second[2] == 0.0:
            return first, second
        gap = abs(first[2] - second[2]) / max(first[2], second[2])
        if gap >= SAME_FAMILY_MIN_GAP:
            return first, second


def apply_distortion(pixels: np.ndarray, family: str, parameter,
                     rng: np.random.Generator) -> np.ndarray:
    """Distort a (H, W, C) float array in [0, 1]; parameter None is a no-op."""
    if family not in FAMILY_RANK:
        raise InputDomainError(f"unknown distortion family {family!r}")
    if parameter is None:
        return pixels.copy()
    if family == "noise":
        out = pixels + parameter * rng.standard_normal(pixels.shape)
    elif family == "blur":
        out = gaussian_filter(pixels, sigma=(parameter, parameter, 0.0),
                              mode="reflect")
    elif family == "quantize":
        steps = parameter - 1
        return np.round(pixels * steps) / steps
    elif family == "translate":
        return np.roll(pixels, parameter, axis=(0, 1))
    else:
        out = 0.5 + parameter * (pixels - 0.5)
    return np.clip(out, 0.0, 1.0)


def oracle_judgement(family0: str, severity0: float,
                     family1: str, severity1: float) -> float:
    """Rule-based second-candidate fraction for a distortion pair.

    An exact-zero severity (identical copy) always wins outright. Otherwise
    same-family pairs favor the weaker severity at 0.9/0.1, and cross-family
    pairs read a fixed soft table off the family mildness ranking.
    """
    if severity0 == 0.0 and severity1 == 0.0:
        return 0.5
    if severity0 == 0.0:
        return 0.0
    if severity1 == 0.0:
        return 1.0
    if family0 == family1:
        if severity0 == severity1:
            return 0.5
        return SAME_FAMILY_HI if severity0 > severity1 else SAME_FAMILY_LO
    gap = FAMILY_RANK[family0] - FAMILY_RANK[family1]
    return float(np.clip(0.5 + CROSS_FAMILY_STEP * gap,
                         CROSS_FAMILY_LO, CROSS_FAMILY_HI))


# ---------------------------------------------------------------------------
# base material


def _procedural_texture(rng: np.random.Generator, size: int,
                        channels: int) -> np.ndarray:
    acc = np.zeros((size, size, channels))
    for scale, weight in ((4, 0.45), (8, 0.3), (16, 0.2), (32, 0.12)):
        coarse = rng.random((scale, scale, channels))
        acc += weight * zoom(coarse, (size / scale, size / scale, 1.0),
                             order=3, mode="grid-wrap", grid_mode=True)
    lo, hi = acc.min(), acc.max()
    acc = (acc - lo) / (hi - lo + 1e-12)
    return 0.06 + 0.88 * acc


def _load_base(path: str, color: bool, patch_size: int) -> np.ndarray:
    image = load_png(path)
    if image.height < patch_size or image.width < patch_size:
        raise DataError(
            f"base image {image.height}x{image.width} smaller than "
            f"patch size {patch_size}", path,
        )
    if color:
        px = image.pixels
        if image.colorspace is Colorspace.GREY:
            px = np.repeat(px, 3, axis=2)
        return px
    return to_grey(image).pixels


def _base_pool(config: SyntheticConfig, rng: np.random.Generator):
    if config.base_images:
        return [_load_base(p, config.color, config.patch_size)
                for p in config.base_images]
    size = config.patch_size + 64
    channels = 3 if config.color else 1
    return [_procedural_texture(rng, size, channels)
            for _ in range(config.n_textures)]


def _crop_patch(base: np.ndarray, size: int, rng: np.random.Generator):
    oy = int(rng.integers(base.shape[0] - size + 1))
    ox = int(rng.integers(base.shape[1] - size + 1))
    return base[oy : oy + size, ox : ox + size, :]


# ---------------------------------------------------------------------------
# generation


def generate_synthetic_dataset(config: SyntheticConfig) -> Path:
    """Write a labeled dataset under ``config.out_dir``; returns the manifest.

    Layout: ``ref/ p0/ p1/`` 8-bit PNGs plus ``judge/<id>.csv`` files, and a
    ``manifest.csv`` with family tags referencing the same images (relative,
    forward-slash paths). Runs are byte-identical for identical configs.
    """
    config.validate()
    out = Path(config.out_dir)
    for sub in ("ref", "p0", "p1", "judge"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)
    bases = _base_pool(config, rng)
    space = Colorspace.RGB if config.color else Colorspace.GREY
    rows = []
    for index in range(config.n_records):
        rid = f"r{index:05d}"
        patch = _crop_patch(bases[int(rng.integers(len(bases)))],
                            config.patch_size, rng)
        ((family0, param0, severity0),
         (family1, param1, severity1)) = _draw_pair(rng)
        first = apply_distortion(patch, family0, param0, rng)
        second = apply_distortion(patch, family1, param1, rng)
        judgement = oracle_judgement(family0, severity0, family1, severity1)
        save_png(Image(patch.copy(), space), out / "ref" / f"{rid}.png")
        save_png(Image(first, space), out / "p0" / f"{rid}.png")
        save_png(Image(second, space), out / "p1" / f"{rid}.png")
        (out / "judge" / f"{rid}.csv").write_text(f"{judgement!r}\n")
        rows.append(
            f"ref/{rid}.png,p0/{rid}.png,p1/{rid}.png,{judgement!r},"
            f"{family0},{family1}"
        )
    manifest = out / "manifest.csv"
    manifest.write_text(
        "ref,p0,p1,judge,family0,family1\n" + "".join(r + "\n" for r in rows)
    )
    return manifest
