"""Masked block-frequency distances with trainable sensitivity parameters.

The distance between two images is a weighted p-norm over per-block
frequency coefficients, where each bin's divisor is a sensitivity threshold
raised by image brightness (luminance masking) and by the coefficient's own
energy (contrast masking, smoothed so the whole pipeline stays
differentiable). The DFT variant compares shift-invariant amplitudes and
adds a weighted phase term.

Masking thresholds are always computed from the first argument, so the
distance is deliberately asymmetric: the first image plays the role of the
reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from watsonsim.errors import InputDomainError, NumericalError, ValidationError
from watsonsim.transforms import (
    BlockGrid,
    dct2_blocks,
    dct_matrix,
    dft_matrix,
    hermitian_valid_mask,
    partition_blocks,
    AMP_FLOOR,
)

EPS_DC = 1e-10  # guards the brightness ratio on black images
EPS_ABS = 1e-12  # keeps |C|^r differentiable at C = 0
RATIO_FLOOR = 1e-12  # brightness ratio clamp; only reachable for dc < 0

VARIANTS = ("dct", "dft")
CHANNEL_MODES = ("grey", "ycbcr")
CHANNEL_NAMES = {"grey": ("grey",), "ycbcr": ("y", "cb", "cr")}


# ---------------------------------------------------------------------------
# parameters


@dataclass
class WatsonParams:
    """Every trainable quantity of the metric plus the 2AFC head slope.

    tables: (n_channels, B, B) for the DCT variant, (n_channels, B, B/2+1)
    for the DFT variant. phase_weights has the DFT table shape and is None
    for the DCT variant. lam holds the three channel weights for ycbcr mode.
    """

    variant: str
    channels: str
    tables: np.ndarray
    alpha: float = 0.649
    r: float = 0.7
    p: float = 4.0
    epsilon: float = 1e-10
    phase_weights: np.ndarray | None = None
    lam: np.ndarray | None = None
    gamma: float = 1.0

    def __post_init__(self):
        self.tables = np.asarray(self.tables, dtype=np.float64)
        if self.phase_weights is not None:
            self.phase_weights = np.asarray(self.phase_weights, dtype=np.float64)
        if self.lam is not None:
            self.lam = np.asarray(self.lam, dtype=np.float64)
        self.validate()

    @property
    def n_channels(self) -> int:
        return 1 if self.channels == "grey" else 3

    @property
    def block_size(self) -> int:
        return int(self.tables.shape[1])

    def table_shape(self) -> tuple[int, int]:
        b = self.block_size
        return (b, b) if self.variant == "dct" else (b, b // 2 + 1)

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r}")
        if self.channels not in CHANNEL_MODES:
            raise ValidationError(f"unknown channel mode {self.channels!r}")
        want = (self.n_channels,) + self.table_shape()
        if self.tables.shape != want:
            raise ValidationError(
                f"tables shape {self.tables.shape} != expected {want}"
            )
        if not np.all(np.isfinite(self.tables)) or np.any(self.tables <= 0):
            raise ValidationError("sensitivity tables must be finite and positive")
        if self.variant == "dft":
            if self.phase_weights is None or self.phase_weights.shape != want:
                raise ValidationError("dft variant needs phase weights per channel")
            if not np.all(np.isfinite(self.phase_weights)) or np.any(
                self.phase_weights <= 0
            ):
                raise ValidationError("phase weights must be finite and positive")
        elif self.phase_weights is not None:
            raise ValidationError("dct variant takes no phase weights")
        if self.channels == "ycbcr":
            if self.lam is None or self.lam.shape != (3,):
                raise ValidationError("ycbcr mode needs three channel weights")
            if not np.all(np.isfinite(self.lam)) or np.any(self.lam <= 0):
                raise ValidationError("channel weights must be finite and positive")
        elif self.lam is not None:
            raise ValidationError("grey mode takes no channel weights")
        if not (0.0 < self.r < 1.0):
            raise ValidationError("r must lie strictly inside (0, 1)")
        if not (self.p > 1.0):
            raise ValidationError("p must exceed 1")
        if not (self.gamma > 0.0):
            raise ValidationError("gamma must be positive")
        if not (self.epsilon > 0.0):
            raise ValidationError("epsilon must be positive")
        if not np.isfinite(self.alpha):
            raise ValidationError("alpha must be finite")

    def copy(self) -> "WatsonParams":
        return WatsonParams(
            variant=self.variant,
            channels=self.channels,
            tables=self.tables.copy(),
            alpha=self.alpha,
            r=self.r,
            p=self.p,
            epsilon=self.epsilon,
            phase_weights=None
            if self.phase_weights is None
            else self.phase_weights.copy(),
            lam=None if self.lam is None else self.lam.copy(),
            gamma=self.gamma,
        )


def default_sensitivity_table(variant: str, block_size: int = 8) -> np.ndarray:
    """Initialization thresholds rising radially with frequency.

    The d.c. bin gets the lowest threshold (brightness errors matter most)
    and thresholds grow toward the corner of the spectrum. DFT rows use the
    aliased frequency min(u, B-u). Values are an initialization choice, not
    measurements; training is expected to move them.
    """
    b = block_size
    if variant == "dct":
        fi = np.arange(b)[:, None]
        fj = np.arange(b)[None, :]
        radial = (fi ** 2 + fj ** 2) / (2.0 * (b - 1) ** 2)
    elif variant == "dft":
        u = np.arange(b)[:, None]
        fu = np.minimum(u, b - u)
        fv = np.arange(b // 2 + 1)[None, :]
        radial = (fu ** 2 + fv ** 2) / (2.0 * (b // 2) ** 2)
    else:
        raise InputDomainError(f"unknown variant {variant!r}")
    return 0.2 + 0.8 * radial


def default_phase_weights(block_size: int = 8) -> np.ndarray:
    # flat weights sized so the phase and amplitude parts have comparable
    # magnitude on noisy natural image pairs
    return np.full((block_size, block_size // 2 + 1), 0.005)


def default_params(variant: str = "dct", channels: str = "grey",
                   block_size: int = 8) -> WatsonParams:
    if channels not in CHANNEL_MODES:
        raise InputDomainError(f"unknown channel mode {channels!r}")
    nch = 1 if channels == "grey" else 3
    table = default_sensitivity_table(variant, block_size)
    tables = np.stack([table.copy() for _ in range(nch)])
    weights = None
    if variant == "dft":
        w = default_phase_weights(block_size)
        weights = np.stack([w.copy() for _ in range(nch)])
    lam = np.array([1.0, 0.25, 0.25]) if channels == "ycbcr" else None
    return WatsonParams(
        variant=variant, channels=channels, tables=tables,
        phase_weights=weights, lam=lam,
    )


# ---------------------------------------------------------------------------
# masking primitives


def smooth_max(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exponentially weighted max: (a e^a + b e^b) / (e^a + e^b).

    Computed with max subtraction so large thresholds cannot overflow.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m = np.maximum(a, b)
    ea = np.exp(a - m)
    eb = np.exp(b - m)
    return (a * ea + b * eb) / (ea + eb)


def _smooth_max_parts(a, b):
    m = np.maximum(a, b)
    ea = np.exp(a - m)
    eb = np.exp(b - m)
    den = ea + eb
    sa = ea / den
    sb = eb / den
    return a * sa + b * sb, sa, sb


def _luminance_parts(table, dc, alpha):
    mean_dc = dc.mean()
    ratio_raw = (dc + EPS_DC) / (mean_dc + EPS_DC)
    ratio = np.maximum(ratio_raw, RATIO_FLOOR)
    tl = table[None, :, :] * (ratio ** alpha)[:, None, None]
    return tl, ratio, ratio_raw, mean_dc


def luminance_mask(table: np.ndarray, dc: np.ndarray, alpha: float) -> np.ndarray:
    """Per-block thresholds scaled by relative block brightness.

    dc holds the per-block d.c. coefficient; blocks brighter than the image
    average get raised thresholds. Both sides of the brightness ratio carry
    a small epsilon so black blocks and black images keep strictly positive
    thresholds and finite gradients.
    """
    dc = np.asarray(dc, dtype=np.float64)
    if dc.ndim != 1:
        raise InputDomainError("dc must be a vector with one entry per block")
    tl, _, _, _ = _luminance_parts(np.asarray(table, dtype=np.float64), dc, alpha)
    return tl


def _contrast_parts(tl, coeffs, r):
    raw = np.abs(coeffs)
    b_arg = (raw + EPS_ABS) ** r * tl ** (1.0 - r)
    s, sa, sb = _smooth_max_parts(tl, b_arg)
    return s, sa, sb, b_arg, raw


def contrast_mask(tl: np.ndarray, coeffs: np.ndarray, r: float) -> np.ndarray:
    """Raise thresholds where the reference coefficient itself is large."""
    s, _, _, _, _ = _contrast_parts(
        np.asarray(tl, dtype=np.float64), np.asarray(coeffs, dtype=np.float64), r
    )
    return s


def wrap_phase(delta: np.ndarray) -> np.ndarray:
    """Map any phase difference into (-pi, pi]; equals arccos(cos(delta)) in
    magnitude but keeps the sign."""
    return np.pi - np.mod(np.pi - np.asarray(delta, dtype=np.float64), 2.0 * np.pi)


def phase_distance(
    phase: np.ndarray,
    phase_p: np.ndarray,
    weights: np.ndarray,
    valid_mask: np.ndarray,
) -> float:
    """Weighted sum of absolute wrapped phase differences.

    Each conjugate pair contributes once (valid_mask) and the d.c. bin is
    skipped: its phase is a sign, not a spatial location.
    """
    pm = valid_mask.copy()
    pm[0, 0] = False
    dphi = wrap_phase(phase - phase_p)
    return float((weights[None] * np.abs(dphi) * pm[None]).sum())


# ---------------------------------------------------------------------------
# channel forwards (value + cache shared with the gradient module)


def _reference_side_dct(x, table, alpha, r, grid, basis=None):
    blocks = partition_blocks(x, grid)
    coeffs = dct2_blocks(blocks, basis)
    dc = coeffs[:, 0, 0]
    tl, ratio, ratio_raw, mean_dc = _luminance_parts(table, dc, alpha)
    s, sa, sb, b_arg, raw = _contrast_parts(tl, coeffs, r)
    return {
        "variant": "dct", "grid": grid, "shape": x.shape, "table": table,
        "alpha": alpha, "r": r, "blocks": blocks, "coeffs": coeffs, "dc": dc,
        "ratio": ratio, "ratio_raw": ratio_raw, "mean_dc": mean_dc, "tl": tl,
        "s": s, "sa": sa, "sb": sb, "b_arg": b_arg, "raw": raw, "mask": None,
    }


def _reference_side_dft(x, table, weights, alpha, r, grid, basis=None):
    b = grid.block_size
    blocks = partition_blocks(x, grid)
    e = dft_matrix(b) if basis is None else basis
    spec = (e @ blocks.astype(np.complex128) @ e.T)[..., : b // 2 + 1]
    amp = np.abs(spec)
    phase = np.where(amp >= AMP_FLOOR, np.angle(spec), 0.0)
    mask = hermitian_valid_mask(b)
    dc = amp[:, 0, 0]
    tl, ratio, ratio_raw, mean_dc = _luminance_parts(table, dc, alpha)
    s, sa, sb, b_arg, raw = _contrast_parts(tl, amp, r)
    return {
        "variant": "dft", "grid": grid, "shape": x.shape, "table": table,
        "weights": weights, "alpha": alpha, "r": r, "blocks": blocks,
        "spec": spec, "amp": amp, "phase": phase, "dc": dc, "ratio": ratio,
        "ratio_raw": ratio_raw, "mean_dc": mean_dc, "tl": tl, "s": s,
        "sa": sa, "sb": sb, "b_arg": b_arg, "raw": raw, "mask": mask,
    }


def reference_side(x, params: WatsonParams, grid: BlockGrid, channel: int = 0,
                   basis=None):
    """Precompute everything that depends only on the reference image.

    Masking divisors come from the first argument alone, so a reference can
    be compared against many candidates without recomputing its side.
    """
    table = params.tables[channel]
    if params.variant == "dct":
        return _reference_side_dct(x, table, params.alpha, params.r, grid, basis)
    return _reference_side_dft(
        x, table, params.phase_weights[channel], params.alpha, params.r, grid, basis
    )


def pair_forward(ref, xp, p: float, eps: float, basis=None):
    """Finish the distance for one candidate image against a reference cache."""
    grid: BlockGrid = ref["grid"]
    if xp.shape != ref["shape"]:
        raise InputDomainError(
            f"image shapes differ: {ref['shape']} vs {xp.shape}"
        )
    blocks_p = partition_blocks(xp, grid)
    cache = dict(ref)
    cache["p"] = p
    cache["eps"] = eps
    cache["blocks_p"] = blocks_p
    if ref["variant"] == "dct":
        coeffs_p = dct2_blocks(blocks_p, basis)
        cache["coeffs_p"] = coeffs_p
        delta = ref["coeffs"] - coeffs_p
        phase_part = 0.0
    else:
        b = grid.block_size
        e = dft_matrix(b) if basis is None else basis
        spec_p = (e @ blocks_p.astype(np.complex128) @ e.T)[..., : b // 2 + 1]
        amp_p = np.abs(spec_p)
        phase_p = np.where(amp_p >= AMP_FLOOR, np.angle(spec_p), 0.0)
        cache["spec_p"] = spec_p
        cache["amp_p"] = amp_p
        cache["phase_p"] = phase_p
        delta = ref["amp"] - amp_p
        pm = ref["mask"].copy()
        pm[0, 0] = False
        dphi = wrap_phase(ref["phase"] - phase_p)
        cache["dphi"] = dphi
        cache["phase_bins"] = pm
        phase_part = float(
            (ref["weights"][None] * np.abs(dphi) * pm[None]).sum()
        )
    z = np.abs(delta) / ref["s"]
    zp = z ** p
    if ref["mask"] is not None:
        zp = zp * ref["mask"]
    u = eps + float(zp.sum())
    amp_part = u ** (1.0 / p)
    cache.update(delta=delta, z=z, u=u, amp_part=amp_part, phase_part=phase_part)
    value = amp_part + phase_part
    cache["value"] = value
    if not np.isfinite(value):
        raise NumericalError("distance evaluated to a non-finite value")
    return value, cache


def channel_forward(x, xp, params: WatsonParams, grid: BlockGrid,
                    channel: int = 0, basis=None):
    ref = reference_side(
        np.asarray(x, dtype=np.float64), params, grid, channel, basis
    )
    return pair_forward(ref, np.asarray(xp, dtype=np.float64), params.p,
                        params.epsilon, basis)


# ---------------------------------------------------------------------------
# public distances


def _default_grid(params, grid):
    if grid is None:
        return BlockGrid(params.block_size, (0, 0))
    if grid.block_size != params.block_size:
        raise InputDomainError(
            f"grid block size {grid.block_size} != parameter tables "
            f"{params.block_size}"
        )
    return grid


def watson_dct_distance(x, xp, params: WatsonParams, grid: BlockGrid | None = None,
                        channel: int = 0) -> float:
    """Masked p-norm DCT distance from reference x to candidate xp."""
    if params.variant != "dct":
        raise InputDomainError("params are not for the dct variant")
    value, _ = channel_forward(x, xp, params, _default_grid(params, grid), channel)
    return value


def watson_dft_distance(x, xp, params: WatsonParams, grid: BlockGrid | None = None,
                        channel: int = 0) -> float:
    """Amplitude distance plus weighted phase distance on the half spectrum."""
    if params.variant != "dft":
        raise InputDomainError("params are not for the dft variant")
    value, _ = channel_forward(x, xp, params, _default_grid(params, grid), channel)
    return value


def watson_dft_parts(x, xp, params: WatsonParams, grid: BlockGrid | None = None,
                     channel: int = 0) -> tuple[float, float]:
    """(amplitude component, phase component) of the DFT distance."""
    if params.variant != "dft":
        raise InputDomainError("params are not for the dft variant")
    _, cache = channel_forward(x, xp, params, _default_grid(params, grid), channel)
    return cache["amp_part"], cache["phase_part"]


def color_aggregate(loss_fn, x, xp, params: WatsonParams,
                    grid: BlockGrid | None = None) -> float:
    """Weighted sum of per-channel losses on (H, W, 3) YCbCr arrays."""
    if params.channels != "ycbcr":
        raise InputDomainError("color_aggregate needs ycbcr parameters")
    x = np.asarray(x, dtype=np.float64)
    xp = np.asarray(xp, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != 3 or xp.shape != x.shape:
        raise InputDomainError("color_aggregate expects matching (H, W, 3) arrays")
    grid = _default_grid(params, grid)
    total = 0.0
    for c in range(3):
        total += params.lam[c] * loss_fn(
            x[:, :, c], xp[:, :, c], params, grid, channel=c
        )
    return total


def color_forward(x, xp, params: WatsonParams, grid: BlockGrid,
                  basis=None):
    """Color distance returning per-channel caches for gradient work."""
    caches = []
    total = 0.0
    for c in range(3):
        value, cache = channel_forward(
            x[:, :, c], xp[:, :, c], params, grid, channel=c, basis=basis
        )
        caches.append(cache)
        total += params.lam[c] * value
    return total, caches


def watson_distance(x, xp, params: WatsonParams,
                    grid: BlockGrid | None = None) -> float:
    """Dispatch on channel mode: 2D arrays for grey, (H, W, 3) YCbCr for color."""
    grid = _default_grid(params, grid)
    x = np.asarray(x, dtype=np.float64)
    xp = np.asarray(xp, dtype=np.float64)
    if params.channels == "grey":
        if x.ndim == 3:
            x = x[:, :, 0]
        if xp.ndim == 3:
            xp = xp[:, :, 0]
        value, _ = channel_forward(x, xp, params, grid)
        return value
    total, _ = color_forward(x, xp, params, grid)
    return total


# ---------------------------------------------------------------------------
# serialization


def params_to_json(params: WatsonParams) -> dict:
    doc = {
        "variant": params.variant,
        "channels": params.channels,
        "p": params.p,
        "alpha": params.alpha,
        "r": params.r,
        "epsilon": params.epsilon,
        "T": [t.tolist() for t in params.tables],
        "gamma": params.gamma,
    }
    if params.variant == "dft":
        doc["w"] = [w.tolist() for w in params.phase_weights]
    if params.channels == "ycbcr":
        doc["lambda"] = params.lam.tolist()
    return doc


def params_from_json(doc: dict) -> WatsonParams:
    try:
        variant = doc["variant"]
        channels = doc["channels"]
        tables = np.asarray(doc["T"], dtype=np.float64)
        weights = (
            np.asarray(doc["w"], dtype=np.float64) if "w" in doc else None
        )
        lam = (
            np.asarray(doc["lambda"], dtype=np.float64)
            if "lambda" in doc
            else None
        )
        return WatsonParams(
            variant=variant,
            channels=channels,
            tables=tables,
            alpha=float(doc["alpha"]),
            r=float(doc["r"]),
            p=float(doc["p"]),
            epsilon=float(doc["epsilon"]),
            phase_weights=weights,
            lam=lam,
            gamma=float(doc["gamma"]),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed parameter document: {exc}")


def save_params(params: WatsonParams, path: str | Path) -> None:
    Path(path).write_text(json.dumps(params_to_json(params), indent=2) + "\n")


def load_params(path: str | Path) -> WatsonParams:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError("parameter file not found", str(path))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}", str(path))
    params = params_from_json(doc)
    return params
