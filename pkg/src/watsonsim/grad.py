"""Exact reverse-mode gradients for every distance in the package.

The metric's computation graph is fixed, so instead of a runtime tape each
stage has a hand-written adjoint consuming the caches produced by the
forward passes in :mod:`watsonsim.watson` and :mod:`watsonsim.baselines`.
Values returned here reuse those forward code paths unchanged, so they
match the plain evaluations bit for bit.

Parameter gradients are reported in the unconstrained space used for
optimization: positive quantities via log, r via its logit, p via
log(p - 1). All work is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from watsonsim.baselines import SsimParams, lp_forward, ssim_forward
from watsonsim.errors import InputDomainError, NumericalError
from watsonsim.transforms import (
    AMP_FLOOR,
    BlockGrid,
    dct_matrix,
    dft_matrix,
    partition_adjoint,
    partition_blocks,
    self_conjugate_mask,
)
from watsonsim.watson import (
    EPS_ABS,
    EPS_DC,
    RATIO_FLOOR,
    WatsonParams,
    channel_forward,
    color_forward,
)


class LossId(Enum):
    WATSON_DCT = "watson-dct"
    WATSON_DFT = "watson-dft"
    SSIM = "ssim"
    LP = "lp"


class Wrt(Enum):
    PARAMS = "params"
    FIRST_INPUT = "first-input"
    SECOND_INPUT = "second-input"


@dataclass(frozen=True)
class GradientRequest:
    loss_id: LossId
    wrt: Wrt
    offset: tuple[int, int] = (0, 0)
    lp_p: float = 2.0
    ssim: SsimParams | None = None


@dataclass
class GradientResult:
    value: float
    gradient: np.ndarray  # flat free vector for PARAMS, image-shaped otherwise


# ---------------------------------------------------------------------------
# unconstrained reparameterization


def _logit(x: float) -> float:
    return float(np.log(x / (1.0 - x)))


def to_unconstrained(params: WatsonParams) -> np.ndarray:
    """Flatten every trainable quantity into one free vector.

    Layout: log T per channel, alpha, logit(r), log(p - 1),
    then log w per channel (dft), log lambda (ycbcr), log gamma.
    """
    parts = [np.log(params.tables).ravel(),
             [params.alpha, _logit(params.r), np.log(params.p - 1.0)]]
    if params.variant == "dft":
        parts.append(np.log(params.phase_weights).ravel())
    if params.channels == "ycbcr":
        parts.append(np.log(params.lam))
    parts.append([np.log(params.gamma)])
    return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts])


def from_unconstrained(vec: np.ndarray, template: WatsonParams) -> WatsonParams:
    """Rebuild constrained parameters; inverse of :func:`to_unconstrained`."""
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (n_free(template),):
        raise InputDomainError(
            f"free vector has {vec.shape}, expected ({n_free(template)},)"
        )
    # overflow to inf is fine here; validation rejects it with a clear error
    with np.errstate(over="ignore"):
        return _decode_free(vec, template)


def _decode_free(vec: np.ndarray, template: WatsonParams) -> WatsonParams:
    nch = template.n_channels
    tsz = int(np.prod(template.table_shape()))
    pos = 0
    tables = np.exp(vec[pos : pos + nch * tsz]).reshape((nch,) + template.table_shape())
    pos += nch * tsz
    alpha = float(vec[pos])
    r = float(1.0 / (1.0 + np.exp(-vec[pos + 1])))
    p = float(1.0 + np.exp(vec[pos + 2]))
    pos += 3
    weights = None
    if template.variant == "dft":
        weights = np.exp(vec[pos : pos + nch * tsz]).reshape(tables.shape)
        pos += nch * tsz
    lam = None
    if template.channels == "ycbcr":
        lam = np.exp(vec[pos : pos + 3])
        pos += 3
    gamma = float(np.exp(vec[pos]))
    return WatsonParams(
        variant=template.variant, channels=template.channels, tables=tables,
        alpha=alpha, r=r, p=p, epsilon=template.epsilon,
        phase_weights=weights, lam=lam, gamma=gamma,
    )


def n_free(params: WatsonParams) -> int:
    nch = params.n_channels
    tsz = int(np.prod(params.table_shape()))
    n = nch * tsz + 3
    if params.variant == "dft":
        n += nch * tsz
    if params.channels == "ycbcr":
        n += 3
    return n + 1  # gamma


def free_labels(params: WatsonParams) -> list[str]:
    """Human-readable name per free-vector coordinate."""
    from watsonsim.watson import CHANNEL_NAMES

    names = CHANNEL_NAMES[params.channels]
    rows, cols = params.table_shape()
    labels = [
        f"T[{ch}][{i},{j}]"
        for ch in names
        for i in range(rows)
        for j in range(cols)
    ]
    labels += ["alpha", "r", "p"]
    if params.variant == "dft":
        labels += [
            f"w[{ch}][{i},{j}]"
            for ch in names
            for i in range(rows)
            for j in range(cols)
        ]
    if params.channels == "ycbcr":
        labels += ["lambda[y]", "lambda[cb]", "lambda[cr]"]
    labels.append("gamma")
    return labels


def _free_gradient(params: WatsonParams, d_tables, d_alpha, d_r, d_p,
                   d_weights=None, d_lam=None, d_gamma=0.0) -> np.ndarray:
    """Chain constrained-space gradients through the reparameterization."""
    parts = [(d_tables * params.tables).ravel(),
             [d_alpha,
              d_r * params.r * (1.0 - params.r),
              d_p * (params.p - 1.0)]]
    if params.variant == "dft":
        parts.append((d_weights * params.phase_weights).ravel())
    if params.channels == "ycbcr":
        parts.append(d_lam * params.lam)
    parts.append([d_gamma * params.gamma])
    return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts])


# ---------------------------------------------------------------------------
# watson channel adjoint


def _amplitude_backward(cache, d_amp):
    """Adjoint of the masked p-norm stage. Returns cotangents for the
    per-bin coefficients of both inputs plus the scalar parameters."""
    p = cache["p"]
    z, u, s = cache["z"], cache["u"], cache["s"]
    tl, sa, sb = cache["tl"], cache["sa"], cache["sb"]
    b_arg, raw = cache["b_arg"], cache["raw"]
    ratio, ratio_raw = cache["ratio"], cache["ratio_raw"]
    dc, mean_dc = cache["dc"], cache["mean_dc"]
    delta = cache["delta"]
    mask = cache["mask"]
    alpha, r = cache["alpha"], cache["r"]
    amp_part = cache["amp_part"]

    du = d_amp * amp_part / (p * u)
    zm = z if mask is None else z * mask
    with np.errstate(divide="ignore", invalid="ignore"):
        zlog = np.where(zm > 0.0, zm ** p * np.log(np.where(zm > 0, zm, 1.0)), 0.0)
    d_p = d_amp * amp_part * (-np.log(u) / p ** 2) + du * float(zlog.sum())

    dz = du * p * zm ** (p - 1.0)
    if mask is not None:
        dz = dz * mask
    ddelta = dz * np.sign(delta) / s
    ds = -dz * z / s

    da = ds * sa * (1.0 + (tl - b_arg) * sb)
    db = ds * sb * (1.0 + (b_arg - tl) * sa)
    draw = db * r * b_arg / (raw + EPS_ABS)
    dtl = da + db * (1.0 - r) * b_arg / tl
    d_r = float((db * b_arg * (np.log(raw + EPS_ABS) - np.log(tl))).sum())

    scale = ratio[:, None, None] ** alpha
    d_table = (dtl * scale).sum(axis=0)
    dratio = alpha * (dtl * tl).sum(axis=(1, 2)) / ratio
    d_alpha = float((dtl * tl * np.log(ratio)[:, None, None]).sum())

    dratio_raw = np.where(ratio_raw > RATIO_FLOOR, dratio, 0.0)
    ddc = dratio_raw / (mean_dc + EPS_DC)
    dmean = -float((dratio_raw * (dc + EPS_DC)).sum()) / (mean_dc + EPS_DC) ** 2
    ddc = ddc + dmean / dc.shape[0]

    return ddelta, draw, ddc, d_table, d_alpha, d_r, d_p


def _dct_channel_backward(cache, d_value):
    ddelta, draw, ddc, d_table, d_alpha, d_r, d_p = _amplitude_backward(
        cache, d_value
    )
    coeffs = cache["coeffs"]
    d_coeffs = ddelta + draw * np.sign(coeffs)
    d_coeffs[:, 0, 0] += ddc
    d_coeffs_p = -ddelta
    basis = dct_matrix(cache["grid"].block_size)
    dx_blocks = basis.T @ d_coeffs @ basis
    dxp_blocks = basis.T @ d_coeffs_p @ basis
    dx = partition_adjoint(dx_blocks, cache["grid"], cache["shape"])
    dxp = partition_adjoint(dxp_blocks, cache["grid"], cache["shape"])
    return {"dx": dx, "dxp": dxp, "d_table": d_table, "d_weights": None,
            "d_alpha": d_alpha, "d_r": d_r, "d_p": d_p}


def _spectrum_adjoint(spec, amp, d_amp, d_phase, grid):
    """Turn amplitude/phase cotangents on the half spectrum into pixel-block
    cotangents. Bins below the amplitude floor get zero (their phase is
    pinned and |.| has no gradient at 0)."""
    b = grid.block_size
    live = amp >= AMP_FLOOR
    safe = np.where(live, amp, 1.0)
    g_re = np.where(live, d_amp * spec.real / safe, 0.0)
    g_im = np.where(live, d_amp * spec.imag / safe, 0.0)
    if d_phase is not None:
        g_re += np.where(live, -d_phase * spec.imag / safe ** 2, 0.0)
        g_im += np.where(live, d_phase * spec.real / safe ** 2, 0.0)
    g_full = np.zeros(spec.shape[:-1] + (b,), dtype=np.complex128)
    g_full[..., : b // 2 + 1] = g_re + 1j * g_im
    e = dft_matrix(b)
    return (e.conj().T @ g_full @ e.conj()).real


PHASE_KINK_TOL = 1e-12


def _dft_channel_backward(cache, d_value):
    ddelta, draw, ddc, d_table, d_alpha, d_r, d_p = _amplitude_backward(
        cache, d_value
    )
    grid = cache["grid"]
    weights = cache["weights"]
    pm = cache["phase_bins"]
    dphi = cache["dphi"]

    # |wrapped difference| has kinks at 0 and +-pi; both get subgradient 0
    wsign = np.sign(dphi)
    wsign[np.abs(np.abs(dphi) - np.pi) <= PHASE_KINK_TOL] = 0.0
    d_weights = d_value * (np.abs(dphi) * pm[None]).sum(axis=0)
    d_phi = d_value * weights[None] * wsign * pm[None]

    d_amp = ddelta + draw
    d_amp[:, 0, 0] += ddc
    d_amp_p = -ddelta

    dx_blocks = _spectrum_adjoint(cache["spec"], cache["amp"], d_amp, d_phi, grid)
    dxp_blocks = _spectrum_adjoint(
        cache["spec_p"], cache["amp_p"], d_amp_p, -d_phi, grid
    )
    dx = partition_adjoint(dx_blocks, grid, cache["shape"])
    dxp = partition_adjoint(dxp_blocks, grid, cache["shape"])
    return {"dx": dx, "dxp": dxp, "d_table": d_table, "d_weights": d_weights,
            "d_alpha": d_alpha, "d_r": d_r, "d_p": d_p}


def channel_backward(cache, d_value=1.0):
    if cache["variant"] == "dct":
        return _dct_channel_backward(cache, d_value)
    return _dft_channel_backward(cache, d_value)


def watson_pair_gradients(caches, params: WatsonParams, d_value=1.0):
    """Adjoint of one grey or color watson evaluation.

    caches: a single channel cache (grey) or the list from color_forward.
    Returns (dx, dxp, free_param_gradient). The head slope gamma does not
    enter the distance, so its slot is zero.
    """
    if isinstance(caches, dict):
        out = channel_backward(caches, d_value)
        free = _free_gradient(
            params, out["d_table"][None], out["d_alpha"], out["d_r"], out["d_p"],
            None if out["d_weights"] is None else out["d_weights"][None],
        )
        return out["dx"], out["dxp"], free

    d_tables = np.zeros_like(params.tables)
    d_weights = (
        np.zeros_like(params.phase_weights) if params.variant == "dft" else None
    )
    d_lam = np.zeros(3)
    d_alpha = d_r = d_p = 0.0
    h, w = caches[0]["shape"]
    dx = np.zeros((h, w, 3))
    dxp = np.zeros((h, w, 3))
    for c, cache in enumerate(caches):
        lam_c = float(params.lam[c])
        out = channel_backward(cache, d_value * lam_c)
        dx[:, :, c] = out["dx"]
        dxp[:, :, c] = out["dxp"]
        d_tables[c] = out["d_table"]
        if d_weights is not None:
            d_weights[c] = out["d_weights"]
        d_alpha += out["d_alpha"]
        d_r += out["d_r"]
        d_p += out["d_p"]
        d_lam[c] = d_value * cache["value"]
    free = _free_gradient(params, d_tables, d_alpha, d_r, d_p, d_weights, d_lam)
    return dx, dxp, free


# ---------------------------------------------------------------------------
# ssim / lp adjoints


def _scatter(window_map: np.ndarray, g: np.ndarray) -> np.ndarray:
    from numpy.lib.stride_tricks import sliding_window_view

    s = g.shape[0]
    padded = np.pad(window_map, ((s - 1, s - 1), (s - 1, s - 1)))
    win = sliding_window_view(padded, (s, s))
    return np.tensordot(win, g[::-1, ::-1], axes=([2, 3], [0, 1]))


def ssim_backward(cache, d_value=1.0):
    g = cache["g"]
    xc, yc = cache["x"], cache["y"]
    nch = xc.shape[2]
    dx = np.zeros_like(xc)
    dy = np.zeros_like(yc)
    for c, ch in enumerate(cache["channels"]):
        u1, u2 = ch["u1"], ch["u2"]
        n1, n2, d1, d2 = ch["n1"], ch["n2"], ch["d1"], ch["d2"]
        smap = ch["smap"]
        ds = np.full_like(smap, -d_value / (smap.size * nch))
        dn1 = ds * n2 / (d1 * d2)
        dn2 = ds * n1 / (d1 * d2)
        dd1 = -ds * smap / d1
        dd2 = -ds * smap / d2
        dcv = 2.0 * dn2
        dv1 = dd2
        dv2 = dd2
        du1 = 2.0 * u2 * dn1 + 2.0 * u1 * dd1 - 2.0 * u1 * dv1 - u2 * dcv
        du2 = 2.0 * u1 * dn1 + 2.0 * u2 * dd1 - 2.0 * u2 * dv2 - u1 * dcv
        xa = xc[:, :, c]
        ya = yc[:, :, c]
        dq = _scatter(dcv, g)
        dx[:, :, c] = _scatter(du1, g) + 2.0 * xa * _scatter(dv1, g) + ya * dq
        dy[:, :, c] = _scatter(du2, g) + 2.0 * ya * _scatter(dv2, g) + xa * dq
    return dx, dy


def lp_backward(cache, d_value=1.0):
    delta, p, value = cache["delta"], cache["p"], cache["value"]
    if value == 0.0:
        return np.zeros_like(delta), np.zeros_like(delta)
    dd = d_value * value ** (1.0 - p) * np.abs(delta) ** (p - 1.0) * np.sign(delta)
    return dd, -dd


# ---------------------------------------------------------------------------
# entry point


def _check_nodes(caches):
    stages = ("tl", "s", "z", "u")
    for cache in caches if isinstance(caches, list) else [caches]:
        for name in stages:
            if not np.all(np.isfinite(cache[name])):
                raise NumericalError(f"non-finite intermediate at node {name!r}")


def _watson_forward(request, x, xp, params):
    grid = BlockGrid(params.block_size, request.offset)
    if params.channels == "grey":
        x2 = x[:, :, 0] if x.ndim == 3 else x
        xp2 = xp[:, :, 0] if xp.ndim == 3 else xp
        value, cache = channel_forward(x2, xp2, params, grid)
        return value, cache
    if x.ndim != 3 or x.shape[2] != 3:
        raise InputDomainError("color parameters need (H, W, 3) YCbCr inputs")
    return color_forward(x, xp, params, grid)


def value_and_grad(request: GradientRequest, x, xp,
                   params: WatsonParams | None = None) -> GradientResult:
    """Evaluate one distance and its exact gradient for the requested target."""
    x = np.asarray(x, dtype=np.float64)
    xp = np.asarray(xp, dtype=np.float64)
    if request.loss_id in (LossId.WATSON_DCT, LossId.WATSON_DFT):
        if params is None:
            raise InputDomainError("watson losses need parameters")
        want = "dct" if request.loss_id is LossId.WATSON_DCT else "dft"
        if params.variant != want:
            raise InputDomainError(
                f"params are for variant {params.variant!r}, loss needs {want!r}"
            )
        value, caches = _watson_forward(request, x, xp, params)
        _check_nodes(caches)
        dx, dxp, free = watson_pair_gradients(caches, params)
        grad = {Wrt.PARAMS: free, Wrt.FIRST_INPUT: dx, Wrt.SECOND_INPUT: dxp}[
            request.wrt
        ]
    elif request.loss_id is LossId.SSIM:
        value, cache = ssim_forward(x, xp, request.ssim)
        if request.wrt is Wrt.PARAMS:
            grad = np.zeros(0)
        else:
            dx, dxp = ssim_backward(cache)
            grad = dx if request.wrt is Wrt.FIRST_INPUT else dxp
            if x.ndim == 2:
                grad = grad[:, :, 0]
    elif request.loss_id is LossId.LP:
        value, cache = lp_forward(x, xp, request.lp_p)
        if request.wrt is Wrt.PARAMS:
            grad = np.zeros(0)
        else:
            dx, dxp = lp_backward(cache)
            grad = dx if request.wrt is Wrt.FIRST_INPUT else dxp
    else:
        raise InputDomainError(f"unknown loss {request.loss_id!r}")
    grad = np.asarray(grad, dtype=np.float64)
    if not np.isfinite(value):
        raise NumericalError("non-finite loss value")
    if not np.all(np.isfinite(grad)):
        raise NumericalError("non-finite gradient")
    return GradientResult(value=float(value), gradient=grad)


# ---------------------------------------------------------------------------
# finite-difference verification


@dataclass
class FdReport:
    loss_id: LossId
    wrt: Wrt
    max_rel_err: float
    worst_coordinate: str
    n_checked: int
    n_excluded: int


def _loss_value(request, x, xp, params):
    return value_and_grad(request, x, xp, params).value


FD_STEP = 1e-5
PHASE_EXCLUDE_TOL = 1e-4
COEFF_EXCLUDE_TOL = 1e-4
AMP_EXCLUDE_TOL = 1e-6
# for p < 2 the curvature of |d|^p blows up as d -> 0 and central
# differences at step 1e-5 lose accuracy well before the kink itself
LP_CURVATURE_TOL = 1e-3
# probing a loss of magnitude |f| resolves derivatives no finer than about
# eps * |f| / step; coordinates whose gradients sit this many ulp-units
# below that scale cannot be certified by the difference quotient at all
FD_NOISE_FLOOR_ULPS = 1e5


def _excluded_pixels(request, x, xp, params) -> np.ndarray:
    """Pixels whose loss contribution sits at a registered subgradient point.

    Central differences straddle the kink there, so those coordinates are
    reported separately instead of entering the error maximum.
    """
    shape = x.shape[:2]
    flat_excl = np.zeros(int(np.prod(x.shape)), dtype=bool)
    if request.loss_id is LossId.LP:
        if request.lp_p < 2.0:
            flat_excl = (np.abs(x - xp) < LP_CURVATURE_TOL).ravel()
        return flat_excl
    if request.loss_id is LossId.SSIM:
        return flat_excl
    grid = BlockGrid(params.block_size, request.offset)
    idx = np.arange(int(np.prod(shape)), dtype=np.float64).reshape(shape)
    block_pixels = partition_blocks(idx, grid).astype(np.int64)
    channels = range(x.shape[2]) if x.ndim == 3 else [None]
    for ci, c in enumerate(channels):
        xc = x if c is None else x[:, :, c]
        xpc = xp if c is None else xp[:, :, c]
        _, cache = channel_forward(xc, xpc, params, grid, channel=0 if c is None else ci)
        if params.variant == "dct":
            bad_bins = np.abs(cache["coeffs"]) < COEFF_EXCLUDE_TOL
            bad_bins |= np.abs(cache["coeffs_p"]) < COEFF_EXCLUDE_TOL
        else:
            sc = self_conjugate_mask(params.block_size)[None]
            adphi = np.abs(cache["dphi"])
            bad_bins = (~sc) & cache["mask"][None] & (
                (adphi < PHASE_EXCLUDE_TOL)
                | (adphi > np.pi - PHASE_EXCLUDE_TOL)
            )
            bad_bins |= cache["amp"] < AMP_EXCLUDE_TOL
            bad_bins |= cache["amp_p"] < AMP_EXCLUDE_TOL
        bad_blocks = bad_bins.any(axis=(1, 2))
        if bad_blocks.any():
            pix = np.unique(block_pixels[bad_blocks])
            if c is None:
                flat_excl[pix] = True
            else:
                ys, xs = np.unravel_index(pix, shape)
                flat_excl[(ys * shape[1] + xs) * x.shape[2] + c] = True
    return flat_excl


def finite_diff_check(request: GradientRequest, x, xp,
                      params: WatsonParams | None = None,
                      step: float = FD_STEP, max_coords: int = 512) -> FdReport:
    """Compare the exact gradient against central differences.

    Relative error uses |analytic| + |numeric| + 1e-12 as denominator. At
    most max_coords coordinates are checked, chosen by even striding, so
    the report is deterministic. Coordinates at registered subgradient
    points, and coordinates whose gradient sits below the difference
    quotient's own rounding resolution, are skipped and counted in
    n_excluded rather than entering the error maximum.
    """
    x = np.asarray(x, dtype=np.float64)
    xp = np.asarray(xp, dtype=np.float64)
    result = value_and_grad(request, x, xp, params)
    grad = result.gradient.ravel()
    noise_floor = (FD_NOISE_FLOOR_ULPS * np.finfo(np.float64).eps
                   * max(1.0, abs(result.value)) / step)

    if request.wrt is Wrt.PARAMS:
        if request.loss_id in (LossId.SSIM, LossId.LP):
            return FdReport(request.loss_id, request.wrt, 0.0,
                            "(no trainable parameters)", 0, 0)
        base = to_unconstrained(params)
        labels = free_labels(params)
        # gamma never enters the distance; checked in the head tests instead
        excluded = np.zeros(base.size, dtype=bool)
        excluded[-1] = True

        def probe(i, h):
            v = base.copy()
            v[i] += h
            return _loss_value(request, x, xp, from_unconstrained(v, params))

        n = base.size
    else:
        target = x if request.wrt is Wrt.FIRST_INPUT else xp
        excluded = _excluded_pixels(request, x, xp, params) if request.loss_id in (
            LossId.WATSON_DCT, LossId.WATSON_DFT, LossId.LP,
        ) else np.zeros(target.size, dtype=bool)
        labels = None

        def probe(i, h):
            t = target.copy()
            t.ravel()[i] += h
            if request.wrt is Wrt.FIRST_INPUT:
                return _loss_value(request, t, xp, params)
            return _loss_value(request, x, t, params)

        n = target.size

    if n == 0:
        return FdReport(request.loss_id, request.wrt, 0.0, "(empty target)", 0, 0)
    if n <= max_coords:
        coords = np.arange(n)
    else:
        coords = np.unique(np.round(np.linspace(0, n - 1, max_coords)).astype(int))

    max_err = 0.0
    worst = "(none)"
    checked = 0
    skipped = 0
    for i in coords:
        if excluded[i]:
            skipped += 1
            continue
        numeric = (probe(i, step) - probe(i, -step)) / (2.0 * step)
        analytic = grad[i]
        if abs(analytic) + abs(numeric) < noise_floor:
            skipped += 1
            continue
        err = abs(analytic - numeric) / (abs(analytic) + abs(numeric) + 1e-12)
        checked += 1
        if err > max_err:
            max_err = err
            worst = labels[i] if labels is not None else f"flat[{i}]"
    return FdReport(request.loss_id, request.wrt, float(max_err), worst,
                    checked, skipped)


def run_gradient_checks(seed: int = 0, max_coords: int = 512,
                        step: float = FD_STEP) -> list[FdReport]:
    """Deterministic finite-difference battery over the whole surface.

    Covers every loss, every gradient target, both channel modes, offset
    grids, and one image size that forces edge padding.
    """
    from watsonsim.watson import default_params

    rng = np.random.default_rng(seed)

    def img(shape):
        return rng.uniform(0.0, 1.0, shape)

    g16 = (img((16, 16)), img((16, 16)))
    godd = (img((20, 14)), img((20, 14)))
    c16 = (img((16, 16, 3)), img((16, 16, 3)))

    dct_g = default_params("dct", "grey")
    dct_c = default_params("dct", "ycbcr")
    dft_g = default_params("dft", "grey")
    dft_c = default_params("dft", "ycbcr")

    cases = [
        (GradientRequest(LossId.WATSON_DCT, Wrt.PARAMS), g16, dct_g),
        (GradientRequest(LossId.WATSON_DCT, Wrt.FIRST_INPUT, offset=(2, -3)),
         godd, dct_g),
        (GradientRequest(LossId.WATSON_DCT, Wrt.SECOND_INPUT, offset=(1, 4)),
         g16, dct_g),
        (GradientRequest(LossId.WATSON_DCT, Wrt.PARAMS), c16, dct_c),
        (GradientRequest(LossId.WATSON_DCT, Wrt.FIRST_INPUT), c16, dct_c),
        (GradientRequest(LossId.WATSON_DCT, Wrt.SECOND_INPUT), c16, dct_c),
        (GradientRequest(LossId.WATSON_DFT, Wrt.PARAMS), g16, dft_g),
        (GradientRequest(LossId.WATSON_DFT, Wrt.FIRST_INPUT, offset=(-2, 3)),
         godd, dft_g),
        (GradientRequest(LossId.WATSON_DFT, Wrt.SECOND_INPUT), g16, dft_g),
        (GradientRequest(LossId.WATSON_DFT, Wrt.PARAMS), c16, dft_c),
        (GradientRequest(LossId.WATSON_DFT, Wrt.FIRST_INPUT), c16, dft_c),
        (GradientRequest(LossId.WATSON_DFT, Wrt.SECOND_INPUT, offset=(3, -1)),
         c16, dft_c),
        (GradientRequest(LossId.SSIM, Wrt.FIRST_INPUT), g16, None),
        (GradientRequest(LossId.SSIM, Wrt.SECOND_INPUT), c16, None),
        (GradientRequest(LossId.LP, Wrt.FIRST_INPUT, lp_p=2.0), c16, None),
        (GradientRequest(LossId.LP, Wrt.SECOND_INPUT, lp_p=1.5), godd, None),
    ]
    return [
        finite_diff_check(req, x, xp, params, step=step, max_coords=max_coords)
        for req, (x, xp), params in cases
    ]
