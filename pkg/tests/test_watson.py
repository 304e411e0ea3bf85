import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    naive_dct2,
    naive_half_spectrum,
    phase_sum_oracle,
    smooth_max_scalar,
    watson_channel_oracle,
)
from watsonsim.errors import InputDomainError, ValidationError
from watsonsim.transforms import BlockGrid, hermitian_valid_mask
from watsonsim.watson import (
    WatsonParams,
    color_aggregate,
    contrast_mask,
    default_params,
    default_sensitivity_table,
    load_params,
    luminance_mask,
    params_from_json,
    params_to_json,
    phase_distance,
    save_params,
    smooth_max,
    watson_dct_distance,
    watson_dft_distance,
    watson_dft_parts,
    watson_distance,
    wrap_phase,
)

GRID = BlockGrid(8, (0, 0))


def grey_pair(seed, shape=(16, 16)):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 1, shape), rng.uniform(0, 1, shape)


# ---------------------------------------------------------------------------
# masking primitives


def test_smooth_max_of_equal_args_is_identity():
    a = np.array([0.3, 1.0, 7.5])
    assert np.allclose(smooth_max(a, a), a, atol=0)


def test_smooth_max_one_two():
    expected = smooth_max_scalar([1.0, 2.0])
    assert expected == pytest.approx((np.e + 2 * np.e ** 2) / (np.e + np.e ** 2))
    assert smooth_max(1.0, 2.0) == pytest.approx(expected, abs=1e-12)


def test_smooth_max_dominant_arg():
    assert smooth_max(0.0, 50.0) == pytest.approx(50.0, abs=1e-12)


def test_smooth_max_no_overflow_for_huge_args():
    out = smooth_max(1e4, 2e4)
    assert np.isfinite(out) and out == pytest.approx(2e4)


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50))
def test_smooth_max_symmetric_and_bounded(a, b):
    s = float(smooth_max(a, b))
    assert s == pytest.approx(float(smooth_max(b, a)), abs=1e-12)
    assert min(a, b) - 1e-12 <= s <= max(a, b) + 1e-12


def test_luminance_mask_brightness_scaling():
    table = np.full((8, 8), 0.5)
    # block 0 twice the mean d.c.: thresholds rise by 2^alpha
    dc = np.array([4.0, 1.0, 1.0, 2.0])  # mean = 2
    tl = luminance_mask(table, dc, alpha=0.649)
    assert tl[0, 3, 3] / table[3, 3] == pytest.approx(2.0 ** 0.649, rel=1e-9)
    assert np.all(tl > 0)


def test_luminance_mask_black_image_keeps_positive_thresholds():
    table = default_sensitivity_table("dct")
    tl = luminance_mask(table, np.zeros(4), alpha=0.649)
    assert np.allclose(tl, table[None])  # ratio collapses to 1


def test_contrast_mask_flat_when_r_zero_is_limit():
    # r -> 0 turns the energy arm into t_l itself
    tl = np.full((1, 8, 8), 0.7)
    coeffs = np.zeros((1, 8, 8))
    s = contrast_mask(tl, coeffs, r=1e-12)
    assert np.allclose(s, 0.7, atol=1e-6)


def test_contrast_mask_large_coefficient_raises_threshold():
    tl = np.ones((1, 1, 1))
    coeffs = np.full((1, 1, 1), 16.0)
    expected = smooth_max_scalar([1.0, (16.0 + 1e-12) ** 0.7])
    got = contrast_mask(tl, coeffs, r=0.7)[0, 0, 0]
    assert got == pytest.approx(expected, rel=1e-12)
    assert got == pytest.approx(6.9491, abs=5e-4)


def test_contrast_mask_strictly_positive_on_zeros():
    tl = np.full((2, 8, 8), 0.3)
    s = contrast_mask(tl, np.zeros((2, 8, 8)), r=0.7)
    assert np.all(s > 0)


def test_wrap_phase_range_and_examples():
    assert wrap_phase(3 * np.pi / 2) == pytest.approx(-np.pi / 2, abs=1e-12)
    assert wrap_phase(np.pi) == pytest.approx(np.pi, abs=1e-12)
    assert wrap_phase(-np.pi) == pytest.approx(np.pi, abs=1e-12)
    assert wrap_phase(0.0) == 0.0
    vals = wrap_phase(np.linspace(-10, 10, 999))
    assert np.all(vals > -np.pi - 1e-12) and np.all(vals <= np.pi + 1e-12)
    assert np.allclose(np.abs(vals), np.arccos(np.cos(np.linspace(-10, 10, 999))),
                       atol=1e-9)


# ---------------------------------------------------------------------------
# distances against literal composition oracles


def test_dct_distance_matches_composition_oracle_single_block():
    rng = np.random.default_rng(42)
    params = default_params("dct", "grey")
    for _ in range(5):
        x = rng.uniform(0, 1, (8, 8))
        xp = rng.uniform(0, 1, (8, 8))
        got = watson_dct_distance(x, xp, params, GRID)
        want = watson_channel_oracle(
            naive_dct2(x)[None], naive_dct2(xp)[None], params.tables[0],
            params.alpha, params.r, params.p, params.epsilon,
        )
        assert got == pytest.approx(want, rel=1e-10)


def test_dct_distance_matches_oracle_multi_block_with_offset():
    rng = np.random.default_rng(43)
    params = default_params("dct", "grey")
    x = rng.uniform(0, 1, (16, 16))
    xp = rng.uniform(0, 1, (16, 16))
    grid = BlockGrid(8, (2, -3))
    got = watson_dct_distance(x, xp, params, grid)
    from watsonsim.transforms import partition_blocks

    cx = np.stack([naive_dct2(b) for b in partition_blocks(x, grid)])
    cxp = np.stack([naive_dct2(b) for b in partition_blocks(xp, grid)])
    want = watson_channel_oracle(
        cx, cxp, params.tables[0], params.alpha, params.r, params.p,
        params.epsilon,
    )
    assert got == pytest.approx(want, rel=1e-10)


def test_dft_distance_matches_composition_oracle():
    rng = np.random.default_rng(44)
    params = default_params("dft", "grey")
    mask = hermitian_valid_mask(8)
    x = rng.uniform(0, 1, (8, 8))
    xp = rng.uniform(0, 1, (8, 8))
    ax, px_ = naive_half_spectrum(x)
    axp, pxp = naive_half_spectrum(xp)
    want_amp = watson_channel_oracle(
        ax[None], axp[None], params.tables[0], params.alpha, params.r,
        params.p, params.epsilon, mask=mask,
    )
    want_phase = phase_sum_oracle(
        px_[None], pxp[None], params.phase_weights[0], mask
    )
    amp, phase = watson_dft_parts(x, xp, params, GRID)
    assert amp == pytest.approx(want_amp, rel=1e-10)
    assert phase == pytest.approx(want_phase, rel=1e-9)
    assert watson_dft_distance(x, xp, params, GRID) == pytest.approx(
        want_amp + want_phase, rel=1e-10
    )


def test_phase_distance_excludes_dc():
    mask = hermitian_valid_mask(8)
    weights = np.ones((8, 5))
    phase = np.zeros((1, 8, 5))
    phase_p = np.zeros((1, 8, 5))
    phase[0, 0, 0] = np.pi  # only the d.c. bin differs
    assert phase_distance(phase, phase_p, weights, mask) == 0.0


def test_identity_distance_is_epsilon_root():
    params = default_params("dct", "grey")
    x, _ = grey_pair(1)
    assert watson_dct_distance(x, x, params, GRID) == pytest.approx(
        1e-10 ** 0.25, abs=0
    )
    paramsf = default_params("dft", "grey")
    assert watson_dft_distance(x, x, paramsf, GRID) == pytest.approx(
        1e-10 ** 0.25, abs=0
    )


def test_distance_exceeds_floor_for_different_images():
    params = default_params("dct", "grey")
    x, xp = grey_pair(2)
    d = watson_dct_distance(x, xp, params, GRID)
    assert d > 1e-10 ** 0.25


def test_masking_asymmetry():
    rng = np.random.default_rng(3)
    params = default_params("dct", "grey")
    # high-contrast reference vs flat image: masking depends on the first side
    x = (np.indices((16, 16)).sum(0) % 2).astype(float)
    xp = np.full((16, 16), 0.5)
    assert watson_dct_distance(x, xp, params, GRID) != pytest.approx(
        watson_dct_distance(xp, x, params, GRID), rel=1e-6
    )


def test_black_image_distance_is_finite():
    params = default_params("dct", "grey")
    black = np.zeros((16, 16))
    x = np.random.default_rng(4).uniform(0, 1, (16, 16))
    d = watson_dct_distance(black, x, params, GRID)
    assert np.isfinite(d) and d > 0
    paramsf = default_params("dft", "grey")
    assert np.isfinite(watson_dft_distance(black, x, paramsf, GRID))


def test_epsilon_monotonicity():
    params = default_params("dct", "grey")
    x, xp = grey_pair(5)
    bumped = params.copy()
    bumped.epsilon = 1e-6
    assert watson_dct_distance(x, xp, bumped, GRID) > watson_dct_distance(
        x, xp, params, GRID
    )


def test_pnorm_homogeneity_via_table_scaling():
    # with alpha = 0 and r ~ 0 the divisor is just T, so scaling T by 1/s
    # scales the distance by s (up to the epsilon floor)
    x, xp = grey_pair(6)
    base = default_params("dct", "grey")
    base.alpha = 0.0
    base.r = 1e-9
    scaled = base.copy()
    scaled.tables = base.tables / 3.0
    d1 = watson_dct_distance(x, xp, base, GRID)
    d3 = watson_dct_distance(x, xp, scaled, GRID)
    assert d3 == pytest.approx(3.0 * d1, rel=1e-6)


def test_deterministic_evaluation():
    params = default_params("dft", "grey")
    x, xp = grey_pair(7)
    a = watson_dft_distance(x, xp, params, GRID)
    b = watson_dft_distance(x, xp, params, GRID)
    assert a == b


def test_dft_translation_tolerance_vs_dct():
    rng = np.random.default_rng(8)
    params_dct = default_params("dct", "grey")
    params_dft = default_params("dft", "grey")
    x = rng.uniform(0, 1, (8, 8))
    shifted = np.roll(x, (0, 3), axis=(0, 1))
    amp_part, _ = watson_dft_parts(x, shifted, params_dft, GRID)
    # amplitudes are shift invariant: only the epsilon floor remains
    assert amp_part == pytest.approx(1e-10 ** 0.25, abs=1e-12)
    assert watson_dct_distance(x, shifted, params_dct, GRID) > 10 * amp_part


def test_color_aggregate_weighted_sum():
    params = default_params("dct", "ycbcr")
    params.lam = np.array([0.7, 0.2, 0.1])
    calls = []

    def fake_loss(x, xp, prm, grid, channel):
        calls.append(channel)
        return [2.0, 1.0, 3.0][channel]

    x = np.zeros((8, 8, 3))
    out = color_aggregate(fake_loss, x, x, params, GRID)
    assert out == pytest.approx(0.7 * 2.0 + 0.2 * 1.0 + 0.1 * 3.0, abs=1e-15)
    assert calls == [0, 1, 2]


def test_watson_distance_color_dispatch():
    rng = np.random.default_rng(9)
    params = default_params("dft", "ycbcr")
    x = rng.uniform(0, 1, (16, 16, 3))
    xp = rng.uniform(0, 1, (16, 16, 3))
    total = watson_distance(x, xp, params, GRID)
    by_hand = sum(
        params.lam[c] * watson_dft_distance(x[:, :, c], xp[:, :, c], params,
                                            GRID, channel=c)
        for c in range(3)
    )
    assert total == pytest.approx(by_hand, rel=1e-14)


def test_variant_mismatch_raises():
    params = default_params("dct", "grey")
    x, xp = grey_pair(10)
    with pytest.raises(InputDomainError):
        watson_dft_distance(x, xp, params, GRID)


def test_shape_mismatch_raises():
    params = default_params("dct", "grey")
    with pytest.raises(InputDomainError):
        watson_dct_distance(np.zeros((16, 16)), np.zeros((8, 8)), params, GRID)


# ---------------------------------------------------------------------------
# defaults and serialization


def test_default_table_dc_lowest_and_positive():
    for variant in ("dct", "dft"):
        t = default_sensitivity_table(variant)
        assert np.all(t > 0)
        assert np.all(t >= t[0, 0])


def test_default_table_monotone_along_axes():
    t = default_sensitivity_table("dct")
    assert np.all(np.diff(t, axis=0) >= 0)
    assert np.all(np.diff(t, axis=1) >= 0)


def test_params_json_round_trip(tmp_path):
    params = default_params("dft", "ycbcr")
    params.gamma = 2.5
    path = tmp_path / "p.json"
    save_params(params, path)
    loaded = load_params(path)
    assert loaded.variant == "dft" and loaded.channels == "ycbcr"
    assert np.array_equal(loaded.tables, params.tables)
    assert np.array_equal(loaded.phase_weights, params.phase_weights)
    assert np.array_equal(loaded.lam, params.lam)
    assert loaded.gamma == params.gamma
    assert loaded.p == params.p and loaded.epsilon == params.epsilon


def test_params_json_fields():
    doc = params_to_json(default_params("dct", "grey"))
    assert set(doc) == {"variant", "channels", "p", "alpha", "r", "epsilon",
                        "T", "gamma"}
    docf = params_to_json(default_params("dft", "ycbcr"))
    assert set(docf) == {"variant", "channels", "p", "alpha", "r", "epsilon",
                         "T", "w", "lambda", "gamma"}


def test_params_validation_rejects_bad_values():
    good = params_to_json(default_params("dct", "grey"))
    bad = json.loads(json.dumps(good))
    bad["T"][0][0][0] = -1.0
    with pytest.raises(ValidationError):
        params_from_json(bad)
    bad2 = json.loads(json.dumps(good))
    bad2["r"] = 1.5
    with pytest.raises(ValidationError):
        params_from_json(bad2)
    bad3 = json.loads(json.dumps(good))
    del bad3["gamma"]
    with pytest.raises(ValidationError):
        params_from_json(bad3)


def test_load_params_missing_and_corrupt(tmp_path):
    with pytest.raises(ValidationError):
        load_params(tmp_path / "none.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError):
        load_params(bad)
