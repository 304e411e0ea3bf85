import numpy as np
import pytest

from watsonsim.baselines import lp_distance, ssim_distance
from watsonsim.errors import NumericalError
from watsonsim.grad import (
    GradientRequest,
    LossId,
    Wrt,
    finite_diff_check,
    free_labels,
    from_unconstrained,
    n_free,
    run_gradient_checks,
    to_unconstrained,
    value_and_grad,
)
from watsonsim.transforms import BlockGrid
from watsonsim.watson import default_params, watson_distance


def images(seed, shape=(16, 16)):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 1, shape), rng.uniform(0, 1, shape)


# ---------------------------------------------------------------------------
# reparameterization


def test_free_vector_round_trip():
    params = default_params("dft", "ycbcr")
    params.alpha = 0.41
    params.r = 0.62
    params.p = 2.7
    params.gamma = 1.9
    params.tables = params.tables * 1.3
    back = from_unconstrained(to_unconstrained(params), params)
    assert np.allclose(back.tables, params.tables, rtol=1e-12)
    assert np.allclose(back.phase_weights, params.phase_weights, rtol=1e-12)
    assert np.allclose(back.lam, params.lam, rtol=1e-12)
    assert back.alpha == pytest.approx(params.alpha, abs=1e-14)
    assert back.r == pytest.approx(params.r, rel=1e-12)
    assert back.p == pytest.approx(params.p, rel=1e-12)
    assert back.gamma == pytest.approx(params.gamma, rel=1e-12)
    assert back.epsilon == params.epsilon


def test_free_vector_known_positions():
    params = default_params("dct", "grey")  # r=0.7, p=4, gamma=1
    vec = to_unconstrained(params)
    assert vec.shape == (64 + 3 + 1,)
    assert vec[64] == params.alpha
    assert vec[65] == pytest.approx(0.8472978603872036, abs=1e-12)  # logit 0.7
    assert vec[66] == pytest.approx(1.0986122886681098, abs=1e-12)  # log 3
    assert vec[67] == 0.0
    assert np.allclose(vec[:64], np.log(params.tables[0]).ravel())


def test_n_free_and_labels_agree():
    for variant in ("dct", "dft"):
        for channels in ("grey", "ycbcr"):
            params = default_params(variant, channels)
            labels = free_labels(params)
            assert len(labels) == n_free(params)
            assert labels[-1] == "gamma"
            table_slots = params.n_channels * int(np.prod(params.table_shape()))
            assert labels[table_slots] == "alpha"
    labels = free_labels(default_params("dft", "grey"))
    assert "w[grey][0,0]" in labels
    labels = free_labels(default_params("dct", "ycbcr"))
    assert "lambda[cb]" in labels and "T[cr][7,7]" in labels


def test_negative_free_coordinates_stay_feasible():
    params = default_params("dft", "ycbcr")
    vec = to_unconstrained(params) - 3.0
    rebuilt = from_unconstrained(vec, params)
    rebuilt.validate()
    assert 0.0 < rebuilt.r < 1.0 and rebuilt.p > 1.0


# ---------------------------------------------------------------------------
# values agree with the plain forwards


def test_watson_values_bitwise_equal_to_distance_calls():
    x, xp = images(21, (16, 16, 3))
    for variant, loss in (("dct", LossId.WATSON_DCT), ("dft", LossId.WATSON_DFT)):
        params = default_params(variant, "ycbcr")
        res = value_and_grad(GradientRequest(loss, Wrt.PARAMS), x, xp, params)
        assert res.value == watson_distance(x, xp, params)
        res_off = value_and_grad(
            GradientRequest(loss, Wrt.FIRST_INPUT, offset=(2, -3)), x, xp, params
        )
        grid = BlockGrid(8, (2, -3))
        assert res_off.value == watson_distance(x, xp, params, grid)


def test_baseline_values_match():
    x, xp = images(22)
    res = value_and_grad(GradientRequest(LossId.SSIM, Wrt.FIRST_INPUT), x, xp)
    assert res.value == ssim_distance(x, xp)
    res = value_and_grad(GradientRequest(LossId.LP, Wrt.FIRST_INPUT, lp_p=3.0),
                         x, xp)
    assert res.value == lp_distance(x, xp, 3.0)


def test_lp_p2_gradient_closed_form():
    x, xp = images(23)
    res = value_and_grad(GradientRequest(LossId.LP, Wrt.FIRST_INPUT), x, xp)
    delta = x - xp
    norm = float(np.linalg.norm(delta.ravel()))
    assert res.value == pytest.approx(norm, rel=1e-14)
    assert np.allclose(res.gradient, delta / norm, atol=1e-14)
    res2 = value_and_grad(GradientRequest(LossId.LP, Wrt.SECOND_INPUT), x, xp)
    assert np.allclose(res2.gradient, -delta / norm, atol=1e-14)


def test_gradient_shapes():
    x, xp = images(24, (16, 16, 3))
    params = default_params("dft", "ycbcr")
    res = value_and_grad(GradientRequest(LossId.WATSON_DFT, Wrt.PARAMS),
                         x, xp, params)
    assert res.gradient.shape == (n_free(params),)
    res = value_and_grad(GradientRequest(LossId.WATSON_DFT, Wrt.FIRST_INPUT),
                         x, xp, params)
    assert res.gradient.shape == x.shape
    g, gp = images(25)
    res = value_and_grad(GradientRequest(LossId.SSIM, Wrt.SECOND_INPUT), g, gp)
    assert res.gradient.shape == g.shape


def test_gamma_never_enters_the_distance():
    x, xp = images(26, (16, 16, 3))
    params = default_params("dct", "ycbcr")
    res = value_and_grad(GradientRequest(LossId.WATSON_DCT, Wrt.PARAMS),
                         x, xp, params)
    assert res.gradient[-1] == 0.0


def test_ssim_lp_have_no_trainable_parameters():
    x, xp = images(27)
    res = value_and_grad(GradientRequest(LossId.SSIM, Wrt.PARAMS), x, xp)
    assert res.gradient.size == 0
    res = value_and_grad(GradientRequest(LossId.LP, Wrt.PARAMS), x, xp)
    assert res.gradient.size == 0


def test_non_finite_input_raises():
    x, xp = images(28)
    x[3, 3] = np.nan
    params = default_params("dct", "grey")
    with pytest.raises(NumericalError):
        value_and_grad(GradientRequest(LossId.WATSON_DCT, Wrt.FIRST_INPUT),
                       x, xp, params)


# ---------------------------------------------------------------------------
# finite-difference verification of every adjoint


@pytest.fixture(scope="module")
def battery():
    return run_gradient_checks(seed=0, max_coords=512)


@pytest.mark.parametrize("case", range(16))
def test_fd_battery_case(battery, case):
    rep = battery[case]
    assert rep.n_checked > 0
    assert rep.max_rel_err < 1e-4, (
        f"{rep.loss_id.value} wrt {rep.wrt.value}: max rel err "
        f"{rep.max_rel_err:.3e} at {rep.worst_coordinate}"
    )


def test_fd_lp_p2_is_extra_tight():
    # smooth closed form: central differences are near exact once the step
    # is large enough to clear value-rounding noise
    x, xp = images(40, (16, 16, 3))
    rep = finite_diff_check(
        GradientRequest(LossId.LP, Wrt.FIRST_INPUT, lp_p=2.0), x, xp,
        step=1e-4,
    )
    assert rep.max_rel_err < 1e-6


def test_ssim_corner_gradient_is_real_just_tiny():
    # corner pixels carry ~1e-9 scale gradients that sit below what central
    # differences resolve at step 1e-5 (the checker's noise floor skips
    # them); a coarser step confirms the analytic value directly
    rng = np.random.default_rng(7)
    rng.uniform(0, 1, (16, 16)); rng.uniform(0, 1, (16, 16))
    rng.uniform(0, 1, (20, 14)); rng.uniform(0, 1, (20, 14))
    x = rng.uniform(0, 1, (16, 16, 3))
    xp = rng.uniform(0, 1, (16, 16, 3))
    req = GradientRequest(LossId.SSIM, Wrt.SECOND_INPUT)
    analytic = value_and_grad(req, x, xp).gradient.ravel()[0]
    h = 1e-3
    hi = xp.copy()
    hi.ravel()[0] += h
    lo = xp.copy()
    lo.ravel()[0] -= h
    fd = (value_and_grad(req, x, hi).value
          - value_and_grad(req, x, lo).value) / (2 * h)
    assert abs(analytic - fd) / (abs(analytic) + abs(fd)) < 1e-5


def test_fd_battery_other_seed_spot_check():
    reports = run_gradient_checks(seed=7, max_coords=96)
    for rep in reports:
        assert rep.max_rel_err < 1e-4, (
            f"{rep.loss_id.value} wrt {rep.wrt.value}: {rep.max_rel_err:.3e} "
            f"at {rep.worst_coordinate}"
        )


def test_exclusion_registry_flags_constant_block():
    rng = np.random.default_rng(30)
    x = rng.uniform(0.1, 0.9, (16, 16))
    x[:8, :8] = 0.5  # this block's ac coefficients are exactly zero
    xp = rng.uniform(0.1, 0.9, (16, 16))
    rep = finite_diff_check(
        GradientRequest(LossId.WATSON_DCT, Wrt.FIRST_INPUT), x, xp,
        default_params("dct", "grey"),
    )
    assert rep.n_excluded >= 64
    assert rep.max_rel_err < 1e-4
    repf = finite_diff_check(
        GradientRequest(LossId.WATSON_DFT, Wrt.SECOND_INPUT), x, xp,
        default_params("dft", "grey"),
    )
    assert repf.n_excluded >= 64
    assert repf.max_rel_err < 1e-4


def test_params_check_skips_gamma_only():
    x, xp = images(31)
    rep = finite_diff_check(
        GradientRequest(LossId.WATSON_DCT, Wrt.PARAMS), x, xp,
        default_params("dct", "grey"),
    )
    assert rep.n_excluded == 1
    assert rep.n_checked == n_free(default_params("dct", "grey")) - 1
