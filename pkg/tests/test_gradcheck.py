import numpy as np
import pytest

from harmovoc.gradcheck import check_gradients, loss_and_spectrum_grad, toy_problem
from harmovoc.model import ModelConfig, init_params, model_forward

TOY = ModelConfig(d=8, F=17)


@pytest.mark.parametrize("loss_spec", ["composite", "phase", "mrstft"])
def test_gradients_match_finite_differences(loss_spec):
    assert check_gradients(TOY, loss_spec, T=6, n_coords=200) < 1e-4


def test_toy_spectrum_well_conditioned():
    prob = toy_problem(17)
    assert prob.target.magnitude().min() > 0.1


def test_quadratic_head_gradient_is_spectrum():
    prob = toy_problem(17)
    p = init_params(TOY)
    L, g, _ = loss_and_spectrum_grad(prob, p, "quadratic")
    S, _, _ = model_forward(prob.features, prob.contour, p, prob.out_len, prob.stft_cfg)
    assert np.array_equal(g[..., 0], S.real) and np.array_equal(g[..., 1], S.imag)
    assert L == pytest.approx(0.5 * np.sum(S.real ** 2 + S.imag ** 2))


def test_quadratic_head_fd_within_backward_bound():
    assert check_gradients(TOY, "quadratic") < 1e-3


@pytest.mark.xfail(strict=True, reason="float64 central differences cannot resolve 1e-10 relative error "
                                       "on small-gradient coordinates; see decisions ledger")
def test_quadratic_head_fd_below_1e10():
    assert check_gradients(TOY, "quadratic") < 1e-10


def test_unknown_loss_spec():
    with pytest.raises(ValueError):
        check_gradients(TOY, "nope")
