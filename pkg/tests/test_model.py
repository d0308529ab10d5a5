import numpy as np
import pytest
from hypothesis import given, strategies as st

from harmovoc.dsp import StftConfig, Waveform, stft
from harmovoc.errors import InvalidStateError
from harmovoc.model import (ModelConfig, ParamSet, config_from_params, decoder_forward,
                            encoder_forward, harmonic_attention, init_params, input_features,
                            model_backward, model_forward, softmax_rows)
from harmovoc.pitch import F0Contour, estimate_f0

SMALL = ModelConfig(d=8, F=17)


def zeroed(p: ParamSet, *names):
    q = p.copy()
    for n in names or q.names():
        q[n][...] = 0.0
    return q


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(d=0)
    with pytest.raises(ValueError):
        ModelConfig(kernel=4)


def test_init_determinism_and_biases():
    a, b = init_params(SMALL), init_params(SMALL)
    assert a.equals(b)
    c = init_params(ModelConfig(d=8, F=17, seed=1))
    d = init_params(ModelConfig(d=8, F=17, seed=2))
    assert not c.equals(d)
    for n in a:
        if n.endswith(".b"):
            assert not np.any(a[n])
    assert config_from_params(a) == SMALL


def test_encoder_shape_and_zero():
    p = init_params(ModelConfig())
    X = np.random.default_rng(0).standard_normal((87, 513))
    assert encoder_forward(X, p).H.shape == (87, 64)
    assert not np.any(encoder_forward(np.zeros((10, 513)), p).H)


def test_encoder_rejects_nonfinite():
    p = init_params(SMALL)
    X = np.zeros((4, 17))
    X[1, 2] = np.inf
    with pytest.raises(ValueError):
        encoder_forward(X, p)


def test_encoder_shift_equivariance():
    p = init_params(SMALL)
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 17))
    Xs = np.vstack([rng.standard_normal((1, 17)), X[:-1]])
    H, Hs = encoder_forward(X, p).H, encoder_forward(Xs, p).H
    reach = 2 * (SMALL.kernel // 2)
    np.testing.assert_allclose(Hs[1 + reach:-reach], H[reach:-reach - 1], atol=1e-12)


def _attn_inputs(rng, T, d):
    return rng.standard_normal((T, d)), rng.standard_normal((T, 2)), rng.random(T) < 0.5


def test_attention_wq_zero_uniform(rng):
    p = zeroed(init_params(SMALL), "attn.Wq")
    H, f, v = _attn_inputs(rng, 9, 8)
    r = harmonic_attention(H, f, v, p)
    assert np.all(r.A == 1.0 / 9)
    np.testing.assert_allclose(r.H_tilde, np.tile((H @ p["attn.Wv"]).mean(axis=0), (9, 1)), atol=1e-12)


def test_attention_single_frame(rng):
    p = init_params(SMALL)
    H, f, v = _attn_inputs(rng, 1, 8)
    assert harmonic_attention(H, f, v, p).A.tolist() == [[1.0]]


def test_attention_all_unvoiced_identity(rng):
    p = init_params(SMALL)
    H, f, _ = _attn_inputs(rng, 7, 8)
    r = harmonic_attention(H, f, np.zeros(7, bool), p)
    assert r.H_out.tobytes() == H.tobytes()


def test_attention_identity_oracle():
    I = np.eye(2)
    p = ParamSet({"attn.Wq": I.copy(), "attn.Wk": I.copy(), "attn.Wv": I.copy(),
                  "f0_proj.w": np.zeros((2, 2))})
    r = harmonic_attention(I, np.zeros((2, 2)), np.ones(2, bool), p, F_emb=I)
    a, b = np.exp(1 / np.sqrt(2)), 1.0
    expect = np.array([[a, b], [b, a]]) / (a + b)
    np.testing.assert_allclose(r.A, expect, atol=1e-15)


@given(st.integers(1, 12), st.integers(0, 2 ** 31), st.floats(0.1, 1e3))
def test_attention_invariants(T, seed, scale):
    rng = np.random.default_rng(seed)
    p = init_params(SMALL)
    for n in ("attn.Wq", "attn.Wk"):
        p[n][...] = rng.uniform(-1, 1, p[n].shape) * scale
    H, f, v = _attn_inputs(rng, T, 8)
    H = H * scale
    r = harmonic_attention(H, f, v, p)
    assert np.all(np.isfinite(r.A))
    assert np.all((r.A >= 0) & (r.A <= 1))
    np.testing.assert_allclose(r.A.sum(axis=1), 1.0, atol=1e-6)
    assert r.H_out[~v].tobytes() == H[~v].tobytes()
    perm = rng.permutation(T)
    rp = harmonic_attention(H[perm], f[perm], v[perm], p)
    np.testing.assert_allclose(rp.H_out, r.H_out[perm], atol=1e-9 * max(1.0, np.abs(r.H_out).max()))


def test_softmax_large_logits():
    A = softmax_rows(np.array([[1e4, -1e4, 0.0], [-1e4, -1e4, -1e4]]))
    assert np.all(np.isfinite(A))
    np.testing.assert_allclose(A.sum(axis=1), 1.0)


def test_decoder_zero_and_shape():
    p = init_params(ModelConfig())
    S = decoder_forward(np.zeros((87, 64)), p)
    assert S.shape == (87, 513)
    assert not np.any(S.real) and not np.any(S.imag)
    S = decoder_forward(np.random.default_rng(0).standard_normal((87, 64)), p)
    assert S.shape == (87, 513)


def test_decoder_bias_sensitivity(rng):
    p = init_params(SMALL)
    Ht = rng.standard_normal((5, 8))
    base = decoder_forward(Ht, p)
    q = p.copy()
    q["dec.out.b"][3] += 0.5
    S = decoder_forward(Ht, q)
    diff_r = S.real - base.real
    np.testing.assert_allclose(diff_r[:, 3], 0.5, atol=1e-12)
    diff_r[:, 3] = 0
    assert not np.any(diff_r)
    assert np.array_equal(S.imag, base.imag)


def _one_second():
    rng = np.random.default_rng(5)
    t = np.arange(22050) / 22050
    y = Waveform(0.4 * np.sin(2 * np.pi * 200 * t) + 0.01 * rng.standard_normal(22050))
    S = stft(y, StftConfig())
    return y, input_features(S), estimate_f0(y)


def test_model_forward_end_to_end():
    y, X, c = _one_second()
    p = init_params(ModelConfig())
    S1, w1, _ = model_forward(X, c, p, len(y))
    S2, w2, _ = model_forward(X, c, p, len(y))
    assert S1.shape == (87, 513) and len(w1) == 22050
    assert w1.samples.tobytes() == w2.samples.tobytes()
    S0, w0, _ = model_forward(X, c, zeroed(p), len(y))
    assert not np.any(w0.samples)


def test_model_forward_shape_errors():
    y, X, c = _one_second()
    p = init_params(ModelConfig())
    with pytest.raises(ValueError):
        model_forward(X[:-1], c, p, len(y))
    with pytest.raises(ValueError):
        model_forward(X, c, init_params(SMALL), len(y))


def _toy_forward():
    from harmovoc.gradcheck import toy_problem
    prob = toy_problem(17)
    p = init_params(SMALL)
    S, _, rec = model_forward(prob.features, prob.contour, p, prob.out_len, prob.stft_cfg)
    return p, S, rec


def test_backward_zero_and_bias_closed_form(rng):
    p, S, rec = _toy_forward()
    model_backward(rec, np.zeros(S.shape + (2,)), p)
    assert all(not np.any(p.grads[n]) for n in p)
    g = rng.standard_normal(S.shape + (2,))
    model_backward(rec, g, p)
    np.testing.assert_allclose(p.grads["dec.out.b"], np.concatenate([g[..., 0].sum(0), g[..., 1].sum(0)]))


def test_backward_accumulates(rng):
    p, S, rec = _toy_forward()
    g = rng.standard_normal(S.shape + (2,))
    model_backward(rec, g, p)
    once = {n: p.grads[n].copy() for n in p}
    model_backward(rec, g, p, accumulate=True)
    for n in p:
        np.testing.assert_allclose(p.grads[n], 2 * once[n])


def test_backward_rejects_mismatched_record(rng):
    p, S, rec = _toy_forward()
    with pytest.raises(InvalidStateError):
        model_backward(rec, np.zeros((S.shape[0] + 1, S.shape[1], 2)), p)
    with pytest.raises(InvalidStateError):
        model_backward(rec, np.zeros(S.shape + (2,)), init_params(ModelConfig(d=4, F=17)))


def test_forward_nan_free_with_large_params(rng):
    from harmovoc.gradcheck import toy_problem
    prob = toy_problem(17)
    p = init_params(SMALL)
    for n in p:
        p[n][...] = rng.uniform(-1e3, 1e3, p[n].shape)
    S, y, _ = model_forward(prob.features, prob.contour, p, prob.out_len, prob.stft_cfg)
    assert np.all(np.isfinite(S.real)) and np.all(np.isfinite(y.samples))
