import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import sine
from harmovoc.dsp import StftConfig, Waveform, istft, mel_filterbank, stft, stft_complex
from harmovoc.errors import UndefinedMetricError
from harmovoc.evaluation import (MCD_SCALE, evaluate_pair, f0_rmse, griffin_lim, mcd, mcd_from_cepstra,
                                 residual_mel_energy, vuv_error, write_metrics_csv, write_residual_csv)
from harmovoc.pitch import F0Contour
from harmovoc.training import synth_dataset

CFG = StftConfig()


def contour(f0, voiced):
    v = np.asarray(voiced, bool)
    return F0Contour(np.where(v, f0, 0.0), v)


def test_f0_rmse_cases():
    a = contour(np.full(5, 220.0), [1] * 5)
    assert f0_rmse(a, a) == (0.0, 5)
    assert f0_rmse(a, contour(np.full(5, 222.0), [1] * 5))[0] == pytest.approx(2.0)
    r = contour(np.array([100.0, 110.0, 0.0]), [1, 1, 0])
    e = contour(np.array([103.0, 0.0, 150.0]), [1, 0, 1])
    assert f0_rmse(r, e) == (pytest.approx(3.0), 1)
    with pytest.raises(UndefinedMetricError):
        f0_rmse(contour(np.zeros(3), [0, 0, 0]), contour(np.full(3, 100.0), [1, 1, 1]))
    with pytest.raises(ValueError):
        f0_rmse(a, contour(np.full(4, 1.0), [1] * 4))


def test_vuv_cases():
    a = contour(np.full(4, 100.0), [1, 1, 0, 0])
    assert vuv_error(a, a) == 0.0
    assert vuv_error(a, contour(np.full(4, 100.0), [1, 0, 0, 1])) == 50.0
    assert vuv_error(a, contour(np.full(4, 100.0), [0, 0, 1, 1])) == 100.0


@given(st.integers(0, 2 ** 31))
def test_metric_symmetry(seed):
    rng = np.random.default_rng(seed)
    a = contour(rng.uniform(80, 300, 20), rng.random(20) < 0.7)
    b = contour(rng.uniform(80, 300, 20), rng.random(20) < 0.7)
    assert vuv_error(a, b) == vuv_error(b, a)
    try:
        assert f0_rmse(a, b) == f0_rmse(b, a)
    except UndefinedMetricError:
        pass


def test_mcd_closed_forms(rng):
    c = rng.standard_normal((10, 14))
    d = c.copy()
    d[:, 1] += 0.3
    assert mcd_from_cepstra(c, d) == pytest.approx(10 / np.log(10) * np.sqrt(2) * 0.3, rel=1e-12)
    assert MCD_SCALE == pytest.approx(6.14185, abs=1e-5)
    y = Waveform(rng.standard_normal(8000) * 0.1)
    assert mcd(y, y) == 0.0
    assert mcd(y, Waveform(2 * y.samples)) == pytest.approx(0.0, abs=1e-9)
    z = Waveform(rng.standard_normal(8000) * 0.1)
    assert mcd(y, z) == pytest.approx(mcd(z, y)) and mcd(y, z) > 0


def test_residual_mel(rng):
    y = Waveform(sine(300.0, 0.5))
    r = residual_mel_energy(y, y)
    assert r.shape == (stft(y).shape[0],) and not np.any(r)
    r0 = residual_mel_energy(y, Waveform(np.zeros(len(y))))
    assert np.all(r0 > 0)


def test_length_mismatch():
    with pytest.raises(ValueError):
        mcd(Waveform(np.ones(4000)), Waveform(np.ones(4001)))


def test_griffin_lim_true_phase_fixed_point(rng):
    y = rng.standard_normal(6000)
    z = stft_complex(y, CFG)
    res = griffin_lim(np.abs(z), CFG, iters=1, n_samples=6000, init_phase=np.angle(z))
    assert np.max(np.abs(res.waveform.samples - y)) < 1e-6
    assert res.convergence[0] < 1e-9


def test_griffin_lim_zero_and_iters0():
    res = griffin_lim(np.zeros((10, 513)), CFG)
    assert not np.any(res.waveform.samples)
    y = sine(220.0)
    mag = np.abs(stft_complex(y, CFG))
    res0 = griffin_lim(mag, CFG, iters=0, seed=3, n_samples=len(y))
    assert res0.convergence == [] and len(res0.waveform) == len(y)
    with pytest.raises(ValueError):
        griffin_lim(-mag, CFG)


def test_griffin_lim_sine_monotone_and_deterministic():
    y = sine(220.0)
    mag = np.abs(stft_complex(y, CFG))
    a = griffin_lim(mag, CFG, 32, seed=5, n_samples=len(y))
    b = griffin_lim(mag, CFG, 32, seed=5, n_samples=len(y))
    assert a.waveform.samples.tobytes() == b.waveform.samples.tobytes()
    assert len(a.convergence) == 32
    assert np.all(np.diff(a.convergence) <= 1e-9)


def test_evaluate_pair_self_and_ordering():
    y = synth_dataset(1, 0.5, 4)[0].waveform
    rep = evaluate_pair(y, y)
    assert (rep.f0_rmse, rep.vuv_error, rep.mcd) == (0.0, 0.0, 0.0)
    assert not np.any(rep.residual_mel)
    rt = istft(stft(y), len(y))
    gl = griffin_lim(stft(y).magnitude(), CFG, 32, n_samples=len(y)).waveform
    assert evaluate_pair(y, gl).mcd > evaluate_pair(y, rt).mcd


def test_evaluate_pair_unvoiced():
    y = Waveform(0.1 * np.random.default_rng(0).standard_normal(8000))
    with pytest.raises(UndefinedMetricError):
        evaluate_pair(y, y)
    assert np.isnan(evaluate_pair(y, y, allow_unvoiced=True).f0_rmse)


def test_csv_writers(tmp_path):
    y = synth_dataset(1, 0.5, 4)[0].waveform
    rep = evaluate_pair(y, y)
    write_metrics_csv(tmp_path / "m.csv", [("u1", rep)])
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows[0] == ["utt_id", "f0_rmse_hz", "vuv_error_pct", "mcd_db", "n_frames"]
    assert len(rows) == 2 and rows[1][0] == "u1"
    write_residual_csv(tmp_path / "r.csv", rep.residual_mel)
    assert len(open(tmp_path / "r.csv").read().splitlines()) == len(rep.residual_mel) + 1
