"""Inner loops that dominate runtime, each in a numba and a numpy flavour.

The public names dispatch on :func:`harmovoc._accel.use_numba`; the ``*_np``
and ``*_nb`` variants stay importable so tests and the benchmark can compare
them directly.
"""
import numpy as np

from ._accel import njit, use_numba

__all__ = ["overlap_add", "nccf", "conv_time", "conv_time_backward"]


# --- overlap-add -------------------------------------------------------------

def overlap_add_np(frames: np.ndarray, hop: int, total_len: int) -> np.ndarray:
    n_frames, n = frames.shape
    out = np.zeros(total_len)
    for t in range(n_frames):
        out[t * hop:t * hop + n] += frames[t]
    return out


@njit
def overlap_add_nb(frames, hop, total_len):
    n_frames, n = frames.shape
    out = np.zeros(total_len)
    for t in range(n_frames):
        base = t * hop
        for k in range(n):
            out[base + k] += frames[t, k]
    return out


# --- normalised cross-correlation ---------------------------------------------

def nccf_np(frames: np.ndarray, lag_lo: int, lag_hi: int) -> np.ndarray:
    """r[t, i] for lag ``lag_lo + i``; numerator over the frame overlap,
    normalised by the energies of the two overlapping segments."""
    n_frames, w = frames.shape
    n_fft = 1 << int(np.ceil(np.log2(2 * w)))
    spec = np.fft.rfft(frames, n_fft, axis=1)
    acf = np.fft.irfft(spec * np.conj(spec), n_fft, axis=1)[:, lag_lo:lag_hi + 1]
    sq = frames * frames
    csum = np.concatenate([np.zeros((n_frames, 1)), np.cumsum(sq, axis=1)], axis=1)
    lags = np.arange(lag_lo, lag_hi + 1)
    head = csum[:, w - lags]                 # sum_{n < w - lag} x[n]^2
    tail = csum[:, w:w + 1] - csum[:, lags]  # sum_{n >= lag} x[n]^2
    denom = np.sqrt(head * tail)
    out = np.zeros_like(acf)
    ok = denom > 0
    out[ok] = acf[ok] / denom[ok]
    return out


@njit
def nccf_nb(frames, lag_lo, lag_hi):
    n_frames, w = frames.shape
    n_lags = lag_hi - lag_lo + 1
    out = np.zeros((n_frames, n_lags))
    for t in range(n_frames):
        for i in range(n_lags):
            lag = lag_lo + i
            num = 0.0
            e0 = 0.0
            e1 = 0.0
            for n in range(w - lag):
                a = frames[t, n]
                b = frames[t, n + lag]
                num += a * b
                e0 += a * a
                e1 += b * b
            d = np.sqrt(e0 * e1)
            if d > 0.0:
                out[t, i] = num / d
    return out


# --- 1-D convolution along time, "same" zero padding ---------------------------

def conv_time_np(h: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    k = w.shape[0]
    t_len = h.shape[0]
    half = k // 2
    hp = np.pad(h, ((half, half), (0, 0)))
    out = np.broadcast_to(b, (t_len, w.shape[2])).copy()
    for j in range(k):
        out += hp[j:j + t_len] @ w[j]
    return out


def conv_time_backward_np(h: np.ndarray, w: np.ndarray, g: np.ndarray):
    k = w.shape[0]
    t_len = h.shape[0]
    half = k // 2
    hp = np.pad(h, ((half, half), (0, 0)))
    dhp = np.zeros_like(hp)
    dw = np.empty_like(w)
    for j in range(k):
        dw[j] = hp[j:j + t_len].T @ g
        dhp[j:j + t_len] += g @ w[j].T
    return dhp[half:half + t_len], dw, g.sum(axis=0)


@njit
def conv_time_nb(h, w, b):
    k, c_in, c_out = w.shape
    t_len = h.shape[0]
    half = k // 2
    out = np.empty((t_len, c_out))
    for t in range(t_len):
        for o in range(c_out):
            out[t, o] = b[o]
        for j in range(k):
            src = t + j - half
            if src < 0 or src >= t_len:
                continue
            for i in range(c_in):
                x = h[src, i]
                for o in range(c_out):
                    out[t, o] += x * w[j, i, o]
    return out


@njit
def conv_time_backward_nb(h, w, g):
    k, c_in, c_out = w.shape
    t_len = h.shape[0]
    half = k // 2
    dh = np.zeros((t_len, c_in))
    dw = np.zeros((k, c_in, c_out))
    db = np.zeros(c_out)
    for t in range(t_len):
        for o in range(c_out):
            db[o] += g[t, o]
        for j in range(k):
            src = t + j - half
            if src < 0 or src >= t_len:
                continue
            for i in range(c_in):
                x = h[src, i]
                acc = 0.0
                for o in range(c_out):
                    go = g[t, o]
                    dw[j, i, o] += x * go
                    acc += go * w[j, i, o]
                dh[src, i] += acc
    return dh, dw, db


def overlap_add(frames, hop, total_len):
    if use_numba():
        return overlap_add_nb(np.ascontiguousarray(frames, dtype=np.float64), int(hop), int(total_len))
    return overlap_add_np(frames, hop, total_len)


def nccf(frames, lag_lo, lag_hi):
    # the direct lag loop only wins for narrow lag ranges; FFT autocorrelation otherwise
    if use_numba() and (lag_hi - lag_lo + 1) * frames.shape[1] <= 16384:
        return nccf_nb(np.ascontiguousarray(frames, dtype=np.float64), int(lag_lo), int(lag_hi))
    return nccf_np(frames, lag_lo, lag_hi)


def conv_time(h, w, b):
    # matmul-based numpy beats the scalar loop once channels are wide
    if use_numba() and w.shape[1] * w.shape[2] <= 256:
        return conv_time_nb(np.ascontiguousarray(h), np.ascontiguousarray(w), np.ascontiguousarray(b))
    return conv_time_np(h, w, b)


def conv_time_backward(h, w, g):
    if use_numba() and w.shape[1] * w.shape[2] <= 256:
        return conv_time_backward_nb(np.ascontiguousarray(h), np.ascontiguousarray(w), np.ascontiguousarray(g))
    return conv_time_backward_np(h, w, g)
