"""``harmovoc`` command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime abort.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .dsp import stft
from .errors import CheckpointError, NonFiniteGradientError, TrainingDiverged, WavFormatError
from .evaluation import evaluate_pair, griffin_lim, write_metrics_csv, write_residual_csv
from .losses import LossReport
from .model import config_from_params, input_features, model_forward
from .pitch import estimate_f0, write_f0_csv
from .training import Trainer, synth_dataset
from .wavio import read_wav, write_wav

log = logging.getLogger("harmovoc")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _config(path) -> RunConfig:
    return load_config(path) if path else RunConfig()


def cmd_synth_data(args) -> int:
    out = Path(args.out)
    clips = synth_dataset(args.clips, args.dur, args.seed)
    out.mkdir(parents=True, exist_ok=True)
    for i, c in enumerate(clips):
        write_wav(out / f"clip_{i:04d}.wav", c.waveform)
        write_f0_csv(out / f"clip_{i:04d}.f0.csv", c.true_f0)
    print(f"wrote {len(clips)} clips to {out}")
    return EXIT_OK


def _write_history(path: Path, history: list[LossReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LossReport.CSV_HEADER)
        for i, r in enumerate(history, 1):
            w.writerow(r.csv_row(i))


def cmd_train(args) -> int:
    cfg = _config(args.config)
    files = sorted(Path(args.data).glob("*.wav"))
    if not files:
        raise UsageError(f"no .wav files in {args.data}")
    data = [read_wav(f, cfg.stft.sample_rate) for f in files]
    tcfg = cfg.train
    if args.steps is not None:
        from dataclasses import replace
        tcfg = replace(tcfg, steps=args.steps)
    tr = Trainer(data, cfg.model, tcfg)

    def progress(step, rep):
        log.info("step %d  l_stft=%.4f  l_phase=%.4f  l_adv_g=%.4f  total=%.4f",
                 step, rep.l_stft, rep.l_phase, rep.l_adv_g, rep.total)

    try:
        tr.run(callback=progress)
    finally:
        out = Path(args.out)
        save_checkpoint(tr.params, tr.state, out)
        _write_history(out.parent / "loss_history.csv", tr.history)
    if tr.history:
        first, last = tr.history[0], tr.history[-1]
        print(f"final  l_stft={last.l_stft:.6f}  l_phase={last.l_phase:.6f}  "
              f"l_adv_g={last.l_adv_g:.6f}  l_adv_d={last.l_adv_d:.6f}  total={last.total:.6f}")
        print(f"l_stft ratio (final/initial) = {last.l_stft / first.l_stft:.4f}")
    else:
        print("no steps run; checkpoint holds the initial parameters")
    return EXIT_OK


def cmd_vocode(args) -> int:
    cfg = _config(args.config)
    p, _ = load_checkpoint(args.ckpt)
    scfg = cfg.stft
    mcfg = config_from_params(p)
    if mcfg.F != scfg.n_bins:
        raise UsageError(f"checkpoint predicts {mcfg.F} bins, STFT config has {scfg.n_bins}")
    y = read_wav(args.inp, scfg.sample_rate)
    S = stft(y, scfg)
    contour = estimate_f0(y, scfg, cfg.pitch)
    _, y_hat, _ = model_forward(input_features(S), contour, p, len(y), scfg, cfg.pitch)
    write_wav(args.out, y_hat)
    return EXIT_OK


def cmd_anchor(args) -> int:
    cfg = _config(args.config)
    y = read_wav(args.inp, cfg.stft.sample_rate)
    mag = stft(y, cfg.stft).magnitude()
    res = griffin_lim(mag, cfg.stft, iters=args.iters, seed=args.seed, n_samples=len(y))
    write_wav(args.out, res.waveform)
    if args.verbose:
        for i, sc in enumerate(res.convergence, 1):
            print(f"iter {i:3d}  spectral_convergence={sc:.9f}")
    final = res.convergence[-1] if res.convergence else float("nan")
    print(f"final spectral convergence: {final:.6f}")
    return EXIT_OK


def _pairs(ref: Path, est: Path):
    if ref.is_file() and est.is_file():
        return [(ref.stem, ref, est)], []
    if ref.is_dir() and est.is_dir():
        r = {f.stem: f for f in ref.glob("*.wav")}
        e = {f.stem: f for f in est.glob("*.wav")}
        unpaired = sorted(set(r) ^ set(e))
        return [(k, r[k], e[k]) for k in sorted(set(r) & set(e))], unpaired
    raise UsageError("--ref and --est must both be files or both be directories")


def cmd_eval(args) -> int:
    cfg = _config(args.config)
    pairs, unpaired = _pairs(Path(args.ref), Path(args.est))
    for name in unpaired:
        log.warning("skipping unpaired file %s", name)
    if not pairs:
        raise UsageError("no ref/est pairs to evaluate")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for utt, rf, ef in pairs:
        ref = read_wav(rf, cfg.stft.sample_rate)
        est = read_wav(ef, cfg.stft.sample_rate)
        if len(ref) != len(est):
            log.warning("skipping %s: length mismatch (%d vs %d)", utt, len(ref), len(est))
            continue
        rep = evaluate_pair(ref, est, cfg.stft, cfg.pitch, allow_unvoiced=True)
        rows.append((utt, rep))
        write_residual_csv(out.parent / f"residual_{utt}.csv", rep.residual_mel)
    if not rows:
        raise UsageError("every pair was skipped")
    write_metrics_csv(out, rows)
    f0 = np.nanmean([r.f0_rmse for _, r in rows]) if any(np.isfinite(r.f0_rmse) for _, r in rows) else float("nan")
    print(f"{'System':<12}{'F0 RMSE':>10}{'V/UV (%)':>10}{'MCD':>10}{'pairs':>7}")
    print(f"{'mean':<12}{f0:>10.4f}{np.mean([r.vuv_error for _, r in rows]):>10.4f}"
          f"{np.mean([r.mcd for _, r in rows]):>10.4f}{len(rows):>7d}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="harmovoc", description=__doc__.splitlines()[0])
    ap.add_argument("--verbose", "-v", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-data", help="write a synthetic harmonic corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--clips", type=_positive_int, default=8)
    s.add_argument("--dur", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth_data)

    s = sub.add_parser("train", help="train a vocoder on a directory of clips")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.add_argument("--steps", type=_nonneg_int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("vocode", help="resynthesise a WAV through a trained model")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.set_defaults(func=cmd_vocode)

    s = sub.add_parser("anchor", help="Griffin-Lim reconstruction from |STFT|")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--iters", type=_nonneg_int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config")
    s.set_defaults(func=cmd_anchor)

    s = sub.add_parser("eval", help="objective metrics between reference and estimate")
    s.add_argument("--ref", required=True)
    s.add_argument("--est", required=True)
    s.add_argument("--out", required=True, help="metrics CSV path")
    s.add_argument("--config")
    s.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    # argparse already exits with 2 on bad flags
    try:
        if args.command == "synth-data":
            if args.dur < 0.25:
                ap.error("--dur must be >= 0.25")
        return args.func(args)
    except (UsageError, ConfigError, WavFormatError, CheckpointError) as exc:
        print(f"harmovoc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, NonFiniteGradientError) as exc:
        print(f"harmovoc: aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"harmovoc: I/O error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
