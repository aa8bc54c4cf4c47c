"""Command-line entry point.

Subcommands: ``gen-data``, ``train``, ``eval``, ``compare``, ``gradcheck``.

Exit codes: 0 success, 1 gradcheck tolerance breach, 2 usage/config error,
3 runtime/numerical error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
from pathlib import Path

import numpy as np

from spdqml import data as D
from spdqml import qsim
from spdqml._backend import BACKEND
from spdqml.errors import (DivergenceError, FormatError, InvalidParameterError, ParseError,
                           SpdqmlError)
from spdqml.model import ARCHITECTURES
from spdqml.train import (TrainConfig, compare_architectures, comparison_table, evaluate,
                          load_checkpoint, save_checkpoint, train)

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3
EXIT_IO = 4

SHIFT_RTOL = 1e-6
SHIFT_ATOL = 1e-8
SMALL_GRADIENT = 1e-6
ORACLE_ATOL = 1e-12
FD_STEP = 1e-5

log = logging.getLogger("spdqml")

# flag dest -> TrainConfig field
_TRAIN_FLAGS = {
    "epochs": "epochs",
    "batch_size": "batch_size",
    "lr": "learning_rate",
    "seed": "seed",
    "qubits": "n_qubits",
    "epsilon": "epsilon",
    "mode": "projection_mode",
    "train_fraction": "train_fraction",
    "grad_method": "grad_method",
    "units": "units",
    "entangler_range": "entangler_range",
    "embed_axis": "embed_axis",
}


def _add_train_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI file with a [train] section")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float, help="Adam learning rate")
    p.add_argument("--seed", type=int)
    p.add_argument("--qubits", type=int, help="qubit count (also the projection size k)")
    p.add_argument("--epsilon", type=float, help="SPD regularizer")
    p.add_argument("--mode", choices=["batch", "per-sample"], help="projection fitting mode")
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--grad-method", choices=["shift", "adjoint"])
    p.add_argument("--units", choices=["standardized", "original"])
    p.add_argument("--entangler-range", type=int)
    p.add_argument("--embed-axis", choices=["X", "Y", "Z"])
    p.add_argument("--output-dir", type=Path, default=Path("run"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdqml", description="SPD-feature hybrid quantum-classical regression.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset CSV")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--outputs", type=int, required=True, help="target width M")
    p.add_argument("--inputs", type=int, default=7, help="input width d")
    p.add_argument("--out", type=Path, default=Path("data.csv"))

    p = sub.add_parser("train", help="train one architecture")
    p.add_argument("--arch", choices=ARCHITECTURES, required=True)
    p.add_argument("--data", type=Path, required=True)
    _add_train_options(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--units", choices=["standardized", "original"], default="standardized")
    p.add_argument("--out", type=Path, help="metrics file (default: next to the checkpoint)")

    p = sub.add_parser("compare", help="train all three architectures and print a table")
    p.add_argument("--data", type=Path, required=True)
    _add_train_options(p)

    p = sub.add_parser("gradcheck", help="verify circuit gradients and the simulator")
    p.add_argument("--qubits", type=int, default=4)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--oracle-trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--inject-sign-flip", action="store_true", help=argparse.SUPPRESS)
    return parser


def load_config_file(path: Path) -> dict:
    """Read ``[train]`` key/value pairs, coercing to the TrainConfig field types."""
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding="utf-8"):
        raise FileNotFoundError(f"config file not found: {path}")
    if not parser.has_section("train"):
        raise InvalidParameterError(f"{path}: missing [train] section")
    defaults = TrainConfig().to_dict()
    out = {}
    for key, raw in parser.items("train"):
        if key not in defaults:
            raise InvalidParameterError(f"{path}: unknown key {key!r}")
        ref = defaults[key]
        try:
            if key == "hidden":
                out[key] = [int(v) for v in raw.replace(",", " ").split()] or None
            elif isinstance(ref, bool):
                out[key] = parser.getboolean("train", key)
            elif isinstance(ref, int):
                out[key] = int(raw)
            elif isinstance(ref, float):
                out[key] = float(raw)
            else:
                out[key] = raw.strip()
        except ValueError:
            raise InvalidParameterError(f"{path}: bad value for {key}: {raw!r}") from None
    return out


def resolve_config(args, architecture: str) -> TrainConfig:
    values = load_config_file(args.config) if args.config else {}
    for flag, name in _TRAIN_FLAGS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    values["architecture"] = architecture
    values["data_source"] = str(args.data)
    return TrainConfig.from_dict(values)


def cmd_gen_data(args) -> int:
    ds = D.generate_synthetic(args.seed, args.n, args.inputs, args.outputs)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    D.save_csv(ds, args.out)
    sidecar = args.out.with_name(args.out.name + ".meta.json")
    sidecar.write_text(json.dumps(ds.metadata, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {args.out}: inputs {ds.inputs.shape}, targets {ds.targets.shape}, seed {args.seed}")
    return EXIT_OK


def _progress(epoch, value):
    log.info("epoch %d train_mse %.6g", epoch, value)


def cmd_train(args) -> int:
    config = resolve_config(args, args.arch)
    dataset = D.load_csv(args.data)
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    try:
        model, report = train(config, dataset, callback=_progress)
    except DivergenceError as exc:
        exc.report.write(out)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    save_checkpoint(out / "model.ckpt", model)
    report.write(out)
    print(f"{report.label}: test MSE={report.test_mse:.5g} R2={report.test_r2:.5g} "
          f"({report.units}) in {report.wall_seconds:.1f}s")
    print(f"checkpoint {out / 'model.ckpt'}, report {out / 'report.txt'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    dataset = D.load_csv(args.data)
    mse_value, r2_value = evaluate(model, dataset, units=args.units)
    line = f"MSE={mse_value:.5g} R2={r2_value:.5g}"
    print(line)
    out = args.out or args.checkpoint.with_name("metrics.txt")
    out.write_text(line + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_compare(args) -> int:
    config = resolve_config(args, "spd-enhanced")
    dataset = D.load_csv(args.data)
    reports = compare_architectures(config, dataset, callback=_progress)
    table = comparison_table(reports)
    print(table, end="")
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.txt").write_text(table, encoding="utf-8")
    for r in reports:
        r.write(out, stem=f"report-{r.architecture}")
    return EXIT_OK


def gradient_check(n_qubits=4, trials=5, oracle_trials=50, seed=0, inject_sign_flip=False):
    """Parameter-shift vs central differences and kernel vs dense oracle.

    Returns a dict with the maximum errors and the first offending parameter
    (``None`` when everything is within tolerance).
    """
    rng = np.random.default_rng(seed)
    worst_rel = 0.0
    worst_abs_small = 0.0
    worst_abs = 0.0
    offender = None
    for trial in range(trials):
        spec = qsim.CircuitSpec.random(n_qubits, rng)
        x = rng.uniform(-np.pi, np.pi, n_qubits)
        jac = qsim.circuit_jacobian(spec, x)
        shift = np.concatenate([jac.d_inputs, jac.d_weights.reshape(n_qubits, -1)], axis=1)
        if inject_sign_flip:
            shift = -shift
        params = np.concatenate([x, spec.weights.reshape(-1)])

        def f(p):
            s = qsim.CircuitSpec(n_qubits, p[n_qubits:].reshape(spec.weights.shape), spec.ranges)
            return qsim.run_circuit(s, p[:n_qubits])

        fd = np.empty_like(shift)
        for i in range(params.size):
            hi, lo = params.copy(), params.copy()
            hi[i] += FD_STEP
            lo[i] -= FD_STEP
            fd[:, i] = (f(hi) - f(lo)) / (2 * FD_STEP)
        err = np.abs(shift - fd)
        mag = np.maximum(np.abs(shift), np.abs(fd))
        small = mag < SMALL_GRADIENT
        rel = np.where(small, 0.0, err / np.where(small, 1.0, mag))
        worst_rel = max(worst_rel, float(rel.max()))
        worst_abs_small = max(worst_abs_small, float(np.where(small, err, 0.0).max()))
        worst_abs = max(worst_abs, float(err.max()))
        bad = np.argwhere((~small & (rel > SHIFT_RTOL)) | (small & (err > SHIFT_ATOL)))
        if offender is None and bad.size:
            out_q, p = bad[0]
            offender = {"trial": trial, "output": int(out_q), "parameter": int(p)}
    worst_oracle = 0.0
    for _ in range(oracle_trials):
        spec = qsim.CircuitSpec.random(n_qubits, rng)
        x = rng.uniform(-np.pi, np.pi, n_qubits)
        worst_oracle = max(worst_oracle, float(np.max(np.abs(
            qsim.run_circuit(spec, x) - qsim.dense_matrix_oracle(spec, x)))))
    return {
        "max_rel_error": worst_rel,
        "max_abs_error_small": worst_abs_small,
        "max_abs_error": worst_abs,
        "max_abs_error_oracle": worst_oracle,
        "offender": offender,
        "passed": offender is None and worst_oracle <= ORACLE_ATOL,
    }


def cmd_gradcheck(args) -> int:
    if not 1 <= args.qubits <= 4:
        raise InvalidParameterError(f"gradcheck supports 1..4 qubits, got {args.qubits}")
    res = gradient_check(args.qubits, args.trials, args.oracle_trials, args.seed, args.inject_sign_flip)
    print(f"backend: {BACKEND}")
    print(f"parameter-shift vs finite difference: max relative error {res['max_rel_error']:.3e} "
          f"(tol {SHIFT_RTOL:g}), max abs error {res['max_abs_error']:.3e}")
    print(f"simulator vs dense oracle: max abs error {res['max_abs_error_oracle']:.3e} (tol {ORACLE_ATOL:g})")
    if res["offender"] is not None:
        o = res["offender"]
        print(f"FAIL: gradient of output {o['output']} w.r.t. parameter index {o['parameter']} "
              f"(trial {o['trial']}) outside tolerance")
        return EXIT_TOLERANCE
    if res["max_abs_error_oracle"] > ORACLE_ATOL:
        print("FAIL: simulator disagrees with dense oracle")
        return EXIT_TOLERANCE
    print("PASS")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "gradcheck": cmd_gradcheck,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InvalidParameterError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ParseError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SpdqmlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
