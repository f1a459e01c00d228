"""Command-line entry point: synth, train, predict, eval, gradcheck.

Exit codes: 0 success, 1 usage or configuration error, 2 data / file error,
3 numeric failure (non-finite loss, failed gradient check).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _side(text: str) -> int:
    value = _positive(text)
    if value % 32:
        raise argparse.ArgumentTypeError(f"expected a multiple of 32, got {text}")
    return value


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    from .data import gen_synthetic

    print(gen_synthetic(args.out, args.count, args.size, args.seed))
    return EXIT_OK


def cmd_train(args) -> int:
    from .checkpoint import load_checkpoint, save_checkpoint
    from .config import load_config
    from .data import load_dataset, resize_input
    from .model import GroupTransNet
    from .optim import AdamState
    from .train import train_epoch

    config = load_config(args.config)
    if args.data:
        config = config.replace(data=args.data)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    if not config.data:
        raise UsageError("no dataset: pass --data or set data= in the config")
    _, dataset = load_dataset(config.data)
    dataset = [resize_input(p, config.input_size) for p in dataset]

    model = GroupTransNet(config)
    state = AdamState(lr=config.lr)
    start = 0
    if args.resume:
        start = load_checkpoint(args.resume, model, state)
    epochs = args.epochs if args.epochs is not None else config.epochs
    if not (args.checkpoint_out or config.checkpoint):
        raise UsageError("no output: pass --checkpoint-out or set checkpoint= in the config")
    out = Path(args.checkpoint_out or config.checkpoint)
    out.parent.mkdir(parents=True, exist_ok=True)
    for epoch in range(start, epochs):
        report = train_epoch(model, dataset, config, state, epoch)
        print(f"epoch={epoch} loss={report.loss!r} lr={report.lr!r}", flush=True)
        save_checkpoint(out, model, state, epoch=epoch + 1)
    return EXIT_OK


def _model_for_checkpoint(path, config_path):
    """Rebuild the network a checkpoint was trained with: from ``config_path``, else by profile match."""
    from .checkpoint import CheckpointError, decode_records
    from .config import Config, load_config
    from .model import GroupTransNet

    records = decode_records(Path(path).read_bytes())
    if config_path:
        candidates = [load_config(config_path)]
    else:
        candidates = [Config.for_profile(name) for name in ("toy", "full")]
    for config in candidates:
        model = GroupTransNet(config)
        params = dict(model.named_parameters())
        if all(n in records and records[n].shape == p.shape for n, p in params.items()):
            for n, p in params.items():
                p.data = records[n].copy()
            return config, model
        del model, params
    what = f"config {config_path}" if config_path else "any built-in profile"
    raise CheckpointError(f"checkpoint {path} does not match {what} (parameter names or shapes differ)")


def cmd_predict(args) -> int:
    from .data import DataError, read_pnm, resample, to_uint8, to_unit, write_pnm
    from .train import predict

    rgb_raw, rmax = read_pnm(args.rgb)
    depth_raw, dmax = read_pnm(args.depth)
    if rgb_raw.ndim != 3 or depth_raw.ndim != 2:
        raise DataError("--rgb must be a P6 image and --depth a P5 image")
    if rgb_raw.shape[:2] != depth_raw.shape:
        raise DataError(f"rgb {rgb_raw.shape[:2]} and depth {depth_raw.shape} differ in size")
    if rgb_raw.shape[0] != rgb_raw.shape[1]:
        raise DataError(f"inputs must be square, got {rgb_raw.shape[:2]}")
    config, model = _model_for_checkpoint(args.checkpoint, args.config)
    side = rgb_raw.shape[0]
    rgb = resample(to_unit(rgb_raw, rmax).transpose(2, 0, 1), config.input_size)
    depth = resample(to_unit(depth_raw, dmax)[None], config.input_size)
    sal = predict(model, rgb[None], depth[None])[0]
    sal = np.clip(resample(sal, side), 0.0, 1.0)[0]
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_pnm(args.out, to_uint8(sal))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .metrics import evaluate_dir

    report = evaluate_dir(args.pred, args.gt, adaptive_f=args.adaptive_f)
    Path(args.report).parent.mkdir(parents=True, exist_ok=True)
    Path(args.report).write_text(report.to_text())
    print(f"images={report.images} s_alpha={report.s_alpha:.4f} f_beta_avg={report.f_beta_avg:.4f} "
          f"e_xi={report.e_xi:.4f} mae={report.mae:.4f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_suite

    results = run_suite(args.seed, pipeline_samples=args.samples, tol=args.tol, faults=args.inject_fault)
    failed = []
    for name, rep in results:
        status = "ok" if rep.passed else "FAIL"
        print(f"check={name} rel_err={rep.max_error:.3e} checked={rep.checked} "
              f"skipped={rep.skipped} status={status}")
        if not rep.passed:
            failed.append((name, rep.max_error))
    worst_name, worst = max(((n, r.max_error) for n, r in results), key=lambda t: t[1])
    print(f"worst={worst_name} rel_err={worst:.3e} tol={args.tol:g}")
    if failed:
        print("failed: " + ", ".join(f"{n} ({e:.3e})" for n, e in failed), file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------- wiring

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="grouptransnet", description="RGB-D salient object detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic RGB-D dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=_positive, default=16)
    p.add_argument("--size", type=_side, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train on a dataset directory")
    p.add_argument("--config", required=True)
    p.add_argument("--data")
    p.add_argument("--checkpoint-out", help="defaults to checkpoint= from the config")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--epochs", type=_positive, help="stop after this many total epochs")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write a saliency map for one RGB-D pair")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--rgb", required=True)
    p.add_argument("--depth", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score a directory of predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--adaptive-f", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op and the whole network")
    p.add_argument("--profile", choices=("toy",), default="toy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=_positive, default=50)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--inject-fault", action="append", default=[], metavar="OP",
                   help="scale the backward rule of OP by 1.5 (negative control)")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    from .checkpoint import CheckpointError
    from .config import ConfigError
    from .data import CodecError, DataError
    from .tensor import OPS, NonFiniteError

    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    unknown = sorted(set(getattr(args, "inject_fault", ())) - OPS)
    if unknown:
        print(f"error: unknown op {unknown[0]!r}; choose from {', '.join(sorted(OPS))}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CodecError, CheckpointError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    except NonFiniteError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
