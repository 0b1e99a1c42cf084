"""Command line driver for the experiment pipeline.

Subcommands: ``generate``, ``downsample``, ``interpolate``, ``evaluate``,
``fit``, ``glyphs``.  Exit codes: 0 on success, 1 on usage or validation
errors, 2 on numerical failures.
"""

import argparse
import sys
import time

import numpy as np

from .errors import NumericalError
from .fieldio import (
    downsample_by_two,
    read_field,
    read_sites,
    write_field,
    write_uncertainty,
)
from .harness import (
    INTERPOLATION_METHODS,
    evaluate_fields,
    generate_synthetic,
    glyph_export,
    interpolate_field,
    write_report,
)
from .mcmc import McmcConfig
from .stejskal import GradientScheme, fit_hot, read_directions, read_signals
from .tensors import TensorField, unique_count

USAGE_ERROR = 1
NUMERICAL_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="hotfield", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="draw a synthetic tensor field")
    p.add_argument("--order", type=int, required=True, choices=(2, 4, 6))
    p.add_argument("--nx", type=int, required=True)
    p.add_argument("--ny", type=int, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--c2", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("downsample", help="keep every other grid node")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("interpolate", help="predict tensors at target sites")
    p.add_argument("--method", required=True, choices=INTERPOLATION_METHODS)
    p.add_argument("--train", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, default=McmcConfig.n_iters)
    p.add_argument("--burnin", type=int, default=McmcConfig.burn_in)
    p.add_argument("--thin", type=int, default=McmcConfig.thin)
    p.add_argument("--sigma2", type=float, default=0.01)
    p.add_argument("--c2", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("evaluate", help="score a prediction against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--report", required=True)

    p = sub.add_parser("fit", help="estimate tensors from diffusion signals")
    p.add_argument("--signals", required=True)
    p.add_argument("--dirs", required=True)
    p.add_argument("--order", type=int, required=True, choices=(2, 4, 6))
    p.add_argument("--out", required=True)

    p = sub.add_parser("glyphs", help="export polar glyph samples")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--out", required=True)
    return parser


def _cmd_generate(args):
    field = generate_synthetic(
        args.order, args.nx, args.ny, args.theta, args.c2, args.seed
    )
    write_field(args.out, field)


def _cmd_downsample(args):
    write_field(args.out, downsample_by_two(read_field(args.in_path)))


def _cmd_interpolate(args):
    train = read_field(args.train)
    targets = read_sites(args.targets)
    cfg = McmcConfig(
        n_iters=args.iters, burn_in=args.burnin, thin=args.thin, seed=args.seed
    )
    predicted, spread = interpolate_field(
        train, targets, args.method, cfg=cfg, sigma2=args.sigma2, c2=args.c2
    )
    write_field(args.out, predicted)
    if spread is not None:
        write_uncertainty(args.out + ".unc", targets, spread)


def _cmd_evaluate(args):
    t0 = time.perf_counter()
    predicted = read_field(args.pred)
    truth = read_field(args.truth)
    report = evaluate_fields(predicted, truth, elapsed_seconds=0.0)
    report.elapsed_seconds = time.perf_counter() - t0
    write_report(args.report, report, predicted.coords)
    print(f"frobenius distance: {report.summary()}")


def _cmd_fit(args):
    order, coords, signals, b, s0 = read_signals(args.signals)
    if order != args.order:
        raise ValueError(
            f"--order {args.order} disagrees with the signal header (order {order})"
        )
    scheme = GradientScheme(read_directions(args.dirs), b=b, s0=s0)
    coeffs = np.stack(
        [fit_hot(signals[i], scheme, order).coeffs for i in range(coords.shape[0])]
    )
    write_field(args.out, TensorField(order, coords, coeffs))


def _cmd_glyphs(args):
    glyph_export(args.out, read_field(args.in_path), args.samples)


_COMMANDS = {
    "generate": _cmd_generate,
    "downsample": _cmd_downsample,
    "interpolate": _cmd_interpolate,
    "evaluate": _cmd_evaluate,
    "fit": _cmd_fit,
    "glyphs": _cmd_glyphs,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"hotfield {args.command}: numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except (ValueError, OSError) as exc:
        print(f"hotfield {args.command}: {exc}", file=sys.stderr)
        return USAGE_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
