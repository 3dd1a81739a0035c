"""
Command-line interface: synth, unmix, bench and penalties.

Exit codes: 0 on success, 1 on runtime errors, 2 on usage errors.
"""

import argparse
import logging
import os
import sys
import traceback
from typing import List, Optional

import numpy as np
import pandas as pd

from . import __version__
from . import config as unmix_config
from .bench import aggregate, load_grid, run_bench, write_table
from .errors import UnmixError
from .helm_logger import init_helm_logger, shutdown_helm_logger
from .kernels import surrogate_penalties
from .models import SynthSpec
from .pipeline import run_unmix, score_against
from .solvers import ALGORITHMS, get_solver
from .storage import load_dataset, save_dataset, save_matrix_csv, save_report
from .synthetic import empirical_snr_db, generate, make_rng

logger = logging.getLogger(__name__)

# unmix flags and the algorithms whose config they touch
SOLVER_FLAGS = {
    'lam': ('--lambda', ('sisal', 'h2-sisal')),
    'mu': ('--mu', ('sisal',)),
    'line_search': ('--line-search', ('sisal',)),
    'tau': ('--tau', ('pr-sisal', 'pr-sisal-pg', 'pr-sisal-epg')),
    'no_extrapolate': ('--no-extrapolate', ('h2-sisal',)),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='simplex-unmix',
        description='Simplex-structured matrix factorization: SISAL, H2-SISAL and Pr-SISAL.',
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--config', help='INI file (default: SIMPLEX_UNMIX_CONFIG or instance/unmix.conf)')
    parser.add_argument('--log-level', help='logging level, overrides [logging] level')
    sub = parser.add_subparsers(dest='command', required=True)

    synth = sub.add_parser('synth', help='generate a synthetic dataset')
    synth.add_argument('--m', type=int, required=True, help='observation dimension M')
    synth.add_argument('--n', type=int, required=True, help='model order N')
    synth.add_argument('--t', type=int, required=True, help='number of samples T')
    noise = synth.add_mutually_exclusive_group(required=True)
    noise.add_argument('--snr-db', type=float, help='target SNR in dB')
    noise.add_argument('--noiseless', action='store_true', help='no additive noise')
    synth.add_argument('--seed', type=int, default=0)
    synth.add_argument('--cond-max', type=float, default=100.0, help='condition number ceiling for A0')
    synth.add_argument('--stem', default='data', help='file name stem inside --out')
    synth.add_argument('--out', required=True, help='output directory')

    unmix = sub.add_parser('unmix', help='estimate the mixing matrix of a dataset')
    unmix.add_argument('data', help='CSV data file (M rows, T columns)')
    unmix.add_argument('--n', type=int, help='model order N (default: taken from the ground truth sidecar)')
    unmix.add_argument('--alg', choices=ALGORITHMS, default='sisal')
    unmix.add_argument('--lambda', dest='lam', type=float)
    unmix.add_argument('--mu', type=float)
    unmix.add_argument('--line-search', choices=('armijo', 'legacy'))
    unmix.add_argument('--tau', type=float)
    unmix.add_argument('--no-extrapolate', action='store_true', help='H2-SISAL without extrapolation')
    unmix.add_argument('--sigma', type=float, help='noise standard deviation, required by pr-* when M = N')
    unmix.add_argument('--normalize', action='store_true', help='sum-normalize the columns before PCA')
    unmix.add_argument('--kappa', type=float, help='vertex expansion factor of the initializer')
    unmix.add_argument('--seed', type=int, default=0, help='tie-breaking stream of the initializer')
    unmix.add_argument('--out', help='output directory (default: next to the data file)')

    bench = sub.add_parser('bench', help='run a Monte Carlo grid')
    bench.add_argument('grid', help='grid JSON file')
    bench.add_argument('--out', required=True, help='per-run CSV')
    bench.add_argument('--aggregate', help='per-cell CSV (default: <out>.aggregate.csv)')
    bench.add_argument('--svg', help='directory for MSE-vs-SNR charts')
    bench.add_argument('--parallel', type=int, help='worker count')

    penalties = sub.add_parser('penalties', help='tabulate the probit penalty and its two lower bounds')
    penalties.add_argument('--out', required=True, help='CSV file')
    penalties.add_argument('--lo', type=float, default=-10.0)
    penalties.add_argument('--hi', type=float, default=10.0)
    penalties.add_argument('--points', type=int, default=401)
    penalties.add_argument('--svg', help='SVG chart path')

    return parser


def configure_logging(level: str, settings: dict):
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )
    helm_url = os.environ.get('HELM_SERVICE_URL')
    if helm_url:
        init_helm_logger(
            os.environ.get('SERVICE_NAME', 'simplex-unmix'),
            helm_url,
            batch_size=settings['remote_batch_size'],
            flush_interval=settings['remote_flush_interval'],
        )


def cmd_synth(args, parser, config) -> int:
    spec = SynthSpec(M=args.m, N=args.n, T=args.t, snr_db=args.snr_db, noiseless=args.noiseless,
                     cond_max=args.cond_max, seed=args.seed)
    dataset = generate(spec)
    data_path = save_dataset(dataset, args.out, args.stem)
    snr = empirical_snr_db(dataset)
    print(f"Wrote {data_path} ({args.m} x {args.t}) and its ground truth")
    print(f"Empirical SNR: {snr:.3f} dB" if np.isfinite(snr) else "Empirical SNR: inf (noiseless)")
    return 0


def _solver_overrides(args, parser) -> dict:
    overrides = {}
    for key, (flag, algorithms) in SOLVER_FLAGS.items():
        value = getattr(args, key)
        if value is None or value is False:
            continue
        if args.alg not in algorithms:
            parser.error(f"{flag} does not apply to --alg {args.alg}")
        if key == 'no_extrapolate':
            overrides['extrapolate'] = False
        else:
            overrides[key] = value
    return overrides


def cmd_unmix(args, parser, config) -> int:
    overrides = _solver_overrides(args, parser)
    dataset = load_dataset(args.data)
    truth = dataset.ground_truth
    m = dataset.Y.shape[0]

    n = args.n
    if n is None:
        if truth is None:
            parser.error("--n is required when the data has no ground truth sidecar")
        n = truth.A0.shape[1]

    entry = get_solver(args.alg)
    if entry.needs_sigma and m == n and args.sigma is None:
        parser.error(f"--sigma is required for {args.alg} when M = N (no noise-floor eigenvalue)")

    cfg = entry.build_config(config, overrides)
    kappa_overrides = {'kappa': args.kappa} if args.kappa is not None else None
    kappa = unmix_config.init_config(config, kappa_overrides).kappa

    print(f"Unmixing {args.data} ({m} x {dataset.Y.shape[1]}) with {args.alg}, N={n}")
    result = run_unmix(dataset.Y, n, args.alg, cfg, sigma=args.sigma, normalize=args.normalize,
                       kappa=kappa, rng=make_rng(args.seed))
    report = result.report
    print(f"Termination: {report.termination} after {report.iterations} iterations ({report.wall_ms:.1f} ms)")

    if truth is not None:
        scores = score_against(result, truth)
        print(f"MSE: {scores['mse']:.6e}")
        print(f"Mean SAD: {scores['sad_mean_deg']:.4f} deg")

    out_dir = args.out or os.path.dirname(os.path.abspath(args.data))
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.data))[0]
    estimate_path = os.path.join(out_dir, f'{stem}.{args.alg}.A_hat.csv')
    report_path = os.path.join(out_dir, f'{stem}.{args.alg}.report.json')
    save_matrix_csv(estimate_path, result.A_hat)
    save_report(report, report_path, extra={'data': args.data, 'N': n})
    print(f"Wrote {estimate_path} and {report_path}")
    return 0


def cmd_bench(args, parser, config) -> int:
    grid = load_grid(args.grid)
    parallel = args.parallel if args.parallel is not None else unmix_config.bench_defaults(config)['parallel']
    print(f"Bench: {len(grid.cells())} cells x {grid.trials} trials x {len(grid.algorithms)} algorithms")

    results = run_bench(grid, parallel=parallel, config=config)
    write_table(results, args.out)
    aggregates = aggregate(results)
    aggregate_path = args.aggregate or os.path.splitext(args.out)[0] + '.aggregate.csv'
    write_table(aggregates, aggregate_path)

    failures = int(results['termination'].str.startswith('error').sum())
    print(f"Wrote {len(results)} rows to {args.out} and {len(aggregates)} cells to {aggregate_path}")
    if failures:
        print(f" -> WARNING: {failures} run(s) failed; see the termination column", file=sys.stderr)

    if args.svg:
        from .plotting import plot_mse_vs_snr
        paths = plot_mse_vs_snr(aggregates, args.svg)
        print(f"Wrote {len(paths)} chart(s) to {args.svg}")
    return 0


def cmd_penalties(args, parser, config) -> int:
    if args.points < 2 or not args.hi > args.lo:
        parser.error("need --points >= 2 and --hi > --lo")
    curves = surrogate_penalties(np.linspace(args.lo, args.hi, args.points))
    frame = pd.DataFrame({
        'x': curves.x,
        'neg_log_phi': curves.neg_log_phi,
        'hinge_bound': curves.hinge_bound,
        'hinge_sq_bound': curves.hinge_sq_bound,
    })
    write_table(frame, args.out)
    print(f"Wrote {args.points} points to {args.out}")
    if args.svg:
        from .plotting import plot_penalties
        print(f"Wrote {plot_penalties(curves, args.svg)}")
    return 0


COMMANDS = {
    'synth': cmd_synth,
    'unmix': cmd_unmix,
    'bench': cmd_bench,
    'penalties': cmd_penalties,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    try:
        config = unmix_config.load_config(args.config)
        settings = unmix_config.logging_settings(config)
        configure_logging(args.log_level or settings['level'], settings)
    except UnmixError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1

    try:
        return COMMANDS[args.command](args, parser, config)
    except SystemExit as e:
        # parser.error inside a command
        return e.code if isinstance(e.code, int) else 2
    except UnmixError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"\nAn unexpected error occurred: {e}", file=sys.stderr)
        traceback.print_exc()
        return 1
    finally:
        shutdown_helm_logger()
