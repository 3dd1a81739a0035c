"""
SVG line charts for bench aggregates and the penalty curves.
"""

import math
import os
from typing import List

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .kernels import PenaltyCurves  # noqa: E402


def plot_mse_vs_snr(aggregates: pd.DataFrame, out_dir: str) -> List[str]:
    """
    One chart per (M, N, T): mean MSE against SNR on a log axis, with a
    shaded band of one standard deviation. Noiseless cells have no SNR
    position and are left out.
    """
    os.makedirs(out_dir, exist_ok=True)
    finite = aggregates[np.isfinite(aggregates['snr_db'])]
    paths = []
    for (m, n, t), cell in finite.groupby(['M', 'N', 'T'], sort=False):
        fig, ax = plt.subplots(figsize=(6, 4))
        for algorithm, curve in cell.groupby('algorithm', sort=False):
            curve = curve.sort_values('snr_db')
            snr = curve['snr_db'].to_numpy()
            mean = curve['mse_mean'].to_numpy()
            std = np.nan_to_num(curve['mse_std'].to_numpy())
            line, = ax.plot(snr, mean, marker='o', label=algorithm)
            lower = np.maximum(mean - std, mean * 1e-3)
            ax.fill_between(snr, lower, mean + std, color=line.get_color(), alpha=0.2)
        ax.set_yscale('log')
        ax.set_xlabel('SNR (dB)')
        ax.set_ylabel('MSE')
        ax.set_title(f'M={m}, N={n}, T={t}')
        ax.grid(True, which='both', alpha=0.3)
        ax.legend()
        path = os.path.join(out_dir, f'mse_M{m}_N{n}_T{t}.svg')
        fig.savefig(path, format='svg', bbox_inches='tight')
        plt.close(fig)
        paths.append(path)
    return paths


def plot_penalties(curves: PenaltyCurves, path: str) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curves.x, curves.neg_log_phi, label='-log Phi(x)')
    ax.plot(curves.x, curves.hinge_bound, '--', label=f'max(log 2 - {math.sqrt(2 / math.pi):.3f} x, 0)')
    ax.plot(curves.x, curves.hinge_sq_bound, ':', label='log 2 + hinge(x)^2 / 2')
    ax.set_xlabel('x')
    ax.set_ylabel('penalty')
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.savefig(path, format='svg', bbox_inches='tight')
    plt.close(fig)
    return path
