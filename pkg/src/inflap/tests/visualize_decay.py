'''
python -m inflap.tests.visualize_decay --run inflap-runs/deadcore-decay
'''


import argparse
import json
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

# Marker per sup-norm column
SERIES = {
    'sup_abs': ('o', '#202020', 'sup |u|'),
    'sup_pos': ('^', '#C03030', 'sup u+'),
    'sup_neg': ('v', '#3050C0', 'sup u-'),
}


def visualize_decay(run_dir):
    """Log-log plot of the dyadic sup-norms with the fitted and predicted slopes"""
    decay = pd.read_csv(run_dir / 'decay.csv')
    summary = {}
    if (run_dir / 'summary.json').is_file():
        with open(run_dir / 'summary.json', 'r', encoding='utf-8') as f:
            summary = json.load(f)

    plt.figure(figsize=(8, 6), facecolor='white')
    ax = plt.gca()

    for (cx, cy), rows in decay.groupby(['center_x', 'center_y']):
        for column, (marker, color, label) in SERIES.items():
            positive = rows[rows[column] > 0]
            if positive.empty:
                continue
            ax.loglog(positive['r'], positive[column], marker=marker, color=color, linestyle='-',
                      linewidth=1, label=f'{label} at ({cx:.3g}, {cy:.3g})')

        # reference lines pinned at the largest radius
        r = rows['r'].to_numpy()
        anchor = rows['sup_abs'].iloc[0]
        for key, style in (('alpha_fit', '--'), ('alpha_pred', ':')):
            alpha = summary.get(key)
            if alpha is not None and anchor > 0:
                ax.loglog(r, anchor * (r / r[0]) ** alpha, linestyle=style, color='#808080',
                          label=f'{key} = {alpha:.4f}')

    ax.set_xlabel('r')
    ax.set_ylabel('sup over B_r')
    ax.grid(True, which='both', alpha=0.3)
    verdict = summary.get('verdicts', {}).get('decay')
    title = run_dir.name if verdict is None else f"{run_dir.name} (decay {'pass' if verdict else 'FAIL'})"
    plt.title(title, pad=20, fontsize=14)
    plt.legend(loc='lower right', frameon=False, fontsize=8)
    plt.tight_layout()
    plt.show()


def main():
    """Main entry point."""
    parser = argparse.ArgumentParser(
        description='Plot the dyadic decay table written by an inflap run'
    )

    parser.add_argument(
        '--run',
        required=True,
        help='Run output directory (holds decay.csv)'
    )

    args = parser.parse_args()
    run_dir = Path(args.run)
    if not (run_dir / 'decay.csv').is_file():
        print(f"No decay.csv in {run_dir}")
        return
    visualize_decay(run_dir)


if __name__ == '__main__':
    main()
