"""
Report Emission
CSV tables (one row per radius / node / grid) and the JSON summary of a run.

Floats are written with 17 significant digits, CSVs with ',' separators and
UNIX newlines, so reruns of a deterministic config are byte-identical.
"""

import json
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..core.analysis import DecayReport, NondegeneracyReport, ReflectionReport
from ..core.grid import boundary_mask
from ..core.infinity_ops import ScalarField
from ..core.oracles import RefinementRow, refinement_table_frame
from ..core.solver import SolveOutcome

FLOAT_FORMAT = '%.17g'

DECAY_COLUMNS = ['center_x', 'center_y', 'k', 'r', 'sup_abs', 'sup_pos', 'sup_neg']


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n', encoding='utf-8')
    return path


def decay_frame(reports: Sequence[DecayReport]) -> pd.DataFrame:
    rows = []
    for report in reports:
        cx, cy = report.center_xy
        for k, (r, sa, sp, sn) in enumerate(zip(report.radii, report.sup_abs, report.sup_pos, report.sup_neg)):
            rows.append({'center_x': cx, 'center_y': cy, 'k': k, 'r': r,
                         'sup_abs': sa, 'sup_pos': sp, 'sup_neg': sn})
    return pd.DataFrame(rows, columns=DECAY_COLUMNS)


def residual_frame(outcome: SolveOutcome, residual: ScalarField) -> pd.DataFrame:
    """Interior nodes with coordinates, solution and pointwise residual."""
    grid = outcome.grid
    X, Y = grid.coordinates()
    interior = ~boundary_mask(grid)
    ii, jj = np.nonzero(interior)
    return pd.DataFrame({
        'i': ii, 'j': jj, 'x': X[interior], 'y': Y[interior],
        'u': outcome.field.values[interior], 'residual': residual.values[interior],
    })


def nondegeneracy_frame(reports: Sequence[NondegeneracyReport], grid) -> pd.DataFrame:
    rows = []
    for report in reports:
        cx, cy = grid.coordinate(report.center)
        for row in report.rows:
            rows.append({'center_x': cx, 'center_y': cy, 'r': row.r, 'shell_sup': row.shell_sup,
                         'lower_bound': row.lower_bound, 'theta_estimate': row.theta_estimate})
    return pd.DataFrame(rows, columns=['center_x', 'center_y', 'r', 'shell_sup', 'lower_bound', 'theta_estimate'])


def reflection_frame(reports: Sequence[ReflectionReport], grid) -> pd.DataFrame:
    rows = []
    for report in reports:
        cx, cy = grid.coordinate(report.center)
        for row in report.rows:
            rows.append({'center_x': cx, 'center_y': cy, 'k': row.k, 'r': row.r,
                         's_neg': row.s_neg, 's_pos': row.s_pos, 's': row.s})
    return pd.DataFrame(rows, columns=['center_x', 'center_y', 'k', 'r', 's_neg', 's_pos', 's'])


def _json_value(value, indent: int) -> str:
    pad = '  ' * (indent + 1)
    end = '  ' * indent
    if value is None:
        return 'null'
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return format(value, '.17g') if math.isfinite(value) else 'null'
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return '{}'
        items = [f"{pad}{json.dumps(str(k))}: {_json_value(v, indent + 1)}" for k, v in value.items()]
        return '{\n' + ',\n'.join(items) + '\n' + end + '}'
    if isinstance(value, (list, tuple)):
        if not value:
            return '[]'
        items = [f"{pad}{_json_value(v, indent + 1)}" for v in value]
        return '[\n' + ',\n'.join(items) + '\n' + end + ']'
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_json(data: Dict[str, object]) -> str:
    """JSON text with 17-significant-digit floats and NaN/inf as null."""
    return _json_value(data, 0) + '\n'


def write_json(data: Dict[str, object], path: Path) -> Path:
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dumps_json(data))
    return path


def emit_reports(out_dir: Path, outcome: Optional[SolveOutcome] = None, residual: Optional[ScalarField] = None,
                 decay: Sequence[DecayReport] = (), nondegeneracy: Sequence[NondegeneracyReport] = (),
                 reflection: Sequence[ReflectionReport] = (), refinement: Sequence[RefinementRow] = (),
                 summary: Optional[Dict[str, object]] = None,
                 formats: Sequence[str] = ('csv', 'json')) -> List[Path]:
    """Write whatever reports are present; returns the files written in order."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []

    if 'csv' in formats:
        if decay:
            written.append(_write_csv(decay_frame(decay), out_dir / 'decay.csv'))
        if outcome is not None and residual is not None:
            written.append(_write_csv(residual_frame(outcome, residual), out_dir / 'residual.csv'))
        if refinement:
            written.append(_write_csv(refinement_table_frame(refinement), out_dir / 'refinement.csv'))
        if nondegeneracy:
            frame = nondegeneracy_frame(nondegeneracy, outcome.grid)
            written.append(_write_csv(frame, out_dir / 'nondegeneracy.csv'))
        if reflection:
            written.append(_write_csv(reflection_frame(reflection, outcome.grid), out_dir / 'reflection.csv'))

    if 'json' in formats and summary is not None:
        written.append(write_json(summary, out_dir / 'summary.json'))
    return written
