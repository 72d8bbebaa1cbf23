"""
Experiment Runner
Builds the problem from a config, solves it, runs the requested analyses and
writes the reports plus a manifest. Exit codes: 0 when every verdict passes,
2 when any verdict fails, 1 on an execution error.
"""

import hashlib
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Union

from .. import __version__
from ..core.analysis import (
    NOISE_FACTOR,
    DecayReport,
    NondegeneracyReport,
    ReflectionReport,
    check_nondegeneracy,
    find_branching_center,
    find_free_boundary_center,
    flatness_diagnostic,
    measure_decay,
    reflection_check,
)
from ..core.grid import Node, build_grid
from ..core.infinity_ops import residual_field
from ..core.oracles import RefinementRow, refinement_study
from ..core.solver import SolveOutcome, lipschitz_certificate, max_principle_check, solve
from ..utils.errors import ConfigParseError, InflapError
from .config import ExperimentConfig, parse_config, serialize_config
from .reports import emit_reports, write_json

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2

REFINEMENT_RATIO = 2.0
EXACT_ERROR = 1e-10


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str = __version__
    phases: Dict[str, float] = field(default_factory=dict)   # wall-clock seconds per phase
    files: List[str] = field(default_factory=list)
    exit_code: int = EXIT_PASS
    failure: Optional[str] = None
    verdicts: Dict[str, Optional[bool]] = field(default_factory=dict)

    @property
    def status(self) -> str:
        return {EXIT_PASS: 'pass', EXIT_FAIL: 'fail'}.get(self.exit_code, 'error')

    def to_mapping(self) -> Dict[str, object]:
        return {
            'config_hash': self.config_hash,
            'tool_version': self.tool_version,
            'status': self.status,
            'exit_code': self.exit_code,
            'failure': self.failure,
            'verdicts': self.verdicts,
            'phases': self.phases,
            'files': self.files,
        }


@dataclass
class AnalysisResults:
    decay: List[DecayReport] = field(default_factory=list)
    nondegeneracy: List[NondegeneracyReport] = field(default_factory=list)
    reflection: List[ReflectionReport] = field(default_factory=list)
    refinement: List[RefinementRow] = field(default_factory=list)
    verdicts: Dict[str, Optional[bool]] = field(default_factory=dict)
    extras: Dict[str, object] = field(default_factory=dict)


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _resolve_centers(config: ExperimentConfig, outcome: SolveOutcome, stencil) -> List[Node]:
    grid = outcome.grid
    analysis = config.analysis
    if analysis.center == 'origin':
        return [grid.origin]
    if analysis.center == 'explicit':
        return [grid.node_of(point) for point in analysis.centers]
    if analysis.center == 'branching':
        return [find_branching_center(outcome.field, analysis.tau_u, analysis.rho_b)]
    noise_floor = NOISE_FACTOR * config.solver.tolerance
    return [find_free_boundary_center(outcome.field, stencil, noise_floor, analysis.tau_u, analysis.tau_g)]


def _refinement_verdict(rows: List[RefinementRow]) -> bool:
    errors = [row.sup_error for row in rows]
    if all(e <= EXACT_ERROR for e in errors):
        return True
    decreasing = all(b < a for a, b in zip(errors, errors[1:]))
    return decreasing and errors[0] >= REFINEMENT_RATIO * errors[-1]


def analyze(config: ExperimentConfig, outcome: SolveOutcome, stencil) -> AnalysisResults:
    """Run every requested check on a finished solve."""
    analysis = config.analysis
    checks = analysis.checks
    field_ = outcome.field
    model = config.model
    results = AnalysisResults()

    centers = []
    if any(c in checks for c in ('decay', 'nondegeneracy', 'reflection')):
        centers = _resolve_centers(config, outcome, stencil)
        results.extras['centers'] = [list(field_.grid.coordinate(c)) for c in centers]

    if 'decay' in checks:
        for center in centers:
            if analysis.alpha == 'auto':
                alpha_pred = model.growth_exponent(field_.grid.coordinate(center), config.operator.effective_gamma)
            elif analysis.alpha == 'fit':
                alpha_pred = None
            else:
                alpha_pred = float(analysis.alpha)
            results.decay.append(measure_decay(field_, center, analysis.k_max, alpha_pred,
                                               config.solver.tolerance, analysis.tol_alpha))
        verdicts = [r.verdict for r in results.decay if r.verdict is not None]
        results.verdicts['decay'] = all(verdicts) if verdicts else None

    if 'nondegeneracy' in checks:
        for center in centers:
            results.nondegeneracy.append(check_nondegeneracy(
                field_, center, model, stencil, analysis.theta, analysis.sigma, k_max=analysis.k_max))
        results.verdicts['nondegeneracy'] = all(r.verdict for r in results.nondegeneracy)

    if 'reflection' in checks:
        alpha = None if isinstance(analysis.alpha, str) else float(analysis.alpha)
        if analysis.alpha == 'auto':
            alpha = model.growth_exponent(field_.grid.coordinate(centers[0]), config.operator.effective_gamma)
        for center in centers:
            results.reflection.append(reflection_check(
                field_, center, alpha, analysis.C0, k_max=analysis.k_max,
                tau_u=analysis.tau_u, rho_b=analysis.rho_b))
        results.verdicts['reflection'] = all(r.verdict for r in results.reflection)

    if 'refinement' in checks:
        grids = [build_grid(n, config.grid.half_width) for n in analysis.refinement_grids]
        results.refinement = refinement_study(config.boundary.oracle(), model, grids, stencil,
                                              config.operator, config.solver)
        results.verdicts['refinement'] = _refinement_verdict(results.refinement)

    if 'max_principle' in checks:
        results.verdicts['max_principle'] = max_principle_check(outcome)

    if 'flatness' in checks:
        scale = float(abs(field_.values).max())
        normalized = field_.with_values(field_.values / scale) if scale > 0 else field_
        report = flatness_diagnostic(normalized, analysis.flatness_eps)
        results.extras['flatness'] = {
            'inf_u': report.inf_u,
            'neg_density': report.neg_density,
            'sup_half': report.sup_half,
            'delta': report.delta,
            'small_negative_part': report.small_negative_part,
        }
    return results


def build_summary(config: ExperimentConfig, outcome: SolveOutcome, results: AnalysisResults,
                  stencil, deterministic: bool) -> Dict[str, object]:
    first = results.decay[0] if results.decay else None
    certificate = lipschitz_certificate(outcome, config.model, stencil)
    summary: Dict[str, object] = {
        'alpha_fit': first.alpha_fit if first else None,
        'alpha_pred': first.alpha_pred if first else None,
        'r_squared': first.r_squared if first else None,
        'verdicts': {name: results.verdicts.get(name) for name in ('decay', 'nondegeneracy', 'reflection')},
        'sweeps_used': outcome.sweeps_used,
        'final_residual_sup': outcome.final_residual_sup,
        'unfloored_residual_sup': outcome.unfloored_residual_sup,
        'final_update_norm': outcome.final_update_norm,
        'converged': outcome.converged,
        'lipschitz': {
            'seminorm': certificate.seminorm,
            'sup_u': certificate.sup_u,
            'rhs_cube_root': certificate.rhs_cube_root,
            'data_bound': certificate.data_bound,
        },
    }
    for name in ('refinement', 'max_principle'):
        if name in results.verdicts:
            summary['verdicts'][name] = results.verdicts[name]
    if first is not None:
        summary['holder_proxy'] = first.holder_proxy
    if results.nondegeneracy:
        report = results.nondegeneracy[0]
        summary['nondegeneracy'] = {'theta': report.theta, 'theta_estimate': report.theta_estimate,
                                    'constant': report.constant, 'hypothesis_holds': report.hypothesis_holds}
    if results.reflection:
        report = results.reflection[0]
        summary['reflection'] = {'alpha': report.alpha, 'C0': report.C0, 'C1': report.C1,
                                 'alpha_neg': report.alpha_neg, 'alpha_pos': report.alpha_pos}
    summary.update(results.extras)
    if not deterministic:
        summary['elapsed'] = outcome.elapsed
    return summary


def run(config: ExperimentConfig, out_dir: Union[str, Path], threads: Optional[int] = None,
        deterministic: Optional[bool] = None) -> RunManifest:
    """Execute build, solve, analyze and report; the manifest is written in every case."""
    out_dir = Path(out_dir)
    manifest = RunManifest(config_hash(serialize_config(config)))
    phase_start = time.perf_counter()

    def finish_phase(name: str) -> None:
        nonlocal phase_start
        now = time.perf_counter()
        manifest.phases[name] = now - phase_start
        phase_start = now

    try:
        solver_config = config.solver
        if threads is not None:
            solver_config = replace(solver_config, threads=threads)
        if deterministic is not None:
            solver_config = replace(solver_config, deterministic=deterministic)
        grid, stencil = config.grid.build()
        boundary = config.boundary.build()
        finish_phase('build')

        outcome = solve(grid, stencil, config.model, boundary, config.operator, solver_config)
        finish_phase('solve')

        results = analyze(config, outcome, stencil)
        residual = residual_field(outcome.field, stencil, config.model, config.operator,
                                  solver_config.floor_for(grid))
        finish_phase('analyze')

        summary = build_summary(config, outcome, results, stencil, solver_config.deterministic)
        files = emit_reports(out_dir, outcome, residual, results.decay, results.nondegeneracy,
                             results.reflection, results.refinement, summary, config.output.formats)
        manifest.files = [path.name for path in files]
        finish_phase('report')

        manifest.verdicts = dict(results.verdicts)
        failed = [name for name, verdict in results.verdicts.items() if verdict is False]
        if failed:
            manifest.exit_code = EXIT_FAIL
            manifest.failure = f"verdicts failed: {', '.join(failed)}"
    except (InflapError, OSError) as e:
        logger.error("run failed: %s", e)
        manifest.exit_code = EXIT_ERROR
        manifest.failure = str(e)
    except Exception as e:
        logger.exception("run crashed")
        manifest.exit_code = EXIT_ERROR
        manifest.failure = f"{type(e).__name__}: {e}"
    finally:
        write_manifest(manifest, out_dir)
    return manifest


def write_manifest(manifest: RunManifest, out_dir: Path) -> Optional[Path]:
    if "manifest.json" not in manifest.files:
        manifest.files.append("manifest.json")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        return write_json(manifest.to_mapping(), out_dir / "manifest.json")
    except OSError as e:
        logger.error("could not write manifest: %s", e)
        return None


def run_text(text: str, out_dir: Union[str, Path], threads: Optional[int] = None,
             deterministic: Optional[bool] = None) -> RunManifest:
    """Parse then run; a parse error still leaves a manifest with exit code 1."""
    try:
        config = parse_config(text)
    except ConfigParseError as e:
        logger.error("config rejected: %s", e)
        manifest = RunManifest(config_hash(text), exit_code=EXIT_ERROR, failure=str(e))
        write_manifest(manifest, Path(out_dir))
        return manifest
    return run(config, out_dir, threads, deterministic)
