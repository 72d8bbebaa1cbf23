"""
Experiment Configuration
Flat, line-based ``section.key = value`` experiment files.

    # comment
    grid.n = 65
    model.kind = dead_core
    model.lambda = 1.0
    model.term.1.beta = 1.0      # indexed sub-keys for henon_sum terms

Every value is range-checked while parsing; errors name the line and key.
"""

import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from ..core.grid import MAX_STENCIL_WIDTH, MIN_NODES_PER_SIDE, Grid2D, StencilSet, build_grid, build_stencil
from ..core.infinity_ops import OperatorKind
from ..core.models import HenonTerm, RhsKind, RhsModel, WeightForm, WeightSpec
from ..core.oracles import OracleField
from ..core.solver import BoundaryData, SolverConfig, SweepOrder, WarmStart
from ..utils.errors import ConfigParseError, InflapError

BOUNDARY_KINDS = ('affine', 'aronsson', 'constant', 'custom_odd', 'ramp', 'random', 'radial')
CENTER_MODES = ('origin', 'auto_critical', 'branching', 'explicit')
CHECKS = ('decay', 'nondegeneracy', 'reflection', 'refinement', 'max_principle', 'flatness')
FORMATS = ('csv', 'json')

# boundary parameters each named trace accepts, with defaults
BOUNDARY_PARAMS: Dict[str, Dict[str, object]] = {
    'constant': {'value': 1.0},
    'affine': {'p': (1.0, 0.0), 'c': 0.0},
    'aronsson': {'coefficients': (1.0, -1.0)},
    'custom_odd': {'slope': 1.0},
    'ramp': {'slope': 1.0, 'shift': 0.0},
    'random': {'seed': 0, 'modes': 4, 'amplitude': 1.0},
    'radial': {'K': 1.0, 'sigma': 2.0},
}

TERM_KEY = re.compile(r'^model\.term\.(\d+)\.(\w+)$')
TERM_FIELDS = ('c', 'beta', 'm', 'kappa', 'points', 'segments', 'noise', 'sigma')

AlphaSetting = Union[str, float]


# --- value parsers ---------------------------------------------------------

def _float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("expected a finite number")
    return value


def _int(text: str) -> int:
    return int(text)


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ('true', 'yes', '1'):
        return True
    if lowered in ('false', 'no', '0'):
        return False
    raise ValueError("expected true or false")


def _optional_float(text: str) -> Optional[float]:
    return None if text.lower() == 'auto' else _float(text)


def _optional_int(text: str) -> Optional[int]:
    return None if text.lower() == 'auto' else _int(text)


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(_float(v) for v in re.split(r'[,\s]+', text.strip()) if v)


def _pair(text: str) -> Tuple[float, float]:
    values = _floats(text)
    if len(values) != 2:
        raise ValueError("expected two numbers")
    return values


def _groups(size: int) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        groups = []
        for chunk in text.split(';'):
            if not chunk.strip():
                continue
            values = _floats(chunk)
            if len(values) != size:
                raise ValueError(f"expected groups of {size} numbers separated by ';'")
            groups.append(values if size == 2 else (values[:2], values[2:]))
        return tuple(groups)
    return parse


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in re.split(r'[,\s]+', text.strip()) if v)


def _choice(options: Tuple[str, ...]) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


def _choices(options: Tuple[str, ...]) -> Callable[[str], Tuple[str, ...]]:
    def parse(text: str) -> Tuple[str, ...]:
        items = tuple(v for v in re.split(r'[,\s]+', text.strip()) if v)
        if not items:
            raise ValueError("expected at least one entry")
        for item in items:
            if item not in options:
                raise ValueError(f"unknown entry '{item}', expected any of {', '.join(options)}")
        return items
    return parse


def _alpha(text: str) -> AlphaSetting:
    return text.lower() if text.lower() in ('auto', 'fit') else _float(text)


def _operator(text: str) -> OperatorKind:
    return OperatorKind.parse(text)


def _text(text: str) -> str:
    return text


# --- range checks ----------------------------------------------------------

def _odd_grid(n: int) -> Optional[str]:
    if n < MIN_NODES_PER_SIDE or n % 2 == 0:
        return f"grid.n must be odd and >= {MIN_NODES_PER_SIDE} (parity), got {n}"
    return None


def _positive(name: str) -> Callable[[float], Optional[str]]:
    return lambda v: None if v is None or v > 0 else f"{name} must be > 0, got {v}"


def _nonnegative(name: str) -> Callable[[float], Optional[str]]:
    return lambda v: None if v is None or v >= 0 else f"{name} must be >= 0, got {v}"


def _interval(name: str, low: float, high: float, closed_high: bool = False) -> Callable[[float], Optional[str]]:
    def check(v):
        inside = low <= v <= high if closed_high else low <= v < high
        bracket = ']' if closed_high else ')'
        return None if inside else f"{name} must lie in [{low}, {high}{bracket}, got {v}"
    return check


def _stencil_width(w: int) -> Optional[str]:
    return None if 1 <= w <= MAX_STENCIL_WIDTH else f"stencil width must be in [1, {MAX_STENCIL_WIDTH}], got {w}"


def _grid_list(values: Tuple[int, ...]) -> Optional[str]:
    for n in values:
        message = _odd_grid(n)
        if message:
            return message
    return None


# key -> (parser, range check)
KEYS: Dict[str, Tuple[Callable, Optional[Callable]]] = {
    'grid.n': (_int, _odd_grid),
    'grid.half_width': (_float, _positive('grid.half_width')),
    'grid.stencil_width': (_int, _stencil_width),

    'model.kind': (_choice(tuple(k.value for k in RhsKind)), None),
    'model.m': (_float, _interval('m', 0.0, 3.0)),
    'model.kappa': (_float, _interval('kappa', 0.0, 4.0)),
    'model.lambda': (_float, _positive('lambda')),
    'model.gamma': (_float, _interval('gamma', 0.0, 3.0)),
    'model.weight': (_choice(tuple(f.value for f in WeightForm)), None),
    'model.weight.c': (_float, _nonnegative('weight c')),
    'model.weight.beta': (_float, _nonnegative('weight beta')),
    'model.weight.center': (_pair, None),
    'model.weight.points': (_groups(2), None),
    'model.weight.segments': (_groups(4), None),

    'boundary.kind': (_choice(BOUNDARY_KINDS), None),
    'boundary.value': (_float, None),
    'boundary.p': (_pair, None),
    'boundary.c': (_float, None),
    'boundary.coefficients': (_pair, None),
    'boundary.slope': (_float, None),
    'boundary.shift': (_float, None),
    'boundary.seed': (_int, None),
    'boundary.modes': (_int, lambda v: None if v >= 1 else f"modes must be >= 1, got {v}"),
    'boundary.amplitude': (_float, None),
    'boundary.K': (_float, _nonnegative('K')),
    'boundary.sigma': (_float, _positive('sigma')),

    'solver.operator': (_operator, None),
    'solver.tolerance': (_float, _positive('tolerance')),
    'solver.max_sweeps': (_int, lambda v: None if v >= 1 else f"max_sweeps must be >= 1, got {v}"),
    'solver.grad_floor': (_optional_float, _nonnegative('grad_floor')),
    'solver.damping': (_float, _interval('damping', 0.0, 1.0, closed_high=True)),
    'solver.sweep_order': (_choice(tuple(s.value for s in SweepOrder)), None),
    'solver.nonlinearity_lag': (_choice(('frozen_sweep',)), None),
    'solver.deterministic': (_bool, None),
    'solver.threads': (_optional_int, _positive('threads')),
    'solver.warm_start': (_choice(tuple(w.value for w in WarmStart)), None),

    'analysis.checks': (_choices(CHECKS), None),
    'analysis.center': (_choice(CENTER_MODES), None),
    'analysis.centers': (_groups(2), None),
    'analysis.k_max': (_int, lambda v: None if v >= 0 else f"k_max must be >= 0, got {v}"),
    'analysis.alpha': (_alpha, lambda v: None if isinstance(v, str) or v > 1 else f"alpha must be > 1, got {v}"),
    'analysis.theta': (_optional_float, _positive('theta')),
    'analysis.sigma': (_float, _nonnegative('sigma')),
    'analysis.C0': (_optional_float, _positive('C0')),
    'analysis.tol_alpha': (_float, _positive('tol_alpha')),
    'analysis.tau_u': (_optional_float, _positive('tau_u')),
    'analysis.tau_g': (_optional_float, _positive('tau_g')),
    'analysis.rho_b': (_optional_float, _positive('rho_b')),
    'analysis.refinement_grids': (_ints, _grid_list),
    'analysis.flatness_eps': (_optional_float, _positive('flatness_eps')),

    'output.directory': (_text, None),
    'output.formats': (_choices(FORMATS), None),
    'output.seed': (_int, None),
}

TERM_PARSERS: Dict[str, Callable] = {
    'c': _float, 'beta': _float, 'm': _float, 'kappa': _float,
    'points': _groups(2), 'segments': _groups(4), 'noise': _float, 'sigma': _float,
}


# --- sections --------------------------------------------------------------

@dataclass(frozen=True)
class GridSection:
    n: int = 65
    half_width: float = 1.0
    stencil_width: int = 1

    def build(self) -> Tuple[Grid2D, StencilSet]:
        return build_grid(self.n, self.half_width), build_stencil(self.stencil_width)


@dataclass(frozen=True)
class BoundarySection:
    kind: str = 'constant'
    params: Tuple[Tuple[str, object], ...] = ()

    def value(self, key: str):
        return dict(self.params).get(key, BOUNDARY_PARAMS[self.kind][key])

    def build(self) -> BoundaryData:
        v = self.value
        if self.kind == 'constant':
            return BoundaryData.constant(v('value'))
        if self.kind == 'affine':
            return BoundaryData.affine(v('p'), v('c'))
        if self.kind == 'aronsson':
            return BoundaryData.aronsson(v('coefficients'))
        if self.kind == 'custom_odd':
            return BoundaryData.custom_odd(v('slope'))
        if self.kind == 'ramp':
            return BoundaryData.ramp(v('slope'), v('shift'))
        if self.kind == 'random':
            return BoundaryData.random(v('seed'), v('modes'), v('amplitude'))
        return BoundaryData.radial(v('K'), v('sigma'))

    def oracle(self) -> OracleField:
        """Exact field whose trace this boundary is; used by refinement studies."""
        v = self.value
        if self.kind == 'aronsson':
            return OracleField.aronsson(v('coefficients'))
        if self.kind == 'affine':
            return OracleField.affine(v('p'), v('c'))
        if self.kind == 'radial':
            return OracleField.radial_monomial(v('K'), v('sigma'))
        raise ConfigParseError(f"boundary '{self.kind}' has no exact oracle for refinement", key='boundary.kind')


@dataclass(frozen=True)
class AnalysisSection:
    checks: Tuple[str, ...] = ('decay',)
    center: str = 'origin'
    centers: Tuple[Tuple[float, float], ...] = ()
    k_max: int = 6
    alpha: AlphaSetting = 'auto'
    theta: Optional[float] = None
    sigma: float = 0.0
    C0: Optional[float] = None
    tol_alpha: float = 0.15
    tau_u: Optional[float] = None
    tau_g: Optional[float] = None
    rho_b: Optional[float] = None
    refinement_grids: Tuple[int, ...] = ()
    flatness_eps: Optional[float] = None


@dataclass(frozen=True)
class OutputSection:
    directory: Optional[str] = None
    formats: Tuple[str, ...] = FORMATS
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSection = field(default_factory=GridSection)
    model: RhsModel = field(default_factory=RhsModel.zero)
    operator: OperatorKind = field(default_factory=OperatorKind.direct)
    boundary: BoundarySection = field(default_factory=BoundarySection)
    solver: SolverConfig = field(default_factory=SolverConfig)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    output: OutputSection = field(default_factory=OutputSection)


# --- parsing ---------------------------------------------------------------

def _read_lines(text: str) -> Dict[str, Tuple[str, int]]:
    entries: Dict[str, Tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigParseError("expected 'section.key = value'", line=lineno)
        key, value = (part.strip() for part in line.split('=', 1))
        if not value:
            raise ConfigParseError("missing value", line=lineno, key=key)
        if key in entries:
            raise ConfigParseError(f"duplicate key (first set on line {entries[key][1]})", line=lineno, key=key)
        entries[key] = (value, lineno)
    return entries


def _parse_value(key: str, text: str, lineno: int):
    term = TERM_KEY.match(key)
    if term:
        name = term.group(2)
        if name not in TERM_PARSERS:
            raise ConfigParseError(f"unknown term field, expected one of {', '.join(TERM_FIELDS)}",
                                   line=lineno, key=key)
        parser, check = TERM_PARSERS[name], None
    elif key in KEYS:
        parser, check = KEYS[key]
    else:
        raise ConfigParseError("unknown key", line=lineno, key=key)

    try:
        value = parser(text)
    except (ValueError, InflapError) as e:
        raise ConfigParseError(f"bad value '{text}': {e}", line=lineno, key=key) from e
    message = check(value) if check else None
    if message:
        raise ConfigParseError(message, line=lineno, key=key)
    return value


def _build_model(values: Dict[str, object], lines: Dict[str, int]) -> RhsModel:
    kind = RhsKind(values.get('model.kind', 'zero'))
    form = WeightForm(values.get('model.weight', 'constant'))
    weight = WeightSpec(
        form,
        values.get('model.weight.c', 1.0),
        values.get('model.weight.beta', 0.0),
        values.get('model.weight.center', (0.0, 0.0)),
        values.get('model.weight.points', ()),
        values.get('model.weight.segments', ()),
    )

    terms: Dict[int, Dict[str, object]] = {}
    for key, value in values.items():
        match = TERM_KEY.match(key)
        if match:
            terms.setdefault(int(match.group(1)), {})[match.group(2)] = value
    henon = []
    for index in sorted(terms):
        spec = terms[index]
        missing = [k for k in ('c', 'beta', 'm', 'kappa') if k not in spec]
        if missing:
            key = f"model.term.{index}.{missing[0]}"
            raise ConfigParseError("missing term field", key=key)
        henon.append(HenonTerm(**spec))

    if kind == RhsKind.ZERO:
        return RhsModel.zero()
    if kind == RhsKind.GENERAL:
        return RhsModel.general(values.get('model.m', 0.0), values.get('model.kappa', 0.0), weight)
    if kind == RhsKind.DEAD_CORE:
        return RhsModel.dead_core(values.get('model.lambda', 1.0), values.get('model.gamma', 1.0), weight)
    if kind == RhsKind.HENON_SUM:
        return RhsModel.henon_sum(henon)
    return RhsModel.obstacle(weight)


def _first_line(lines: Dict[str, int], prefix: str) -> Tuple[Optional[int], Optional[str]]:
    hits = sorted((line, key) for key, line in lines.items() if key.startswith(prefix))
    return hits[0] if hits else (None, None)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate an experiment config; raises ConfigParseError with location."""
    entries = _read_lines(text)
    values: Dict[str, object] = {}
    lines: Dict[str, int] = {}
    for key, (raw, lineno) in entries.items():
        values[key] = _parse_value(key, raw, lineno)
        lines[key] = lineno

    def section(prefix: str) -> Dict[str, object]:
        return {k[len(prefix):]: v for k, v in values.items()
                if k.startswith(prefix) and '.' not in k[len(prefix):]}

    def build(prefix: str, factory: Callable):
        try:
            return factory()
        except ConfigParseError as e:
            if e.line is None and e.key is not None:
                raise ConfigParseError(e.message, line=lines.get(e.key), key=e.key) from e
            raise
        except (InflapError, TypeError, ValueError) as e:
            line, key = _first_line(lines, prefix)
            raise ConfigParseError(str(e), line=line, key=key or prefix.rstrip('.')) from e

    grid = build('grid.', lambda: GridSection(**section('grid.')))
    model = build('model.', lambda: _build_model(values, lines))

    boundary_values = section('boundary.')
    boundary_kind = boundary_values.pop('kind', 'constant')
    for key in boundary_values:
        if key not in BOUNDARY_PARAMS[boundary_kind]:
            raise ConfigParseError(f"not a parameter of boundary '{boundary_kind}'",
                                   line=lines[f'boundary.{key}'], key=f'boundary.{key}')
    boundary = BoundarySection(boundary_kind, tuple(sorted(boundary_values.items())))
    build('boundary.', boundary.build)

    solver_values = section('solver.')
    operator = solver_values.pop('operator', OperatorKind.direct())
    if 'sweep_order' in solver_values:
        solver_values['sweep_order'] = SweepOrder(solver_values['sweep_order'])
    if 'warm_start' in solver_values:
        solver_values['warm_start'] = WarmStart(solver_values['warm_start'])
    solver = build('solver.', lambda: SolverConfig(**solver_values))

    analysis = build('analysis.', lambda: AnalysisSection(**section('analysis.')))
    if analysis.center == 'explicit' and not analysis.centers:
        line, _ = _first_line(lines, 'analysis.center')
        raise ConfigParseError("explicit centers need analysis.centers", line=line, key='analysis.centers')
    if 'refinement' in analysis.checks:
        if len(analysis.refinement_grids) < 3:
            raise ConfigParseError("refinement needs at least 3 grids",
                                   line=lines.get('analysis.refinement_grids'), key='analysis.refinement_grids')
        build('boundary.', boundary.oracle)
    if 'max_principle' in analysis.checks and model.kind != RhsKind.ZERO:
        raise ConfigParseError("max_principle applies to model.kind = zero only",
                               line=lines.get('model.kind'), key='model.kind')

    output = build('output.', lambda: OutputSection(**section('output.')))
    return ExperimentConfig(grid, model, operator, boundary, solver, analysis, output)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    with open(path, 'r', encoding='utf-8') as f:
        return parse_config(f.read())


# --- serialization ---------------------------------------------------------

def _format(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, OperatorKind):
        return value.label()
    if isinstance(value, (SweepOrder, WarmStart, RhsKind, WeightForm)):
        return value.value
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return '; '.join(' '.join(_format(v) for v in _flatten(g)) for g in value)
        return ', '.join(_format(v) for v in value)
    return str(value)


def _flatten(group) -> List[float]:
    out = []
    for v in group:
        out.extend(_flatten(v) if isinstance(v, tuple) else [v])
    return out


def _model_lines(model: RhsModel) -> List[str]:
    lines = [f"model.kind = {model.kind.value}"]
    if model.kind == RhsKind.GENERAL:
        lines += [f"model.m = {_format(model.m)}", f"model.kappa = {_format(model.kappa)}"]
    if model.kind == RhsKind.DEAD_CORE:
        lines += [f"model.lambda = {_format(model.lam)}", f"model.gamma = {_format(model.gamma)}"]
    if model.kind in (RhsKind.GENERAL, RhsKind.DEAD_CORE, RhsKind.OBSTACLE):
        w = model.weight
        lines += [f"model.weight = {w.form.value}", f"model.weight.c = {_format(w.amplitude)}",
                  f"model.weight.beta = {_format(w.exponent)}", f"model.weight.center = {_format(w.center)}"]
        if w.points:
            lines.append(f"model.weight.points = {_format(w.points)}")
        if w.segments:
            lines.append(f"model.weight.segments = {_format(w.segments)}")
    for index, term in enumerate(model.terms, start=1):
        for name in TERM_FIELDS:
            value = getattr(term, name)
            if name in ('points', 'segments') and not value:
                continue
            lines.append(f"model.term.{index}.{name} = {_format(value)}")
    return lines


def serialize_config(config: ExperimentConfig) -> str:
    """Render a validated config as text that parses back to an equal object."""
    lines = [f"grid.{f.name} = {_format(getattr(config.grid, f.name))}" for f in fields(GridSection)]
    lines += _model_lines(config.model)
    lines.append(f"boundary.kind = {config.boundary.kind}")
    lines += [f"boundary.{k} = {_format(v)}" for k, v in config.boundary.params]
    lines.append(f"solver.operator = {config.operator.label()}")
    for f in fields(SolverConfig):
        value = getattr(config.solver, f.name)
        if f.name == 'log_every':
            continue
        lines.append(f"solver.{f.name} = {'auto' if value is None else _format(value)}")
    for f in fields(AnalysisSection):
        value = getattr(config.analysis, f.name)
        if value is None:
            lines.append(f"analysis.{f.name} = auto")
        elif value != ():
            lines.append(f"analysis.{f.name} = {_format(value)}")
    if config.output.directory is not None:
        lines.append(f"output.directory = {config.output.directory}")
    lines.append(f"output.formats = {_format(config.output.formats)}")
    lines.append(f"output.seed = {config.output.seed}")
    return '\n'.join(lines) + '\n'
