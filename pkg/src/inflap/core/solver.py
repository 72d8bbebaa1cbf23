"""
Relaxation Solver
Gauss-Seidel sweeps of the closed-form local solve for Delta_inf u = G(x, u, Du)
with Dirichlet data, including the projected obstacle variant, plus the
discrete maximum/comparison principle checks and the Lipschitz certificate.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numba as nb
import numpy as np
from scipy.interpolate import RegularGridInterpolator

from . import _kernels
from .grid import FieldRole, Grid2D, Node, StencilSet, boundary_mask, build_grid, color_classes, interior_nodes
from .infinity_ops import OperatorKind, ScalarField, grad_field, residual_field
from .models import RhsKind, RhsModel
from ..utils.errors import InvalidParameterError, NumericalFailureError, OutOfDomainError

logger = logging.getLogger(__name__)

MIN_DAMPING = 1.0 / 16.0
RISING_SWEEPS_BEFORE_DAMPING = 10

Trace = Callable[[np.ndarray, np.ndarray], np.ndarray]


class SweepOrder(Enum):
    LEXICOGRAPHIC = "lexicographic"
    RED_BLACK = "red_black"


class WarmStart(Enum):
    BLEND = "blend"
    CASCADE = "cascade"


@dataclass(frozen=True)
class SolverConfig:
    """Scheme, tolerances and iteration controls for ``solve``"""
    tolerance: float = 1e-10              # sup-norm of the per-sweep update, u-units
    max_sweeps: int = 20000
    grad_floor: Optional[float] = None    # eps_g; None means h^2
    damping: float = 1.0                  # omega in (0, 1]
    sweep_order: SweepOrder = SweepOrder.RED_BLACK
    nonlinearity_lag: str = "frozen_sweep"
    deterministic: bool = True
    threads: Optional[int] = None
    warm_start: WarmStart = WarmStart.BLEND
    log_every: int = 1000                 # sweeps between DEBUG progress lines

    def __post_init__(self):
        if not (self.tolerance > 0 and math.isfinite(self.tolerance)):
            raise InvalidParameterError(f"tolerance must be > 0, got {self.tolerance}")
        if self.max_sweeps < 1:
            raise InvalidParameterError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.grad_floor is not None and not self.grad_floor >= 0:
            raise InvalidParameterError(f"grad_floor must be >= 0, got {self.grad_floor}")
        if not 0 < self.damping <= 1:
            raise InvalidParameterError(f"damping must lie in (0, 1], got {self.damping}")
        if self.nonlinearity_lag != "frozen_sweep":
            raise InvalidParameterError(f"unknown nonlinearity lag '{self.nonlinearity_lag}'")
        if self.threads is not None and self.threads < 1:
            raise InvalidParameterError(f"threads must be >= 1, got {self.threads}")

    def floor_for(self, grid: Grid2D) -> float:
        return grid.spacing ** 2 if self.grad_floor is None else self.grad_floor


@dataclass(frozen=True)
class SolveOutcome:
    """Result of one solve; non-convergence is reported here, not raised"""
    field: ScalarField
    sweeps_used: int
    final_update_norm: float
    final_residual_sup: float             # defect with the solver's gradient floor
    converged: bool
    tolerance: float
    stencil_width: int
    damping: float                        # omega in effect at the last sweep
    elapsed: float = 0.0                  # seconds
    unfloored_residual_sup: float = 0.0   # plain defect, no floor

    @property
    def grid(self) -> Grid2D:
        return self.field.grid


@dataclass(frozen=True)
class BoundaryData:
    """Closed-form Dirichlet trace g, evaluated on the lattice boundary ring."""
    trace: Trace = field(repr=False, compare=False)
    description: str = "custom"

    def evaluate(self, grid: Grid2D) -> np.ndarray:
        """Trace values at every node; only the boundary ring is used as data."""
        X, Y = grid.coordinates()
        values = np.asarray(self.trace(X, Y), dtype=float)
        if values.shape != X.shape:
            values = np.broadcast_to(values, X.shape).astype(float)
        if not np.all(np.isfinite(values[boundary_mask(grid)])):
            raise InvalidParameterError(f"boundary trace '{self.description}' is not finite on the boundary")
        return values

    @classmethod
    def constant(cls, c: float) -> 'BoundaryData':
        c = float(c)
        return cls(lambda X, Y: np.full(np.shape(X), c), f"constant({c!r})")

    @classmethod
    def affine(cls, p: Tuple[float, float], c: float = 0.0) -> 'BoundaryData':
        p0, p1, c = float(p[0]), float(p[1]), float(c)
        return cls(lambda X, Y: p0 * X + p1 * Y + c, f"affine(p=({p0!r}, {p1!r}), c={c!r})")

    @classmethod
    def aronsson(cls, a: Sequence[float] = (1.0, -1.0)) -> 'BoundaryData':
        a1, a2 = (float(v) for v in a)
        if abs(a1 ** 3 + a2 ** 3) > 1e-12:
            raise InvalidParameterError(f"Aronsson coefficients need a1^3 + a2^3 = 0, got {a}")
        return cls(lambda X, Y: a1 * np.abs(X) ** (4.0 / 3.0) + a2 * np.abs(Y) ** (4.0 / 3.0),
                   f"aronsson(a=({a1!r}, {a2!r}))")

    @classmethod
    def custom_odd(cls, slope: float = 1.0) -> 'BoundaryData':
        """g = slope * x1, odd under x1 -> -x1."""
        slope = float(slope)
        return cls(lambda X, Y: slope * X, f"custom_odd(slope={slope!r})")

    @classmethod
    def ramp(cls, slope: float = 1.0, shift: float = 0.0) -> 'BoundaryData':
        """g = slope * max(x1 - shift, 0): nonnegative, vanishing on part of the boundary."""
        slope, shift = float(slope), float(shift)
        if slope < 0:
            raise InvalidParameterError(f"ramp slope must be >= 0, got {slope}")
        return cls(lambda X, Y: slope * np.maximum(X - shift, 0.0), f"ramp(slope={slope!r}, shift={shift!r})")

    @classmethod
    def radial(cls, K: float, sigma: float, center: Tuple[float, float] = (0.0, 0.0)) -> 'BoundaryData':
        K, sigma = float(K), float(sigma)
        cx, cy = float(center[0]), float(center[1])
        return cls(lambda X, Y: K * np.hypot(X - cx, Y - cy) ** sigma, f"radial(K={K!r}, sigma={sigma!r})")

    @classmethod
    def random(cls, seed: int, modes: int = 4, amplitude: float = 1.0) -> 'BoundaryData':
        """Seeded smooth trace: a short Fourier series in the polar angle."""
        if modes < 1:
            raise InvalidParameterError(f"modes must be >= 1, got {modes}")
        rng = np.random.default_rng(seed)
        offset = rng.normal()
        cos_c = rng.normal(size=modes)
        sin_c = rng.normal(size=modes)
        k = np.arange(1, modes + 1)

        def trace(X, Y):
            theta = np.arctan2(Y, X)[..., None]
            series = (cos_c * np.cos(k * theta) + sin_c * np.sin(k * theta)) / k
            return amplitude * (offset + series.sum(axis=-1))

        return cls(trace, f"random(seed={seed}, modes={modes})")

    @classmethod
    def from_oracle(cls, oracle) -> 'BoundaryData':
        return cls(oracle.evaluate, f"oracle({oracle.label()})")


def coons_blend(grid: Grid2D, boundary_values: np.ndarray) -> np.ndarray:
    """
    Transfinite bilinear blend of the boundary ring into the interior.

    Written as edge + s * (opposite - edge) so constant data is reproduced exactly.
    """
    n = grid.n_per_side
    b = np.asarray(boundary_values, dtype=float)
    s = (np.arange(n) / (n - 1))[:, None]
    t = (np.arange(n) / (n - 1))[None, :]

    west, east = b[0, :][None, :], b[-1, :][None, :]
    south, north = b[:, 0][:, None], b[:, -1][:, None]
    along_i = west + s * (east - west)
    along_j = south + t * (north - south)
    c00, c10, c01, c11 = b[0, 0], b[-1, 0], b[0, -1], b[-1, -1]
    corners = c00 + s * (c10 - c00) + t * (c01 - c00) + s * t * (c11 - c10 - c01 + c00)

    blend = along_i + along_j - corners
    mask = boundary_mask(grid)
    blend[mask] = b[mask]
    return blend


def _scaled_rhs(u: np.ndarray, grid: Grid2D, stencil: StencilSet, model: RhsModel, weights,
                kind: OperatorKind, floor: float) -> np.ndarray:
    """G(x, u, g_h) / max(g_h^(2 - gamma'), eps_g), frozen for one sweep."""
    g = grad_field(ScalarField(grid, u), stencil)
    rhs = model.evaluate_array(weights, u, g)
    power = kind.gradient_power
    if power > 0:
        rhs = rhs / np.maximum(np.power(g, power), floor)
    return np.ascontiguousarray(rhs)


def local_update(field: ScalarField, stencil: StencilSet, node: Node, model: RhsModel,
                 kind: OperatorKind, config: SolverConfig) -> float:
    """Damped center value solving L^N_h u* = G~ with the neighbors frozen."""
    grid = field.grid
    if not grid.contains(node) or grid.is_boundary(node):
        raise OutOfDomainError(f"node {node} is not an interior lattice node")
    i, j = int(node[0]), int(node[1])
    arms = stencil.arm_lengths(grid)
    u = field.values

    g = _kernels.grad_at(u, i, j, stencil.offsets, arms)
    rhs = model.evaluate(grid.coordinate(node), float(u[i, j]), float(g))
    if kind.gradient_power > 0:
        rhs = rhs / max(g ** kind.gradient_power, config.floor_for(grid))
    return float(_kernels.update_at(u, i, j, stencil.offsets, arms, rhs, config.damping, model.update_rule))


def interpolate_field(field: ScalarField, grid: Grid2D) -> np.ndarray:
    """Bilinear transfer of a field onto another lattice of the same square."""
    source = field.grid
    axis = -source.half_width + np.arange(source.n_per_side) * source.spacing
    interpolator = RegularGridInterpolator((axis, axis), field.values)
    X, Y = grid.coordinates()
    points = np.clip(np.stack([X.ravel(), Y.ravel()], axis=1), axis[0], axis[-1])
    return interpolator(points).reshape(X.shape)


def _cascade_initial(grid: Grid2D, stencil: StencilSet, model: RhsModel, boundary: BoundaryData,
                     kind: OperatorKind, config: SolverConfig) -> Optional[np.ndarray]:
    """Interpolated solution from the next coarser grid, or None when none exists."""
    n = grid.n_per_side
    if (n - 1) % 4 != 0 or (n - 1) // 2 + 1 < 17:
        return None
    coarse_grid = build_grid((n - 1) // 2 + 1, grid.half_width)
    coarse = solve(coarse_grid, stencil, model, boundary, kind, config)
    return interpolate_field(coarse.field, grid)


def solve(grid: Grid2D, stencil: StencilSet, model: RhsModel, boundary: BoundaryData,
          kind: OperatorKind, config: SolverConfig, initial: Optional[ScalarField] = None) -> SolveOutcome:
    """
    Relax to a discrete solution of Delta_inf u = G with u = g on the boundary ring.

    The initial guess is ``initial`` when given, the coarse-grid cascade when
    configured, and the Coons blend of the boundary data otherwise. Obstacle
    models project every update onto u >= 0; dead-core updates never step below
    zero unless the unforced local root does. ``final_residual_sup`` is measured
    with the same gradient floor as the relaxation; ``unfloored_residual_sup``
    is the plain defect of ``residual_field``.
    """
    if config.threads is None:
        return _relax(grid, stencil, model, boundary, kind, config, initial)
    previous = nb.get_num_threads()
    nb.set_num_threads(min(config.threads, nb.config.NUMBA_NUM_THREADS))
    try:
        return _relax(grid, stencil, model, boundary, kind, config, initial)
    finally:
        nb.set_num_threads(previous)


def _relax(grid: Grid2D, stencil: StencilSet, model: RhsModel, boundary: BoundaryData,
           kind: OperatorKind, config: SolverConfig, initial: Optional[ScalarField]) -> SolveOutcome:
    started = time.perf_counter()

    trace = boundary.evaluate(grid)
    mask = boundary_mask(grid)
    if initial is not None:
        if initial.grid != grid:
            raise InvalidParameterError("initial field lives on a different grid")
        u = initial.values.copy()
    else:
        u = None
        if config.warm_start == WarmStart.CASCADE:
            u = _cascade_initial(grid, stencil, model, boundary, kind, config)
        if u is None:
            u = coons_blend(grid, trace)
    u[mask] = trace[mask]
    rule = model.update_rule
    if model.is_obstacle:
        u = np.maximum(u, 0.0)
    u = np.ascontiguousarray(u, dtype=np.float64)

    offsets = stencil.offsets
    arms = stencil.arm_lengths(grid)
    floor = config.floor_for(grid)
    weights = model.sample_weights(grid)
    frozen_rhs = model.kind == RhsKind.ZERO
    rhs = np.zeros_like(u) if frozen_rhs else None

    if config.sweep_order == SweepOrder.RED_BLACK:
        classes = color_classes(grid)
        deltas = [np.empty(len(c)) for c in classes]
    else:
        order = interior_nodes(grid)

    logger.info("solve n=%d W=%d model=%s operator=%s boundary=%s",
                grid.n_per_side, stencil.width, model.kind.value, kind.label(), boundary.description)

    damping = config.damping
    previous = math.inf
    rising = 0
    delta = math.inf
    converged = False
    sweeps = 0
    for sweeps in range(1, config.max_sweeps + 1):
        if not frozen_rhs:
            rhs = _scaled_rhs(u, grid, stencil, model, weights, kind, floor)

        if config.sweep_order == SweepOrder.RED_BLACK:
            delta = 0.0
            for nodes, buffer in zip(classes, deltas):
                if len(nodes):
                    _kernels.relax_class(u, rhs, nodes, offsets, arms, damping, rule, buffer)
                    delta = max(delta, float(buffer.max()))
        else:
            delta = float(_kernels.relax_sweep(u, rhs, order, offsets, arms, damping, rule))

        if not math.isfinite(delta) or not np.all(np.isfinite(u)):
            raise NumericalFailureError(f"non-finite values after sweep {sweeps}")

        if delta <= config.tolerance:
            converged = True
            break

        rising = rising + 1 if delta > previous else 0
        previous = delta
        if rising >= RISING_SWEEPS_BEFORE_DAMPING and damping > MIN_DAMPING:
            damping = max(damping / 2.0, MIN_DAMPING)
            rising = 0
            logger.warning("update norm rose for %d sweeps; damping lowered to %g",
                           RISING_SWEEPS_BEFORE_DAMPING, damping)

        if sweeps % config.log_every == 0:
            logger.debug("sweep %d: update %.3e", sweeps, delta)

    solution = ScalarField(grid, u, FieldRole.SOLUTION)
    residual = residual_field(solution, stencil, model, kind, floor)
    residual_sup = float(np.abs(residual.values).max())
    unfloored = residual_field(solution, stencil, model, kind)
    unfloored_sup = float(np.abs(unfloored.values).max())
    elapsed = time.perf_counter() - started

    if converged:
        logger.info("converged after %d sweeps (update %.3e, residual %.3e)", sweeps, delta, residual_sup)
    else:
        logger.warning("no convergence within %d sweeps (update %.3e, tolerance %.1e)",
                       config.max_sweeps, delta, config.tolerance)

    return SolveOutcome(
        field=solution,
        sweeps_used=sweeps,
        final_update_norm=float(delta),
        final_residual_sup=residual_sup,
        unfloored_residual_sup=unfloored_sup,
        converged=converged,
        tolerance=config.tolerance,
        stencil_width=stencil.width,
        damping=damping,
        elapsed=elapsed,
    )


def comparison_check(u: SolveOutcome, v: SolveOutcome) -> bool:
    """True iff u <= v + 2 (tol_u + tol_v) at every node."""
    if u.grid != v.grid:
        raise InvalidParameterError("comparison needs both solutions on the same grid")
    if u.stencil_width != v.stencil_width:
        raise InvalidParameterError("comparison needs both solutions on the same stencil")
    if not (u.converged and v.converged):
        logger.warning("comparison_check on a non-converged outcome")
    slack = 2.0 * (u.tolerance + v.tolerance)
    return bool(np.all(u.field.values <= v.field.values + slack))


def max_principle_check(outcome: SolveOutcome) -> bool:
    """Interior values stay within the boundary extremes up to 2 * tolerance."""
    values = outcome.field.values
    mask = boundary_mask(outcome.grid)
    slack = 2.0 * outcome.tolerance
    inner, ring = values[~mask], values[mask]
    return bool(inner.max() <= ring.max() + slack and inner.min() >= ring.min() - slack)


@dataclass(frozen=True)
class LipschitzCertificate:
    """Discrete Lipschitz seminorm on the half-square next to its data bound."""
    seminorm: float
    sup_u: float
    rhs_cube_root: float                  # sup |G|^(1/3) over interior nodes

    @property
    def data_bound(self) -> float:
        return self.sup_u + self.rhs_cube_root

    @property
    def ratio(self) -> float:
        """seminorm / data_bound, the empirically calibrated constant."""
        return self.seminorm / self.data_bound if self.data_bound > 0 else 0.0


def lipschitz_certificate(outcome: SolveOutcome, model: RhsModel, stencil: StencilSet) -> LipschitzCertificate:
    """Max of |u(x) - u(y)| / |x - y| over stencil-neighbor pairs inside [-L/2, L/2]^2."""
    grid = outcome.grid
    u = outcome.field.values
    X, Y = grid.coordinates()
    half = 0.5 * grid.half_width * (1.0 + 1e-12)
    inside = (np.abs(X) <= half) & (np.abs(Y) <= half)
    n = grid.n_per_side

    seminorm = 0.0
    for (p, q), d in zip(stencil.directions, stencil.arm_lengths(grid)):
        # pairs (x, x + (p, q) h); antipodal offsets give the same pairs
        i0, i1 = max(0, -p), min(n, n - p)
        j0, j1 = max(0, -q), min(n, n - q)
        here = (slice(i0, i1), slice(j0, j1))
        there = (slice(i0 + p, i1 + p), slice(j0 + q, j1 + q))
        both = inside[here] & inside[there]
        if np.any(both):
            diff = np.abs(u[there] - u[here])[both]
            seminorm = max(seminorm, float(diff.max() / d))

    interior = ~boundary_mask(grid)
    g = grad_field(outcome.field, stencil)
    rhs = model.evaluate_array(model.sample_weights(grid), u, g)
    rhs_sup = float(np.abs(rhs[interior]).max()) if np.any(interior) else 0.0
    return LipschitzCertificate(seminorm, float(np.abs(u).max()), rhs_sup ** (1.0 / 3.0))
