"""
Exact Reference Solutions
Closed-form fields with known infinity-Laplacian, used to validate the
operators, the solver and the analysis pipeline, and the refinement study
that measures consistency and convergence against them.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .grid import FieldRole, Grid2D, StencilSet
from .infinity_ops import OperatorKind, ScalarField, inf_laplacian_field
from .models import RhsModel
from .solver import BoundaryData, SolverConfig, interpolate_field, solve
from ..utils.errors import InvalidParameterError, SingularPointError

logger = logging.getLogger(__name__)

ARONSSON_TOL = 1e-12
COLLAR_FACTOR = 2


class OracleKind(Enum):
    ARONSSON = "aronsson"
    RADIAL_MONOMIAL = "radial_monomial"
    AFFINE = "affine"
    CONE = "cone"


@dataclass(frozen=True)
class OracleField:
    """An exact field together with its singular set."""
    kind: OracleKind
    coefficients: Tuple[float, ...] = ()  # aronsson a_i
    K: float = 1.0
    sigma: float = 1.0
    center: Tuple[float, float] = (0.0, 0.0)
    slope: Tuple[float, float] = (0.0, 0.0)
    offset: float = 0.0

    def __post_init__(self):
        if self.kind == OracleKind.ARONSSON:
            if len(self.coefficients) != 2:
                raise InvalidParameterError("the planar Aronsson field takes two coefficients")
            cubes = sum(a ** 3 for a in self.coefficients)
            if abs(cubes) > ARONSSON_TOL:
                raise InvalidParameterError(f"Aronsson coefficients need sum a_i^3 = 0, got {cubes!r}")
        elif self.kind == OracleKind.RADIAL_MONOMIAL:
            if not self.K >= 0:
                raise InvalidParameterError(f"radial K must be >= 0, got {self.K}")
            if not self.sigma > 1:
                raise InvalidParameterError(f"radial sigma must be > 1, got {self.sigma}")

    @classmethod
    def aronsson(cls, a: Sequence[float] = (1.0, -1.0)) -> 'OracleField':
        return cls(OracleKind.ARONSSON, coefficients=tuple(float(v) for v in a))

    @classmethod
    def radial_monomial(cls, K: float, sigma: float, center: Tuple[float, float] = (0.0, 0.0)) -> 'OracleField':
        return cls(OracleKind.RADIAL_MONOMIAL, K=float(K), sigma=float(sigma),
                   center=(float(center[0]), float(center[1])))

    @classmethod
    def affine(cls, p: Tuple[float, float], c: float = 0.0) -> 'OracleField':
        return cls(OracleKind.AFFINE, slope=(float(p[0]), float(p[1])), offset=float(c))

    @classmethod
    def cone(cls, center: Tuple[float, float] = (0.0, 0.0), K: float = 1.0) -> 'OracleField':
        return cls(OracleKind.CONE, K=float(K), center=(float(center[0]), float(center[1])))

    def label(self) -> str:
        if self.kind == OracleKind.ARONSSON:
            return f"aronsson{self.coefficients}"
        if self.kind == OracleKind.RADIAL_MONOMIAL:
            return f"radial(K={self.K!r}, sigma={self.sigma!r})"
        if self.kind == OracleKind.AFFINE:
            return f"affine(p={self.slope}, c={self.offset!r})"
        return f"cone(center={self.center})"

    def _radius(self, X, Y) -> np.ndarray:
        return np.hypot(np.asarray(X, dtype=float) - self.center[0], np.asarray(Y, dtype=float) - self.center[1])

    def evaluate(self, X, Y) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if self.kind == OracleKind.ARONSSON:
            a1, a2 = self.coefficients
            return a1 * np.abs(X) ** (4.0 / 3.0) + a2 * np.abs(Y) ** (4.0 / 3.0)
        if self.kind == OracleKind.RADIAL_MONOMIAL:
            return self.K * self._radius(X, Y) ** self.sigma
        if self.kind == OracleKind.AFFINE:
            return self.slope[0] * X + self.slope[1] * Y + self.offset
        return self.K * self._radius(X, Y)

    def at(self, point: Tuple[float, float]) -> float:
        return float(self.evaluate(np.array(point[0]), np.array(point[1])))

    def singular_distance(self, X, Y) -> np.ndarray:
        """Distance to the set where the closed-form derivatives break down."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if self.kind == OracleKind.ARONSSON:
            a1, a2 = self.coefficients
            dist = np.full(X.shape, np.inf)
            if a1 != 0:
                dist = np.minimum(dist, np.abs(X))
            if a2 != 0:
                dist = np.minimum(dist, np.abs(Y))
            return dist
        if self.kind == OracleKind.AFFINE:
            return np.full(X.shape, np.inf)
        return self._radius(X, Y)

    def gradient_norm(self, X, Y) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if self.kind == OracleKind.ARONSSON:
            a1, a2 = self.coefficients
            return (4.0 / 3.0) * np.hypot(a1 * np.abs(X) ** (1.0 / 3.0), a2 * np.abs(Y) ** (1.0 / 3.0))
        if self.kind == OracleKind.RADIAL_MONOMIAL:
            return self.K * self.sigma * self._radius(X, Y) ** (self.sigma - 1.0)
        if self.kind == OracleKind.AFFINE:
            return np.full(X.shape, math.hypot(*self.slope))
        return np.full(X.shape, abs(self.K))

    def operator_array(self, X, Y, kind: Optional[OperatorKind] = None) -> np.ndarray:
        """Exact |Du|^(-gamma') Delta_inf u; NaN on the singular set."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        singular = self.singular_distance(X, Y) <= 0.0
        if self.kind == OracleKind.RADIAL_MONOMIAL:
            with np.errstate(divide='ignore', invalid='ignore'):
                r = self._radius(X, Y)
                direct = self.K ** 3 * self.sigma ** 3 * (self.sigma - 1.0) * r ** (3.0 * self.sigma - 4.0)
        elif self.kind == OracleKind.ARONSSON:
            direct = np.full(X.shape, (64.0 / 81.0) * sum(a ** 3 for a in self.coefficients))
        else:
            direct = np.zeros(X.shape)

        value = direct
        if kind is not None and kind.effective_gamma > 0:
            with np.errstate(divide='ignore', invalid='ignore'):
                grad = self.gradient_norm(X, Y)
                value = np.where(direct == 0.0, 0.0, direct / grad ** kind.effective_gamma)
        return np.where(singular, np.nan, value)

    def analytic_inf_laplacian(self, point: Tuple[float, float], kind: Optional[OperatorKind] = None) -> float:
        """Exact operator value at a point off the singular set."""
        X, Y = np.array(float(point[0])), np.array(float(point[1]))
        if float(self.singular_distance(X, Y)) <= 0.0:
            raise SingularPointError(f"{point} lies on the singular set of {self.label()}")
        return float(self.operator_array(X, Y, kind))


def sample(oracle: OracleField, grid: Grid2D) -> ScalarField:
    """Node-wise exact evaluation."""
    X, Y = grid.coordinates()
    return ScalarField(grid, oracle.evaluate(X, Y), FieldRole.ORACLE)


def analytic_inf_laplacian(oracle: OracleField, point: Tuple[float, float],
                           kind: Optional[OperatorKind] = None) -> float:
    return oracle.analytic_inf_laplacian(point, kind)


@dataclass(frozen=True)
class RefinementRow:
    n_per_side: int
    h: float
    sup_residual: float
    sup_error: float                      # NaN when no solve was requested
    min_singular_distance: float          # closest sampled node to the singular set
    sweeps_used: int = 0
    converged: bool = True


def _measurement_mask(oracle: OracleField, grid: Grid2D, stencil: StencilSet) -> Tuple[np.ndarray, np.ndarray]:
    """Interior nodes with full stencils that stay outside the 2W h singular collar."""
    n = grid.n_per_side
    W = stencil.width
    X, Y = grid.coordinates()
    dist = oracle.singular_distance(X, Y)

    mask = np.zeros((n, n), dtype=bool)
    mask[W:n - W, W:n - W] = True
    mask &= dist > COLLAR_FACTOR * W * grid.spacing
    return mask, dist


def refinement_study(oracle: OracleField, model: RhsModel, grids: Sequence[Grid2D], stencil: StencilSet,
                     kind: OperatorKind, solve_config: Optional[SolverConfig] = None) -> List[RefinementRow]:
    """
    Consistency (and with ``solve_config`` convergence) of the scheme on an oracle.

    Each row reports sup |discrete operator - exact operator| over the measured
    nodes and, in solve mode, sup |u_h - oracle| of a solve with the oracle's
    trace as Dirichlet data, warm-started from the previous grid.
    """
    if len(grids) < 3:
        raise InvalidParameterError(f"refinement needs at least 3 grids, got {len(grids)}")
    spacings = [g.spacing for g in grids]
    if any(b >= a for a, b in zip(spacings, spacings[1:])):
        raise InvalidParameterError("refinement grids must have strictly decreasing spacing")

    rows = []
    previous = None
    boundary = BoundaryData.from_oracle(oracle)
    for grid in grids:
        X, Y = grid.coordinates()
        exact = sample(oracle, grid)
        mask, dist = _measurement_mask(oracle, grid, stencil)
        if not np.any(mask):
            raise InvalidParameterError(f"no measurable nodes on the {grid.n_per_side}^2 grid")

        discrete = inf_laplacian_field(exact, stencil, kind)
        target = oracle.operator_array(X, Y, kind)
        sup_residual = float(np.abs(discrete - target)[mask].max())

        sup_error = float('nan')
        sweeps, converged = 0, True
        if solve_config is not None:
            initial = None
            if previous is not None:
                initial = ScalarField(grid, interpolate_field(previous.field, grid))
            outcome = solve(grid, stencil, model, boundary, kind, solve_config, initial=initial)
            sup_error = float(np.abs(outcome.field.values - exact.values)[mask].max())
            sweeps, converged = outcome.sweeps_used, outcome.converged
            previous = outcome

        row = RefinementRow(grid.n_per_side, grid.spacing, sup_residual, sup_error,
                            float(dist[mask].min()), sweeps, converged)
        logger.info("refinement n=%d h=%.5g residual=%.3e error=%.3e",
                    row.n_per_side, row.h, row.sup_residual, row.sup_error)
        rows.append(row)
    return rows


def refinement_table_frame(rows: Sequence[RefinementRow]) -> pd.DataFrame:
    """Rows as a DataFrame with columns h, sup_residual, sup_error first."""
    columns = ['h', 'sup_residual', 'sup_error', 'n_per_side', 'min_singular_distance', 'sweeps_used', 'converged']
    return pd.DataFrame([vars(r) for r in rows], columns=columns)
