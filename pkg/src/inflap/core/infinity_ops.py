"""
Discrete Infinity-Laplacian Operators
Gradient surrogate, normalized and direct operators, the gamma family, and
residuals of Delta_inf u = G(x, u, Du).

For a node x with stencil arms x + d_k e_k:
  - g_h(x) = (u(x+*) - u(x-*)) / (d+ + d-), where x+* / x-* maximize / minimize
    the slope (u(x + d e) - u(x)) / d;
  - L^N_h u(x) = max_k min_{l != k} (2 / (d_k + d_l)) [(u_k - u)/d_k + (u_l - u)/d_l];
  - direct: g_h^2 L^N_h, normalized: L^N_h, gamma family: g_h^(2 - gamma) L^N_h.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from . import _kernels
from .grid import FieldRole, Grid2D, Node, StencilSet
from ..utils.errors import InvalidParameterError, OutOfDomainError


class OperatorVariant(Enum):
    DIRECT = "direct"
    NORMALIZED = "normalized"
    GAMMA_FAMILY = "gamma_family"


@dataclass(frozen=True)
class OperatorKind:
    """Which member of the |Du|^(-gamma) Delta_inf family is discretized."""
    variant: OperatorVariant
    gamma: float = 0.0

    def __post_init__(self):
        if self.variant == OperatorVariant.GAMMA_FAMILY and not 0.0 <= self.gamma <= 2.0:
            raise InvalidParameterError(f"gamma must lie in [0, 2], got {self.gamma}")

    @classmethod
    def direct(cls) -> 'OperatorKind':
        return cls(OperatorVariant.DIRECT, 0.0)

    @classmethod
    def normalized(cls) -> 'OperatorKind':
        return cls(OperatorVariant.NORMALIZED, 2.0)

    @classmethod
    def gamma_family(cls, gamma: float) -> 'OperatorKind':
        return cls(OperatorVariant.GAMMA_FAMILY, float(gamma))

    @classmethod
    def parse(cls, text: str) -> 'OperatorKind':
        """Parse 'direct', 'normalized' or 'gamma:<value>'."""
        text = text.strip().lower()
        if text == 'direct':
            return cls.direct()
        if text == 'normalized':
            return cls.normalized()
        if text.startswith('gamma:'):
            try:
                return cls.gamma_family(float(text.split(':', 1)[1]))
            except ValueError:
                pass
        raise InvalidParameterError(f"unknown operator '{text}'")

    @property
    def effective_gamma(self) -> float:
        """gamma' with direct = 0 and normalized = 2."""
        if self.variant == OperatorVariant.DIRECT:
            return 0.0
        if self.variant == OperatorVariant.NORMALIZED:
            return 2.0
        return self.gamma

    @property
    def gradient_power(self) -> float:
        return 2.0 - self.effective_gamma

    def label(self) -> str:
        if self.variant == OperatorVariant.GAMMA_FAMILY:
            return f"gamma:{self.gamma!r}"
        return self.variant.value


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Grid function: one finite value per lattice node."""
    grid: Grid2D
    values: np.ndarray
    role: FieldRole = FieldRole.SOLUTION

    def __post_init__(self):
        n = self.grid.n_per_side
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != (n, n):
            raise InvalidParameterError(f"field must have shape {(n, n)}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("field values must all be finite")
        object.__setattr__(self, 'values', values)

    def at(self, node: Node) -> float:
        return float(self.values[node])

    def with_values(self, values: np.ndarray, role: Optional[FieldRole] = None) -> 'ScalarField':
        return ScalarField(self.grid, values, self.role if role is None else role)


@dataclass(frozen=True)
class LocalStencilSample:
    """Stencil values around one node and the extremal-slope directions."""
    center_value: float
    pairs: List[Tuple[float, float, float]]
    argmax: int
    argmin: int


def _require_interior(field: ScalarField, node: Node) -> Tuple[int, int]:
    grid = field.grid
    if not grid.contains(node) or grid.is_boundary(node):
        raise OutOfDomainError(f"node {node} is not an interior lattice node")
    return int(node[0]), int(node[1])


def _kernel_args(field: ScalarField, stencil: StencilSet):
    return stencil.offsets, stencil.arm_lengths(field.grid)


def sample_stencil(field: ScalarField, stencil: StencilSet, node: Node) -> LocalStencilSample:
    """Values at x + d e and x - d e per direction; NaN marks arms off the lattice."""
    i, j = _require_interior(field, node)
    offsets, arms = _kernel_args(field, stencil)
    u = field.values
    n = field.grid.n_per_side

    def value(ii: int, jj: int) -> float:
        return float(u[ii, jj]) if 0 <= ii < n and 0 <= jj < n else float('nan')

    pairs = []
    for (p, q), d in zip(offsets, arms):
        pairs.append((value(i + p, j + q), value(i - p, j - q), float(d)))
    kmax, kmin = _kernels.slope_extremes(u, i, j, offsets, arms)
    return LocalStencilSample(float(u[i, j]), pairs, int(kmax), int(kmin))


def grad_magnitude(field: ScalarField, stencil: StencilSet, node: Node) -> float:
    """Chord surrogate g_h(x) >= 0 for |Du(x)|."""
    i, j = _require_interior(field, node)
    offsets, arms = _kernel_args(field, stencil)
    return float(_kernels.grad_at(field.values, i, j, offsets, arms))


def normalized_inf_laplacian(field: ScalarField, stencil: StencilSet, node: Node) -> float:
    """L^N_h u(x), the discrete normalized infinity-Laplacian."""
    i, j = _require_interior(field, node)
    offsets, arms = _kernel_args(field, stencil)
    return float(_kernels.normalized_at(field.values, i, j, offsets, arms))


def _combine(g, normalized, kind: OperatorKind):
    if kind.variant == OperatorVariant.DIRECT:
        return g * g * normalized
    if kind.variant == OperatorVariant.NORMALIZED:
        return normalized
    return np.power(g, kind.gradient_power) * normalized


def inf_laplacian(field: ScalarField, stencil: StencilSet, node: Node, kind: OperatorKind) -> float:
    """g_h^(2 - gamma') L^N_h u(x) for the requested operator kind."""
    i, j = _require_interior(field, node)
    offsets, arms = _kernel_args(field, stencil)
    g = _kernels.grad_at(field.values, i, j, offsets, arms)
    normalized = _kernels.normalized_at(field.values, i, j, offsets, arms)
    return float(_combine(g, normalized, kind))


def grad_field(field: ScalarField, stencil: StencilSet) -> np.ndarray:
    """g_h at every interior node; 0 on the lattice boundary."""
    offsets, arms = _kernel_args(field, stencil)
    return _kernels.grad_field(field.values, offsets, arms)


def normalized_field(field: ScalarField, stencil: StencilSet) -> np.ndarray:
    offsets, arms = _kernel_args(field, stencil)
    return _kernels.normalized_field(field.values, offsets, arms)


def inf_laplacian_field(field: ScalarField, stencil: StencilSet, kind: OperatorKind) -> np.ndarray:
    """Operator value at every interior node; 0 on the lattice boundary."""
    return _combine(grad_field(field, stencil), normalized_field(field, stencil), kind)


def residual_field(field: ScalarField, stencil: StencilSet, model, kind: OperatorKind,
                   floor: Optional[float] = None) -> ScalarField:
    """
    Pointwise defect inf_laplacian(u) - G(x, u, g_h) at interior nodes.

    With ``floor`` the gradient factor is max(g_h^(2 - gamma'), floor), the
    regularized equation the relaxation solver drives to zero; it equals the
    plain defect wherever g_h^(2 - gamma') >= floor.

    Obstacle models use the projected form: the plain defect where u > 0 and
    its positive part on the contact set u = 0.
    """
    g = grad_field(field, stencil)
    normalized = normalized_field(field, stencil)
    if floor is not None and kind.gradient_power > 0:
        operator = np.maximum(np.power(g, kind.gradient_power), floor) * normalized
    else:
        operator = _combine(g, normalized, kind)
    rhs = model.evaluate_array(model.sample_weights(field.grid), field.values, g)
    residual = operator - rhs
    if model.is_obstacle:
        contact = field.values <= 0.0
        residual = np.where(contact, np.maximum(residual, 0.0), residual)

    residual[0, :] = residual[-1, :] = 0.0
    residual[:, 0] = residual[:, -1] = 0.0
    return ScalarField(field.grid, residual, FieldRole.RESIDUAL)
