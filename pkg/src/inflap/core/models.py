"""
Right-Hand-Side Models
The forcing family G(x, u, p) of Delta_inf u = G, its admissibility rules, and
the closed-form growth exponents attached to each member.

Growth class: G(x, t, xi) <~ |f(x)| |t|^m min{1, |xi|^kappa} with
(m, kappa) in S = {[0, 3) x [0, 4) : m < 3 - kappa}. Parameters are validated
when a model is built, never when it is evaluated.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .grid import Grid2D
from ..utils.errors import InvalidParameterError
from ..utils.geometry import Point2, Segment2, calculate_distance, distance_to_set

# relative slack when a weight counts as vanishing at a point
_VANISH_TOL = 1e-12


class WeightForm(Enum):
    CONSTANT = "constant"
    POWER_OF_RADIUS = "power_of_radius"
    DIST_TO_SET = "dist_to_set"


class RhsKind(Enum):
    ZERO = "zero"
    GENERAL = "general"
    DEAD_CORE = "dead_core"
    HENON_SUM = "henon_sum"
    OBSTACLE = "obstacle"


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidParameterError(message)


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


def positive_power(u: np.ndarray, exponent: float) -> np.ndarray:
    """u_+^exponent, zero wherever u <= 0 (also for exponent 0)."""
    positive = np.maximum(u, 0.0)
    return np.where(u > 0.0, np.power(positive, exponent), 0.0)


@dataclass(frozen=True)
class WeightSpec:
    """
    Weight f(x): c, c |x - x_c|^beta, or c dist(x, F)^beta.

    F is a finite union of points and segments.
    """
    form: WeightForm = WeightForm.CONSTANT
    amplitude: float = 1.0
    exponent: float = 0.0
    center: Point2 = (0.0, 0.0)
    points: Tuple[Point2, ...] = ()
    segments: Tuple[Segment2, ...] = ()

    def __post_init__(self):
        _check(_finite(self.amplitude, self.exponent), "weight parameters must be finite")
        _check(self.amplitude >= 0, f"weight amplitude must be >= 0, got {self.amplitude}")
        _check(self.exponent >= 0, f"weight exponent must be >= 0, got {self.exponent}")
        object.__setattr__(self, 'center', tuple(float(v) for v in self.center))
        object.__setattr__(self, 'points', tuple(tuple(float(v) for v in p) for p in self.points))
        object.__setattr__(self, 'segments', tuple(
            tuple(tuple(float(v) for v in end) for end in s) for s in self.segments))
        if self.form == WeightForm.DIST_TO_SET:
            _check(bool(self.points or self.segments), "dist_to_set weight needs a point or segment")

    @classmethod
    def constant(cls, c: float = 1.0) -> 'WeightSpec':
        return cls(WeightForm.CONSTANT, float(c))

    @classmethod
    def power_of_radius(cls, c: float, beta: float, center: Point2 = (0.0, 0.0)) -> 'WeightSpec':
        return cls(WeightForm.POWER_OF_RADIUS, float(c), float(beta), center)

    @classmethod
    def dist_to_set(cls, c: float, beta: float, points: Sequence[Point2] = (),
                    segments: Sequence[Segment2] = ()) -> 'WeightSpec':
        return cls(WeightForm.DIST_TO_SET, float(c), float(beta),
                   points=tuple(points), segments=tuple(segments))

    def evaluate(self, x, y) -> np.ndarray:
        """Vectorized weight on coordinate arrays."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.form == WeightForm.CONSTANT:
            return np.full(x.shape, self.amplitude)
        if self.form == WeightForm.POWER_OF_RADIUS:
            dist = np.hypot(x - self.center[0], y - self.center[1])
        else:
            dist = distance_to_set(x, y, self.points, self.segments)
        return self.amplitude * np.power(dist, self.exponent)

    def at(self, point: Point2) -> float:
        return float(self.evaluate(np.array([point[0]]), np.array([point[1]]))[0])

    def lower_bound(self) -> float:
        """Infimum of the weight over the plane."""
        if self.form == WeightForm.CONSTANT or self.exponent == 0.0:
            return self.amplitude
        return 0.0

    def vanishing_exponent(self, point: Point2) -> Optional[float]:
        """beta when the weight vanishes at ``point`` like dist^beta, else None."""
        if self.form == WeightForm.CONSTANT or self.exponent == 0.0:
            return None
        scale = 1.0 + math.hypot(*point)
        if self.form == WeightForm.POWER_OF_RADIUS:
            dist = calculate_distance(point, self.center)
        else:
            dist = float(distance_to_set(np.array([point[0]]), np.array([point[1]]),
                                         self.points, self.segments)[0])
        return self.exponent if dist <= _VANISH_TOL * scale else None

    @classmethod
    def from_mapping(cls, data: Dict[str, object]) -> 'WeightSpec':
        return cls(WeightForm(data['form']), float(data.get('c', 1.0)), float(data.get('beta', 0.0)),
                   tuple(data.get('center', (0.0, 0.0))), tuple(data.get('points', ())),
                   tuple(data.get('segments', ())))

    def to_mapping(self) -> Dict[str, object]:
        return {
            'form': self.form.value,
            'c': self.amplitude,
            'beta': self.exponent,
            'center': self.center,
            'points': self.points,
            'segments': self.segments,
        }


@dataclass(frozen=True)
class HenonTerm:
    """One term c dist(x, F)^beta u_+^m min{1, |p|^kappa} + noise dist(x, F)^sigma."""
    c: float
    beta: float
    m: float
    kappa: float
    points: Tuple[Point2, ...] = ((0.0, 0.0),)
    segments: Tuple[Segment2, ...] = ()
    noise: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        _check(_finite(self.c, self.beta, self.m, self.kappa, self.noise, self.sigma),
               "Henon term parameters must be finite")
        _check(self.c >= 0, f"Henon coefficient must be >= 0, got {self.c}")
        _check(self.beta > 0, f"Henon beta must be > 0, got {self.beta}")
        _check(self.m >= 0 and self.kappa >= 0, "Henon exponents m, kappa must be >= 0")
        _check(0 <= self.m + self.kappa < 3, f"Henon terms need m + kappa in [0, 3), got {self.m + self.kappa}")
        _check(self.noise >= 0 and self.sigma >= 0, "noise amplitude and sigma must be >= 0")
        _check(bool(self.points or self.segments), "Henon term needs a set F")
        object.__setattr__(self, 'points', tuple(tuple(float(v) for v in p) for p in self.points))
        object.__setattr__(self, 'segments', tuple(
            tuple(tuple(float(v) for v in end) for end in s) for s in self.segments))

    def distance(self, x, y) -> np.ndarray:
        return distance_to_set(x, y, self.points, self.segments)

    def exponent_params(self) -> 'ExponentParams':
        return ExponentParams(self.m, self.kappa, beta=self.beta)


@dataclass(frozen=True)
class ExponentParams:
    """(m, kappa) with the optional weight vanishing order beta and operator gamma."""
    m: float
    kappa: float
    beta: Optional[float] = None
    gamma: Optional[float] = None

    @property
    def kappa_effective(self) -> float:
        return self.kappa + (self.gamma or 0.0)


def admissible(params: ExponentParams) -> bool:
    """(m, kappa) in S, with kappa + gamma in place of kappa when gamma is set."""
    values = [params.m, params.kappa]
    values += [v for v in (params.beta, params.gamma) if v is not None]
    if not _finite(*values):
        return False
    if params.gamma is not None and not 0.0 <= params.gamma <= 2.0:
        return False
    if params.beta is not None and params.beta < 0:
        return False
    kappa = params.kappa_effective
    return 0.0 <= params.m < 3.0 and 0.0 <= params.kappa and kappa < 4.0 and params.m < 3.0 - kappa


def _require_admissible(params: ExponentParams) -> None:
    if not admissible(params):
        raise InvalidParameterError(f"inadmissible exponent parameters {params}")


def alpha_exponent(params: ExponentParams) -> float:
    """alpha = (4 - kappa) / (3 - (m + kappa)), kappa -> kappa + gamma for the gamma family."""
    _require_admissible(params)
    kappa = params.kappa_effective
    return (4.0 - kappa) / (3.0 - (params.m + kappa))


def weighted_exponent(params: ExponentParams) -> float:
    """(4 - kappa + beta) / (3 - (m + kappa)) for weights vanishing like dist^beta."""
    _require_admissible(params)
    beta = params.beta if params.beta is not None else 0.0
    kappa = params.kappa_effective
    return (4.0 - kappa + beta) / (3.0 - (params.m + kappa))


def henon_min_exponent(terms: Sequence[ExponentParams],
                       sigmas: Optional[Sequence[Optional[float]]] = None) -> float:
    """min over terms of (4 + beta_i - kappa_i) / (3 - (m_i + kappa_i)) and (4 + sigma_i) / 3."""
    if not terms:
        raise InvalidParameterError("henon_min_exponent needs at least one term")
    if sigmas is not None and len(sigmas) != len(terms):
        raise InvalidParameterError("one sigma (or None) per term is required")

    candidates = []
    for idx, term in enumerate(terms):
        candidates.append(weighted_exponent(term))
        sigma = sigmas[idx] if sigmas is not None else None
        if sigma is not None:
            _check(sigma >= 0, f"sigma must be >= 0, got {sigma}")
            candidates.append((4.0 + sigma) / 3.0)
    return min(candidates)


def alpha_hat_cap(params: ExponentParams) -> float:
    """Upper end (1 + m) / (3 - (m + kappa)) of the improved C^{1, alpha_hat} range."""
    _require_admissible(params)
    return (1.0 + params.m) / (3.0 - (params.m + params.kappa_effective))


def nondegeneracy_constant(theta: float, alpha: float) -> float:
    """Cube root of theta / (alpha^3 (alpha - 1))."""
    _check(_finite(theta, alpha), "theta and alpha must be finite")
    _check(theta > 0, f"theta must be > 0, got {theta}")
    _check(alpha > 1, f"alpha must be > 1, got {alpha}")
    return (theta / (alpha ** 3 * (alpha - 1.0))) ** (1.0 / 3.0)


def deadcore_radial_constant(lam: float, gamma: float, weight_power: float = 0.0) -> Tuple[float, float]:
    """
    (sigma, K) such that K r^sigma solves Delta_inf u = lam r^alpha_w u_+^gamma.

    sigma = (4 + alpha_w) / (3 - gamma),
    K = (lam (3 - gamma)^4 / ((4 + alpha_w)^3 (1 + alpha_w + gamma)))^(1 / (3 - gamma)).
    """
    _check(_finite(lam, gamma, weight_power), "dead-core parameters must be finite")
    _check(lam > 0, f"lambda must be > 0, got {lam}")
    _check(0 <= gamma < 3, f"gamma must lie in [0, 3), got {gamma}")
    _check(weight_power >= 0, f"weight power must be >= 0, got {weight_power}")

    sigma = (4.0 + weight_power) / (3.0 - gamma)
    base = lam * (3.0 - gamma) ** 4 / ((4.0 + weight_power) ** 3 * (1.0 + weight_power + gamma))
    return sigma, base ** (1.0 / (3.0 - gamma))


@dataclass(frozen=True)
class RhsModel:
    """One member of the forcing family G(x, u, p)."""
    kind: RhsKind
    m: float = 0.0
    kappa: float = 0.0
    lam: float = 0.0
    gamma: float = 0.0
    weight: WeightSpec = field(default_factory=WeightSpec)
    terms: Tuple[HenonTerm, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'terms', tuple(self.terms))
        if self.kind == RhsKind.GENERAL:
            _check(admissible(ExponentParams(self.m, self.kappa)),
                   f"(m, kappa) = ({self.m}, {self.kappa}) is outside [0,3)x[0,4) with m < 3 - kappa")
        elif self.kind == RhsKind.DEAD_CORE:
            _check(_finite(self.lam, self.gamma), "dead-core parameters must be finite")
            _check(self.lam > 0, f"lambda must be > 0, got {self.lam}")
            _check(0 <= self.gamma < 3, f"gamma must lie in [0, 3), got {self.gamma}")
        elif self.kind == RhsKind.HENON_SUM:
            _check(len(self.terms) > 0, "henon_sum needs at least one term")
        elif self.kind == RhsKind.OBSTACLE:
            _check(self.weight.lower_bound() > 0, "obstacle weight must be bounded below by m0 > 0")

    @classmethod
    def zero(cls) -> 'RhsModel':
        return cls(RhsKind.ZERO)

    @classmethod
    def general(cls, m: float, kappa: float, weight: Optional[WeightSpec] = None) -> 'RhsModel':
        return cls(RhsKind.GENERAL, m=float(m), kappa=float(kappa), weight=weight or WeightSpec())

    @classmethod
    def dead_core(cls, lam: float, gamma: float, weight: Optional[WeightSpec] = None) -> 'RhsModel':
        return cls(RhsKind.DEAD_CORE, lam=float(lam), gamma=float(gamma), weight=weight or WeightSpec())

    @classmethod
    def henon_sum(cls, terms: Sequence[HenonTerm]) -> 'RhsModel':
        return cls(RhsKind.HENON_SUM, terms=tuple(terms))

    @classmethod
    def obstacle(cls, weight: Optional[WeightSpec] = None) -> 'RhsModel':
        return cls(RhsKind.OBSTACLE, weight=weight or WeightSpec())

    @property
    def is_obstacle(self) -> bool:
        return self.kind == RhsKind.OBSTACLE

    @property
    def update_rule(self) -> int:
        """Relaxation rule: 1 projects onto u >= 0, 2 for u_+ forcing, 0 otherwise."""
        if self.kind == RhsKind.OBSTACLE:
            return 1
        if self.kind == RhsKind.DEAD_CORE:
            return 2
        return 0

    def sample_weights(self, grid: Grid2D) -> List[np.ndarray]:
        """Weight arrays on the lattice, computed once per solve."""
        X, Y = grid.coordinates()
        if self.kind == RhsKind.ZERO:
            return []
        if self.kind == RhsKind.HENON_SUM:
            weights = []
            for term in self.terms:
                dist = term.distance(X, Y)
                weights.append(term.c * np.power(dist, term.beta))
                weights.append(term.noise * np.power(dist, term.sigma))
            return weights
        return [self.weight.evaluate(X, Y)]

    def evaluate_array(self, weights: List[np.ndarray], u: np.ndarray, g: np.ndarray) -> np.ndarray:
        """G on whole arrays, given ``sample_weights`` output."""
        u = np.asarray(u, dtype=float)
        g = np.asarray(g, dtype=float)
        if self.kind == RhsKind.ZERO:
            return np.zeros_like(u)
        if self.kind == RhsKind.GENERAL:
            return weights[0] * np.power(np.abs(u), self.m) * np.minimum(1.0, np.power(g, self.kappa))
        if self.kind == RhsKind.DEAD_CORE:
            return self.lam * weights[0] * positive_power(u, self.gamma)
        if self.kind == RhsKind.HENON_SUM:
            total = np.zeros_like(u)
            for idx, term in enumerate(self.terms):
                total = total + weights[2 * idx] * positive_power(u, term.m) \
                    * np.minimum(1.0, np.power(g, term.kappa)) + weights[2 * idx + 1]
            return total
        return weights[0] * np.ones_like(u)

    def evaluate(self, x: Point2, u_val: float, p_mag: float) -> float:
        """G(x, u, p) at a single point."""
        if not p_mag >= 0:
            raise InvalidParameterError(f"gradient magnitude must be >= 0, got {p_mag}")
        X = np.array([[float(x[0])]])
        Y = np.array([[float(x[1])]])
        if self.kind == RhsKind.ZERO:
            weights = []
        elif self.kind == RhsKind.HENON_SUM:
            weights = []
            for term in self.terms:
                dist = term.distance(X, Y)
                weights += [term.c * np.power(dist, term.beta), term.noise * np.power(dist, term.sigma)]
        else:
            weights = [self.weight.evaluate(X, Y)]
        return float(self.evaluate_array(weights, np.array([[u_val]]), np.array([[p_mag]]))[0, 0])

    def growth_exponent(self, point: Point2, operator_gamma: float = 0.0) -> Optional[float]:
        """Predicted sharp growth exponent about a critical point, or None for G = 0."""
        gamma = operator_gamma or None
        if self.kind == RhsKind.ZERO:
            return None
        if self.kind == RhsKind.OBSTACLE:
            return alpha_exponent(ExponentParams(0.0, 0.0, gamma=gamma))
        if self.kind == RhsKind.HENON_SUM:
            sigmas = [t.sigma if t.noise > 0 else None for t in self.terms]
            return henon_min_exponent([t.exponent_params() for t in self.terms], sigmas)

        m, kappa = (self.gamma, 0.0) if self.kind == RhsKind.DEAD_CORE else (self.m, self.kappa)
        beta = self.weight.vanishing_exponent(point)
        params = ExponentParams(m, kappa, beta=beta, gamma=gamma)
        return weighted_exponent(params) if beta is not None else alpha_exponent(params)

    def to_mapping(self) -> Dict[str, object]:
        return {
            'kind': self.kind.value,
            'm': self.m,
            'kappa': self.kappa,
            'lambda': self.lam,
            'gamma': self.gamma,
            'weight': self.weight.to_mapping(),
            'terms': [vars(t) for t in self.terms],
        }

    @classmethod
    def from_mapping(cls, data: Dict[str, object]) -> 'RhsModel':
        """Inverse of ``to_mapping``; validation runs as for the factories."""
        kind = RhsKind(data['kind'])
        weight = WeightSpec.from_mapping(data['weight']) if 'weight' in data else WeightSpec()
        terms = tuple(HenonTerm(**t) for t in data.get('terms', ()))
        return cls(kind, m=float(data.get('m', 0.0)), kappa=float(data.get('kappa', 0.0)),
                   lam=float(data.get('lambda', 0.0)), gamma=float(data.get('gamma', 0.0)),
                   weight=weight, terms=terms)
