"""
Growth Analysis
Critical and branching set detection, dyadic sup-norm decay with log-log
exponent fits, non-degeneracy lower bounds, two-phase reflection diagnostics
and flatness measurements on solver output.

Radii are dyadic: r_k = r0 * 2^-k with r0 the largest L * 2^-j (j >= 1) whose
ball stays inside the lattice. Ball sup-norms use exact Euclidean membership.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage, stats

from .grid import Grid2D, Node, StencilSet, ball_nodes, boundary_mask, shell_nodes
from .infinity_ops import ScalarField, grad_field
from .models import RhsModel, nondegeneracy_constant
from ..utils.errors import InsufficientDataError, InvalidParameterError, OutOfDomainError

logger = logging.getLogger(__name__)

ALPHA_TOL = 0.15
R2_MIN = 0.98
RESOLUTION_FLOOR = 4                      # radii below 4h are not fitted
NOISE_FACTOR = 10                         # sup values below 10 * tolerance are not fitted
SHELL_FACTOR = 0.5                        # c in the non-degeneracy bound
REFLECTION_FACTOR = 100.0
PHASE_EXPONENT_GAP = 0.2                  # max |alpha_neg - alpha_pos|
FLIP_RTOL = 1e-12
MIN_FIT_POINTS = 4


def default_thresholds(grid: Grid2D) -> Tuple[float, float]:
    """(tau_u, tau_g) = (10 h^2, 2 h^(1/3))."""
    h = grid.spacing
    return 10.0 * h * h, 2.0 * h ** (1.0 / 3.0)


@dataclass(frozen=True)
class CriticalSet:
    nodes: np.ndarray = field(repr=False, compare=False)   # (N, 2) node indices
    tau_u: float
    tau_g: float

    def __len__(self) -> int:
        return int(self.nodes.shape[0])

    def __contains__(self, node) -> bool:
        return bool(np.any((self.nodes[:, 0] == node[0]) & (self.nodes[:, 1] == node[1])))


@dataclass(frozen=True)
class BranchingSet:
    nodes: np.ndarray = field(repr=False, compare=False)
    tau_u: float
    rho_b: float

    def __len__(self) -> int:
        return int(self.nodes.shape[0])

    def __contains__(self, node) -> bool:
        return bool(np.any((self.nodes[:, 0] == node[0]) & (self.nodes[:, 1] == node[1])))


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int


@dataclass
class DecayReport:
    """Dyadic sup-norms about one center and the fitted growth exponent."""
    center: Node
    center_xy: Tuple[float, float]
    radii: List[float]
    sup_abs: List[float]
    sup_pos: List[float]
    sup_neg: List[float]
    window: Tuple[float, float]           # fitted radii lie in [window[0], window[1]]
    fit: FitResult
    alpha_pred: Optional[float] = None
    tol_alpha: float = ALPHA_TOL

    @property
    def alpha_fit(self) -> float:
        return self.fit.slope

    @property
    def r_squared(self) -> float:
        return self.fit.r_squared

    @property
    def holder_proxy(self) -> float:
        """alpha_fit - 1: the empirical gradient Holder exponent at the center."""
        return self.fit.slope - 1.0

    @property
    def verdict(self) -> Optional[bool]:
        if self.alpha_pred is None:
            return None
        return abs(self.alpha_fit - self.alpha_pred) <= self.tol_alpha and self.r_squared >= R2_MIN


@dataclass(frozen=True)
class NondegeneracyRow:
    r: float
    shell_sup: float                      # sup over the shell of u - u(x0)
    lower_bound: float                    # c * K_nd * r^alpha
    theta_estimate: float                 # inf over the shell of G / r^sigma


@dataclass
class NondegeneracyReport:
    center: Node
    sigma: float
    alpha: float
    theta: float                          # value used for K_nd
    theta_estimate: float
    constant: float                       # K_nd, NaN when the hypothesis fails
    rows: List[NondegeneracyRow]
    hypothesis_holds: bool
    reason: str = ""

    @property
    def verdict(self) -> bool:
        return self.hypothesis_holds and all(row.shell_sup >= row.lower_bound for row in self.rows)


@dataclass(frozen=True)
class ReflectionRow:
    k: int
    r: float
    s_neg: float
    s_pos: float
    s: float


@dataclass
class ReflectionReport:
    center: Node
    alpha: float
    C0: float
    C1: float                             # minimal constant in the flip inequality
    rows: List[ReflectionRow]
    hypothesis_holds: bool
    alpha_neg: Optional[float] = None     # fitted exponent of s^-
    alpha_pos: Optional[float] = None     # fitted exponent of s^+

    @property
    def phases_agree(self) -> bool:
        """Fitted exponents of s- and s+ exist and differ by at most 0.2."""
        if self.alpha_neg is None or self.alpha_pos is None:
            return False
        return abs(self.alpha_neg - self.alpha_pos) <= PHASE_EXPONENT_GAP

    @property
    def verdict(self) -> bool:
        return self.hypothesis_holds and self.C1 <= REFLECTION_FACTOR * self.C0 and self.phases_agree


@dataclass(frozen=True)
class FlatnessReport:
    inf_u: float
    neg_density: float
    sup_half: float
    eps: Optional[float] = None

    @property
    def delta(self) -> float:
        return 1.0 - self.sup_half

    @property
    def small_negative_part(self) -> Optional[bool]:
        """Both smallness hypotheses hold for the given eps."""
        if self.eps is None:
            return None
        return self.inf_u >= -self.eps and self.neg_density <= self.eps


def detect_critical_set(field: ScalarField, stencil: StencilSet, tau_u: Optional[float] = None,
                        tau_g: Optional[float] = None) -> CriticalSet:
    """Interior nodes with |u| <= tau_u and g_h <= tau_g."""
    default_u, default_g = default_thresholds(field.grid)
    tau_u = default_u if tau_u is None else float(tau_u)
    tau_g = default_g if tau_g is None else float(tau_g)
    if not (tau_u > 0 and tau_g > 0):
        raise InvalidParameterError(f"thresholds must be > 0, got tau_u={tau_u}, tau_g={tau_g}")

    g = grad_field(field, stencil)
    hit = (np.abs(field.values) <= tau_u) & (g <= tau_g) & ~boundary_mask(field.grid)
    ii, jj = np.nonzero(hit)
    return CriticalSet(np.stack([ii, jj], axis=1).astype(np.int64), tau_u, tau_g)


def _disk_footprint(grid: Grid2D, radius: float) -> np.ndarray:
    reach = int(math.floor(radius / grid.spacing + 1e-9))
    offs = np.arange(-reach, reach + 1)
    P, Q = np.meshgrid(offs, offs, indexing='ij')
    return np.hypot(P, Q) * grid.spacing <= radius * (1.0 + 1e-12)


def detect_branching_set(field: ScalarField, tau_u: Optional[float] = None,
                         rho_b: Optional[float] = None) -> BranchingSet:
    """Interior nodes with |u| <= tau_u that see u > tau_u and u < -tau_u within rho_b."""
    grid = field.grid
    tau_u = default_thresholds(grid)[0] if tau_u is None else float(tau_u)
    rho_b = 2.0 * grid.spacing if rho_b is None else float(rho_b)
    if not (tau_u > 0 and rho_b > 0):
        raise InvalidParameterError(f"tau_u and rho_b must be > 0, got {tau_u}, {rho_b}")

    u = field.values
    footprint = _disk_footprint(grid, rho_b)
    local_max = ndimage.maximum_filter(u, footprint=footprint, mode='constant', cval=-np.inf)
    local_min = ndimage.minimum_filter(u, footprint=footprint, mode='constant', cval=np.inf)
    hit = (np.abs(u) <= tau_u) & (local_max > tau_u) & (local_min < -tau_u) & ~boundary_mask(grid)
    ii, jj = np.nonzero(hit)
    return BranchingSet(np.stack([ii, jj], axis=1).astype(np.int64), tau_u, rho_b)


def largest_dyadic_radius(grid: Grid2D, center: Node) -> Optional[float]:
    """Largest L * 2^-j, j >= 1, whose ball about ``center`` fits; None if below h."""
    r = 0.5 * grid.half_width
    while r >= grid.spacing:
        if grid.ball_fits(center, r):
            return r
        r *= 0.5
    return None


def dyadic_radii(grid: Grid2D, center: Node, k_max: int, r0: Optional[float] = None) -> List[float]:
    if k_max < 0:
        raise InvalidParameterError(f"k_max must be >= 0, got {k_max}")
    if r0 is None:
        r0 = largest_dyadic_radius(grid, center)
        if r0 is None:
            raise OutOfDomainError(f"no dyadic ball about {center} fits in the lattice")
    elif not grid.ball_fits(center, r0):
        raise OutOfDomainError(f"ball of radius {r0} about {center} touches the lattice boundary")
    return [r0 * 2.0 ** -k for k in range(k_max + 1)]


def find_free_boundary_center(field: ScalarField, stencil: StencilSet, noise_floor: float,
                              tau_u: Optional[float] = None, tau_g: Optional[float] = None) -> Node:
    """
    Critical node on the edge of the zero set, used by the auto_critical center.

    Candidates have |u| <= noise_floor and a stencil neighbor above it. The
    one with the largest dyadic radius wins, then the one closest to the
    origin, then the lowest index.
    """
    grid = field.grid
    u = field.values
    n = grid.n_per_side
    critical = detect_critical_set(field, stencil, tau_u, tau_g)

    best, best_key = None, None
    for i, j in critical.nodes:
        if abs(u[i, j]) > noise_floor:
            continue
        near_positive = any(0 <= i + p < n and 0 <= j + q < n and u[i + p, j + q] > noise_floor
                            for p, q in stencil.directions)
        if not near_positive:
            continue
        r0 = largest_dyadic_radius(grid, (int(i), int(j)))
        if r0 is None:
            continue
        x, y = grid.coordinate((int(i), int(j)))
        key = (-r0, math.hypot(x, y), int(i), int(j))
        if best_key is None or key < best_key:
            best, best_key = (int(i), int(j)), key

    if best is None:
        raise InsufficientDataError("no critical node on the boundary of the zero set")
    logger.debug("free-boundary center %s at %s", best, grid.coordinate(best))
    return best


def fit_exponent(pairs: Sequence[Tuple[float, float]],
                 window: Optional[Tuple[float, float]] = None) -> FitResult:
    """Least squares of log s against log r over pairs with s > 0 inside ``window``."""
    rs, ss = [], []
    for r, s in pairs:
        if not (r > 0 and s > 0):
            continue
        if window is not None and not window[0] <= r <= window[1]:
            continue
        rs.append(r)
        ss.append(s)
    if len(rs) < MIN_FIT_POINTS:
        raise InsufficientDataError(f"need {MIN_FIT_POINTS} usable (r, s) pairs, got {len(rs)}")

    result = stats.linregress(np.log(rs), np.log(ss))
    return FitResult(float(result.slope), float(result.intercept), float(result.rvalue ** 2), len(rs))


def _ball_sups(field: ScalarField, center: Node, radii: Sequence[float]):
    sup_abs, sup_pos, sup_neg = [], [], []
    for r in radii:
        values = ball_nodes(field.grid, center, r).values(field.values)
        sup_abs.append(float(np.abs(values).max()))
        sup_pos.append(float(np.maximum(values, 0.0).max()))
        sup_neg.append(float(np.maximum(-values, 0.0).max()))
    return sup_abs, sup_pos, sup_neg


def measure_decay(field: ScalarField, center: Node, k_max: int, alpha_pred: Optional[float] = None,
                  tolerance: float = 0.0, tol_alpha: float = ALPHA_TOL,
                  r0: Optional[float] = None) -> DecayReport:
    """
    Sup-norms of u, u+ and u- over dyadic balls about ``center`` and the fitted exponent.

    The fit window drops radii below 4h and sup values at or below the noise
    floor 10 * ``tolerance``.
    """
    grid = field.grid
    if not grid.contains(center) or grid.is_boundary(center):
        raise OutOfDomainError(f"center {center} is not an interior node")
    radii = dyadic_radii(grid, center, k_max, r0)
    sup_abs, sup_pos, sup_neg = _ball_sups(field, center, radii)

    noise_floor = NOISE_FACTOR * tolerance
    usable = [(r, s) for r, s in zip(radii, sup_abs)
              if r >= RESOLUTION_FLOOR * grid.spacing * (1.0 - 1e-12) and s > noise_floor]
    if len(usable) < MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"only {len(usable)} radii about {center} clear the resolution and noise floors")
    window = (min(r for r, _ in usable), max(r for r, _ in usable))
    fit = fit_exponent(usable)

    report = DecayReport(center, grid.coordinate(center), radii, sup_abs, sup_pos, sup_neg,
                         window, fit, alpha_pred, tol_alpha)
    logger.info("decay at %s: alpha_fit=%.4f R2=%.4f alpha_pred=%s",
                report.center_xy, report.alpha_fit, report.r_squared, alpha_pred)
    return report


def check_nondegeneracy(field: ScalarField, center: Node, model: RhsModel, stencil: StencilSet,
                        theta: Optional[float] = None, sigma: float = 0.0,
                        radii: Optional[Sequence[float]] = None, k_max: int = 8,
                        c: float = SHELL_FACTOR) -> NondegeneracyReport:
    """
    Shell lower bound sup_{shell r} (u - u(x0)) >= c K_nd r^alpha with alpha = (sigma + 4) / 3.

    theta is estimated as the minimum over the radii of inf_shell G / r^sigma;
    a claimed theta above the estimate, or a non-positive estimate, is a
    hypothesis failure. sigma = 0 is the obstacle case.
    """
    grid = field.grid
    if not sigma >= 0:
        raise InvalidParameterError(f"sigma must be >= 0, got {sigma}")
    alpha = (sigma + 4.0) / 3.0
    if radii is None:
        radii = [r for r in dyadic_radii(grid, center, k_max)
                 if r >= RESOLUTION_FLOOR * grid.spacing * (1.0 - 1e-12)]
    if not radii:
        raise InsufficientDataError(f"no shell radius about {center} clears 4h")

    u = field.values
    g = grad_field(field, stencil)
    G = model.evaluate_array(model.sample_weights(grid), u, g)
    u0 = u[center]

    shell_sups, estimates = [], []
    for r in radii:
        shell = shell_nodes(grid, center, r)
        if len(shell) == 0:
            raise InsufficientDataError(f"empty shell at r={r}")
        idx = (shell[:, 0], shell[:, 1])
        shell_sups.append(float((u[idx] - u0).max()))
        estimates.append(float(G[idx].min() / r ** sigma))
    theta_estimate = min(estimates)

    reason = ""
    if theta_estimate <= 0:
        reason = f"G is not bounded below on the shells (inf G / r^sigma = {theta_estimate:.3e})"
    elif theta is not None and theta > theta_estimate:
        reason = f"claimed theta {theta} exceeds the measured {theta_estimate:.6g}"
    holds = not reason
    used_theta = theta_estimate if theta is None else float(theta)

    constant = nondegeneracy_constant(used_theta, alpha) if holds else float('nan')
    rows = [NondegeneracyRow(r, s, c * constant * r ** alpha if holds else float('nan'), est)
            for r, s, est in zip(radii, shell_sups, estimates)]
    if not holds:
        logger.warning("non-degeneracy hypothesis fails at %s: %s", center, reason)
    return NondegeneracyReport(center, sigma, alpha, used_theta, theta_estimate, constant,
                               rows, holds, reason)


def _flip_holds(s: Sequence[float], radii: Sequence[float], alpha: float, C1: float) -> bool:
    slack = 1.0 + FLIP_RTOL
    if s[0] > C1 * radii[0] ** alpha * slack:
        return False
    shrink = 2.0 ** -alpha
    for k in range(len(s) - 1):
        if s[k + 1] > max(C1 * radii[k + 1] ** alpha, shrink * s[k]) * slack:
            return False
    return True


def flip_constant(s: Sequence[float], radii: Sequence[float], alpha: float) -> float:
    """
    Minimal C1 with s(0) <= C1 r0^alpha and
    s(k+1) <= max{C1 r_{k+1}^alpha, 2^-alpha s(k)} for every measured k.
    """
    if len(s) != len(radii) or len(s) < 2:
        raise InsufficientDataError("flip inequality needs at least two matching (r, s) entries")
    shrink = 2.0 ** -alpha
    C1 = s[0] / radii[0] ** alpha
    for k in range(len(s) - 1):
        if s[k + 1] > shrink * s[k] * (1.0 + FLIP_RTOL):
            C1 = max(C1, s[k + 1] / radii[k + 1] ** alpha)
    return float(C1)


def flip_constant_scan(s: Sequence[float], radii: Sequence[float], alpha: float) -> float:
    """Brute force: the smallest candidate s(k) / r_k^alpha satisfying the flip inequality."""
    if len(s) != len(radii) or len(s) < 2:
        raise InsufficientDataError("flip inequality needs at least two matching (r, s) entries")
    candidates = sorted({s[k] / radii[k] ** alpha for k in range(len(s))})
    for C1 in candidates:
        if _flip_holds(s, radii, alpha, C1):
            return float(C1)
    return float(candidates[-1])


def reflection_check(field: ScalarField, center: Node, alpha: Optional[float], C0: Optional[float] = None,
                     r0: Optional[float] = None, k_max: int = 8, tau_u: Optional[float] = None,
                     rho_b: Optional[float] = None) -> ReflectionReport:
    """
    Two-phase reflection at a branching point: sup u- <= C0 r^alpha on dyadic
    balls should force sup |u| to obey the flip inequality with C1 <= 100 C0.
    The verdict also needs the fitted exponents of s- and s+ to agree.

    ``alpha=None`` uses the exponent fitted to sup |u|. ``C0=None`` calibrates
    C0 = max_k s-(k) / r_k^alpha.
    """
    grid = field.grid
    branching = detect_branching_set(field, tau_u, rho_b)
    if center not in branching:
        raise InvalidParameterError(f"node {center} is not a branching point")

    radii = [r for r in dyadic_radii(grid, center, k_max, r0)
             if r >= RESOLUTION_FLOOR * grid.spacing * (1.0 - 1e-12)]
    if len(radii) < 2:
        raise InsufficientDataError(f"fewer than two dyadic radii about {center} clear 4h")
    s, s_pos, s_neg = _ball_sups(field, center, radii)

    if alpha is None:
        alpha = fit_exponent(list(zip(radii, s))).slope
    if C0 is None:
        C0 = max(v / r ** alpha for v, r in zip(s_neg, radii))
    holds = all(v <= C0 * r ** alpha * (1.0 + FLIP_RTOL) for v, r in zip(s_neg, radii))
    C1 = flip_constant(s, radii, alpha)

    def exponent(values):
        try:
            return fit_exponent(list(zip(radii, values))).slope
        except InsufficientDataError:
            return None

    rows = [ReflectionRow(k, r, sn, sp, sa) for k, (r, sn, sp, sa) in enumerate(zip(radii, s_neg, s_pos, s))]
    report = ReflectionReport(center, float(alpha), float(C0), C1, rows, holds,
                              exponent(s_neg), exponent(s_pos))
    logger.info("reflection at %s: alpha=%.4f C0=%.4g C1=%.4g", center, alpha, C0, C1)
    return report


def flatness_diagnostic(field: ScalarField, eps: Optional[float] = None) -> FlatnessReport:
    """inf u, node density of {u < 0}, and sup |u| on the ball of radius L/2."""
    u = field.values
    if np.abs(u).max() > 1.0 + 1e-12:
        raise InvalidParameterError("flatness diagnostic needs a field normalized to sup |u| <= 1")
    grid = field.grid
    half = ball_nodes(grid, grid.origin, 0.5 * grid.half_width)
    return FlatnessReport(float(u.min()), float(np.count_nonzero(u < 0)) / u.size,
                          float(np.abs(half.values(u)).max()), eps)


def find_branching_center(field: ScalarField, tau_u: Optional[float] = None,
                          rho_b: Optional[float] = None) -> Node:
    """Branching node with the largest dyadic radius, then closest to the origin."""
    grid = field.grid
    branching = detect_branching_set(field, tau_u, rho_b)
    best, best_key = None, None
    for i, j in branching.nodes:
        node = (int(i), int(j))
        r0 = largest_dyadic_radius(grid, node)
        if r0 is None:
            continue
        key = (-r0, math.hypot(*grid.coordinate(node)), node)
        if best_key is None or key < best_key:
            best, best_key = node, key
    if best is None:
        raise InsufficientDataError("no branching node found")
    return best
