import math
import threading
from abc import ABCMeta, abstractmethod
from enum import Enum
from typing import Callable, Dict, Optional, Tuple

import numpy
from numpy import ndarray

from phimono.configuration import default_configuration
from phimono.core import CallableFunction, CheckReport, Grid, Interval, OutOfDomainError, \
    RealFunction, ScreeningError, Verdict, make_grid
from phimono.error_fn import ErrorFunction, TabulatedErrorFunction, check_absolutely_subadditive, \
    check_nondecreasing, check_subadditive
from phimono.numerics import inf_over, sup_over
from phimono.tools import log


class InterpolationSide(Enum):
    below = "below"
    above = "above"


def _tolerance(tol: Optional[float]) -> float:
    return default_configuration.tolerance if tol is None else tol


def screening_grid(phi: ErrorFunction, upper: Optional[float] = None) -> Grid:
    n = default_configuration.screening_grid_size
    cap = phi.domain_length * (n - 1) / n if math.isfinite(phi.domain_length) else default_configuration.horizon
    return Grid.on_error_domain(phi.domain_length, n, upper=cap if upper is None else min(upper, cap))


def screen_error_function(phi: ErrorFunction, upper: Optional[float] = None, nondecreasing: bool = False,
                          subadditive: bool = False, absolutely_subadditive: bool = False,
                          zero_at_zero: bool = False, tol: Optional[float] = None) -> None:
    """Raises ScreeningError unless phi has the requested properties on a screening grid."""
    tol = _tolerance(tol)
    if zero_at_zero and abs(phi(0.)) > tol:
        raise ScreeningError("Error function {} must vanish at 0, but is {}.".format(phi, phi(0.)))

    grid = screening_grid(phi, upper)
    checks = [(nondecreasing, check_nondecreasing, "nondecreasing"), (subadditive, check_subadditive, "subadditive"),
              (absolutely_subadditive, check_absolutely_subadditive, "absolutely subadditive")]
    for requested, check, name in checks:
        if requested:
            report = check(phi, grid, tol)
            if not report.holds:
                raise ScreeningError("Error function {} is not {} on {}: {}".format(phi, name, grid, report), report)


def screen_function_nondecreasing(h: RealFunction, tol: Optional[float] = None, grid: Optional[Grid] = None) -> None:
    grid = make_grid(h.domain, default_configuration.screening_grid_size) if grid is None else grid
    values = h.values(grid.points)
    if not numpy.all(numpy.isfinite(values)):
        raise ScreeningError("{} takes infinite values on {}.".format(h, grid))

    drops = numpy.maximum.accumulate(values) - values
    worst = int(numpy.argmax(drops))
    if drops[worst] > _tolerance(tol):
        earlier = int(numpy.argmax(values[:worst + 1]))
        raise ScreeningError("{} is not nondecreasing: value {:.6g} at {:.6g} exceeds {:.6g} at {:.6g}.".format(
            h, values[earlier], grid.points[earlier], values[worst], grid.points[worst]))


def _check_diameter(phi: ErrorFunction, grid: Grid) -> None:
    if grid.diameter >= phi.domain_length:
        raise OutOfDomainError("Grid diameter {} is not below the error function's domain length {}.".format(
            grid.diameter, phi.domain_length))


def _monotone_margins(values: ndarray, xs: ndarray, phi: ErrorFunction) -> (ndarray, ndarray, ndarray):
    i, j = numpy.triu_indices(len(xs), k=1)
    return values[j] + phi.values(xs[j] - xs[i]) - values[i], i, j


def check_phi_monotone(f: RealFunction, phi: ErrorFunction, grid: Grid, tol: Optional[float] = None) -> CheckReport:
    """f(x) <= f(y) + Phi(y - x) for all grid pairs x < y."""
    _check_diameter(phi, grid)
    xs = grid.points
    margins, i, j = _monotone_margins(f.values(xs), xs, phi)
    return CheckReport.from_margins(margins, xs[i], xs[j], _tolerance(tol), reference="Eq. H1",
                                    details={"grid_size": len(xs)})


def check_phi_holder(f: RealFunction, phi: ErrorFunction, grid: Grid, tol: Optional[float] = None) -> CheckReport:
    """|f(x) - f(y)| <= Phi(|x - y|), checked as Phi-monotonicity of both f and -f."""
    _check_diameter(phi, grid)
    xs = grid.points
    values = f.values(xs)
    increasing, i, j = _monotone_margins(values, xs, phi)
    decreasing, _, _ = _monotone_margins(-values, xs, phi)
    return CheckReport.from_margins(numpy.minimum(increasing, decreasing), xs[i], xs[j], _tolerance(tol),
                                    reference="Eq. H2", details={"grid_size": len(xs)})


def _error_at_distance(phi: ErrorFunction, distances: ndarray) -> ndarray:
    return phi.values(numpy.maximum(distances, 0.))


def build_lower_block(h: RealFunction, p: float, phi: ErrorFunction, tol: Optional[float] = None) -> RealFunction:
    """h_p: h left of p, h(p) - Phi(x - p) right of it."""
    h_p = h(p)
    screen_function_nondecreasing(h, tol)

    return CallableFunction(
        h.domain, lambda xs: numpy.where(xs <= p, h.extended_values(xs), h_p - _error_at_distance(phi, xs - p)),
        knots=numpy.concatenate([h.knots, [p], p + phi.knots]), description="lower block of {} at {}".format(h, p),
        graded_quadrature=True)


def build_upper_block(h: RealFunction, p: float, phi: ErrorFunction, tol: Optional[float] = None) -> RealFunction:
    """h^p: h(p) + Phi(p - x) left of p, h right of it."""
    h_p = h(p)
    screen_function_nondecreasing(h, tol)

    return CallableFunction(
        h.domain, lambda xs: numpy.where(xs < p, h_p + _error_at_distance(phi, p - xs), h.extended_values(xs)),
        knots=numpy.concatenate([h.knots, [p], p - phi.knots]), description="upper block of {} at {}".format(h, p),
        graded_quadrature=True)


def can_interpolate_monotone(f: RealFunction, p: float, side: InterpolationSide, phi: ErrorFunction, grid: Grid,
                             tol: Optional[float] = None) -> CheckReport:
    """
    Whether some Phi-monotone function touches f at p from the given side: below needs finite infima of f on
    [x, p] left of p and f(p) <= f(x) + Phi(x - p) right of it, above the mirrored conditions.
    """
    _check_diameter(phi, grid)
    screen_error_function(phi, upper=grid.diameter, nondecreasing=True, subadditive=True, tol=tol)
    xs = grid.points
    index = grid.index_of(p)
    p = float(xs[index])
    values = f.values(xs)
    f_p = values[index]

    if side == InterpolationSide.below:
        bounded = numpy.array([0. if inf_over(f, x, p).is_finite else -math.inf for x in xs[:index + 1]])
        right = xs[index + 1:]
        margins = numpy.concatenate([bounded, values[index + 1:] + phi.values(right - p) - f_p])
        reference = "Prop. A, Eq. cond"
    else:
        left = xs[:index]
        bounded = numpy.array([0. if sup_over(f, p, x).is_finite else -math.inf for x in xs[index:]])
        margins = numpy.concatenate([f_p + phi.values(p - left) - values[:index], bounded])
        reference = "Prop. A, Eq. cond2"

    return CheckReport.from_margins(margins, xs, numpy.full(len(xs), p), _tolerance(tol),
                                    reference=reference, details={"point": p})


def can_interpolate_holder(f: RealFunction, p: float, side: InterpolationSide, phi: ErrorFunction, grid: Grid,
                           tol: Optional[float] = None) -> CheckReport:
    """Below: f(p) <= f(x) + Phi(|x - p|) at every grid x; above: f(x) <= f(p) + Phi(|x - p|)."""
    _check_diameter(phi, grid)
    screen_error_function(phi, upper=grid.diameter, absolutely_subadditive=True, zero_at_zero=True, tol=tol)
    xs = grid.points
    p = float(xs[grid.index_of(p)])
    values = f.values(xs)
    f_p = f(p)
    errors = phi.values(numpy.abs(xs - p))

    if side == InterpolationSide.below:
        margins, reference = values + errors - f_p, "Prop. AH, Eq. condH"
    else:
        margins, reference = f_p + errors - values, "Prop. AH, Eq. cond2H"
    return CheckReport.from_margins(margins, xs, numpy.full(len(xs), p), _tolerance(tol), reference=reference,
                                    details={"point": p})


def build_holder_interpolant(f: RealFunction, p: float, side: InterpolationSide, phi: ErrorFunction,
                             tol: Optional[float] = None) -> RealFunction:
    """f(p) - Phi_p (below) or f(p) + Phi_p (above), with Phi_p(x) = Phi(|x - p|)."""
    if phi(0.) != 0:
        raise ScreeningError("Interpolation at {} needs Phi(0) = 0, but {} gives {}.".format(p, phi, phi(0.)))
    screen_error_function(phi, upper=f.domain.length() if f.domain.is_bounded() else None,
                          absolutely_subadditive=True, tol=tol)

    f_p = f(p)
    profile = phi.distance_profile(p, f.domain)
    sign = -1. if side == InterpolationSide.below else 1.
    return CallableFunction(f.domain, lambda xs: f_p + sign * profile.extended_values(xs), knots=profile.knots,
                            description="{} {} {}".format(f_p, "-" if sign < 0 else "+", profile),
                            graded_quadrature=True)


class TwoPoint(metaclass=ABCMeta):
    """A function H of two variables on a common interval."""

    def __init__(self, domain: Interval):
        self.domain = domain

    @abstractmethod
    def h_at(self, x: float, y: float) -> float: raise NotImplementedError

    def matrix(self, points: ndarray) -> ndarray:
        """H(points[i], points[j]) for all i, j."""
        return numpy.array([[self.h_at(x, y) for y in points] for x in points])

    def diagonal(self, points: ndarray) -> ndarray:
        return numpy.array([self.h_at(t, t) for t in points])


class ClosedFormTwoPoint(TwoPoint):
    def __init__(self, domain: Interval, body: Callable[[ndarray, ndarray], ndarray], description: str):
        super().__init__(domain)
        self.body = body
        self.description = description

    def h_at(self, x: float, y: float) -> float:
        return float(self.body(numpy.array(x), numpy.array(y)))

    def matrix(self, points: ndarray) -> ndarray:
        return numpy.asarray(self.body(points[:, None], points[None, :]), dtype=float) * numpy.ones(
            (len(points), len(points)))

    def diagonal(self, points: ndarray) -> ndarray:
        return numpy.asarray(self.body(points, points), dtype=float) * numpy.ones(len(points))

    def __str__(self):
        return self.description


def sign_two_point(domain: Interval) -> ClosedFormTwoPoint:
    """H(x, y) = sign(x - y): solves the min/max equations without being continuous at the diagonal."""
    return ClosedFormTwoPoint(domain, lambda x, y: numpy.sign(x - y), "sign(x - y)")


class NegatedTwoPoint(TwoPoint):
    def __init__(self, base: TwoPoint):
        super().__init__(base.domain)
        self.base = base

    def h_at(self, x: float, y: float) -> float:
        return -self.base.h_at(x, y)

    def matrix(self, points: ndarray) -> ndarray:
        return -self.base.matrix(points)

    def diagonal(self, points: ndarray) -> ndarray:
        return -self.base.diagonal(points)

    def __str__(self):
        return "-({})".format(self.base)


class TwoPointFunction(TwoPoint):
    """
    H(x, y) = inf of f over [x, y] if x < y, f(x) if x = y, sup of f over [y, x] if x > y.

    Entries, single or as matrices, are the extrema inf_over / sup_over take at the stored resolution. When f
    attains its extrema at knots (sample tables), those extrema compose exactly under min and max; matrices of
    grids up to the dense cache limit are kept.
    """

    def __init__(self, source: RealFunction, resolution: Optional[int] = None):
        resolution = default_configuration.extremum_resolution if resolution is None else resolution
        if resolution < 2:
            raise ValueError("Resolution must be at least 2, got {}.".format(resolution))
        super().__init__(source.domain)
        self.source = source
        self.resolution = resolution
        self._cache: Dict[Tuple[float, ...], ndarray] = {}
        self._cache_lock = threading.Lock()

    def h_at(self, x: float, y: float) -> float:
        if x < y:
            return float(inf_over(self.source, x, y, self.resolution))
        if x > y:
            return float(sup_over(self.source, y, x, self.resolution))
        return self.source(x)

    def _row_samples(self, x: float, ys: ndarray) -> ndarray:
        """Values of f where inf_over / sup_over look on [x, y] for every y of ys, one row each."""
        if self.source.extrema_at_knots:
            samples = numpy.stack([numpy.full(len(ys), x), ys], axis=1)
        else:
            samples = numpy.linspace(x, ys, self.resolution, axis=1)
        return self.source.values(samples.ravel()).reshape(samples.shape)

    def _compute_matrix(self, points: ndarray) -> ndarray:
        knots = self.source.knots[(self.source.knots >= points[0]) & (self.source.knots <= points[-1])]
        knot_values = self.source.values(knots)

        matrix = numpy.empty((len(points), len(points)))
        matrix[numpy.diag_indices(len(points))] = self.source.values(points)
        for row, x in enumerate(points[:-1]):
            ys = points[row + 1:]
            samples = self._row_samples(x, ys)
            inside = (knots[None, :] >= x) & (knots[None, :] <= ys[:, None])
            low_knots = numpy.where(inside, knot_values, math.inf).min(axis=1, initial=math.inf)
            high_knots = numpy.where(inside, knot_values, -math.inf).max(axis=1, initial=-math.inf)
            matrix[row, row + 1:] = numpy.minimum(samples.min(axis=1), low_knots)
            matrix[row + 1:, row] = numpy.maximum(samples.max(axis=1), high_knots)
        return matrix

    def matrix(self, points: ndarray) -> ndarray:
        points = numpy.asarray(points, dtype=float)
        if len(points) > default_configuration.dense_cache_limit:
            return self._compute_matrix(points)

        key = tuple(points.tolist())
        with self._cache_lock:
            cached = self._cache.get(key)
        if cached is None:
            cached = self._compute_matrix(points)
            cached.flags.writeable = False
            with self._cache_lock:
                self._cache[key] = cached
        return cached

    def diagonal(self, points: ndarray) -> ndarray:
        return self.source.values(points)

    def section(self, p: float) -> RealFunction:
        """h = H(., p), nondecreasing whatever f is."""
        return CallableFunction(self.domain, lambda xs: numpy.array([self.h_at(x, p) for x in numpy.ravel(xs)]),
                                knots=numpy.concatenate([self.source.knots, [p]]),
                                description="H(., {}) of {}".format(p, self.source))

    def __str__(self):
        return "H of {}".format(self.source)


def build_two_point(f: RealFunction, resolution: Optional[int] = None) -> TwoPointFunction:
    return TwoPointFunction(f, resolution)


def interpolation_sandwich(f: RealFunction, p: float, phi: ErrorFunction, resolution: Optional[int] = None,
                           tol: Optional[float] = None) -> (RealFunction, RealFunction):
    """Lower and upper blocks of h = H(., p); they enclose f when f is Phi-monotone and touch it at p."""
    h = build_two_point(f, resolution).section(p)
    return build_lower_block(h, p, phi, tol), build_upper_block(h, p, phi, tol)


def check_feh_equations(H: TwoPoint, grid: Grid, tol: Optional[float] = None) -> CheckReport:
    """min(H(x,y), H(y,z)) = H(x,z) and max(H(z,y), H(y,x)) = H(z,x) for all grid triples x <= y <= z."""
    xs = grid.points
    n = len(xs)
    matrix = H.matrix(xs)

    triples = [numpy.meshgrid(numpy.arange(middle + 1), [middle], numpy.arange(middle, n), indexing='ij')
               for middle in range(n)]
    i, j, k = (numpy.concatenate([triple[axis].ravel() for triple in triples]) for axis in range(3))

    minimum_residuals = numpy.abs(numpy.minimum(matrix[i, j], matrix[j, k]) - matrix[i, k])
    maximum_residuals = numpy.abs(numpy.maximum(matrix[k, j], matrix[j, i]) - matrix[k, i])
    residuals = numpy.maximum(minimum_residuals, maximum_residuals)

    report = CheckReport.from_margins(-residuals, xs[i], xs[k], _tolerance(tol), reference="Eq. FEH",
                                      middle=xs[j], details={"worst_residual": float(numpy.max(residuals)),
                                                             "grid_size": n})
    log("Min/max equations of {} on {}: {} over {} triples.".format(H, grid, report.verdict.value,
                                                                     report.pairs_checked))
    return report


def check_feg_equations(G: TwoPoint, grid: Grid, tol: Optional[float] = None) -> CheckReport:
    """max(G(x,y), G(y,z)) = G(x,z) and min(G(z,y), G(y,x)) = G(z,x), as the min/max equations of -G."""
    report = check_feh_equations(NegatedTwoPoint(G), grid, tol)
    return CheckReport(report.verdict, report.worst_margin, report.witness, report.pairs_checked, report.tolerance,
                       reference="Cor. FEH2, Eq. FEG", details=report.details)


def check_diagonal_bounds(H: TwoPoint, grid: Grid, continuous_diagonal: bool = False,
                          tol: Optional[float] = None) -> CheckReport:
    """
    H(x, y) <= min of H(t, t) over grid t in [x, y] <= max of H(t, t) there <= H(y, x) for grid pairs x < y.
    With a continuous diagonal both bounds must be equalities, within the tolerance plus the largest step of
    the diagonal between neighbouring grid points.
    """
    tol = _tolerance(tol)
    xs = grid.points
    n = len(xs)
    matrix = H.matrix(xs)
    diagonal = H.diagonal(xs)

    i, j = numpy.triu_indices(n, k=1)
    lowest = numpy.concatenate([numpy.minimum.accumulate(diagonal[a:])[1:] for a in range(n - 1)])
    highest = numpy.concatenate([numpy.maximum.accumulate(diagonal[a:])[1:] for a in range(n - 1)])

    margins = numpy.minimum(lowest - matrix[i, j], matrix[j, i] - highest)
    details = {"grid_size": n, "continuous_diagonal": continuous_diagonal}
    if continuous_diagonal:
        equality_tolerance = tol + (float(numpy.max(numpy.abs(numpy.diff(diagonal)))) if n > 1 else 0.)
        deviations = numpy.maximum(numpy.abs(lowest - matrix[i, j]), numpy.abs(matrix[j, i] - highest))
        margins = numpy.minimum(margins, equality_tolerance - tol - deviations)
        details["equality_tolerance"] = equality_tolerance

    return CheckReport.from_margins(margins, xs[i], xs[j], tol, reference="Thm. FEH, Eq. H=", details=details)


def check_superadditive_equivalence(f: RealFunction, grid: Grid, tol: Optional[float] = None) -> CheckReport:
    """
    For nonpositive f on ]0, hi[: f(x + y) >= f(x) + f(y) on the grid agrees with f being (-f)-monotone.
    Holds when both verdicts agree.
    """
    tol = _tolerance(tol)
    if f.domain.lo != 0:
        raise ScreeningError("Superadditivity equivalence needs a domain starting at 0, got {}.".format(f.domain))
    xs = grid.points
    values = f.values(xs)
    if numpy.any(values > tol):
        worst = int(numpy.argmax(values))
        raise ScreeningError("{} must be nonpositive, but is {:.6g} at {:.6g}.".format(f, values[worst], xs[worst]))

    i, j = numpy.triu_indices(len(xs))
    admissible = xs[i] + xs[j] <= grid.last
    x, y = xs[i][admissible], xs[j][admissible]
    superadditive = CheckReport.from_margins(f.values(x + y) - f.values(x) - f.values(y), x, y, tol,
                                             reference="Prop. pppp")

    phi = TabulatedErrorFunction.from_function(f.negated(), f.domain.hi)
    monotone = check_phi_monotone(f, phi, grid, tol)

    details = {"superadditive": superadditive.verdict.value, "superadditive_worst_margin": superadditive.worst_margin,
               "phi_monotone": monotone.verdict.value, "phi_monotone_worst_margin": monotone.worst_margin}
    pairs = superadditive.pairs_checked + monotone.pairs_checked
    if superadditive.verdict == monotone.verdict:
        return CheckReport(Verdict.holds, 0., None, pairs, tol, reference="Prop. pppp",
                           details=details)

    failing = superadditive if not superadditive.holds else monotone
    return CheckReport(Verdict.fails, failing.worst_margin, failing.witness, pairs, tol,
                       reference="Prop. pppp", details=details)

