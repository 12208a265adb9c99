from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Sequence

import numpy
from numpy import ndarray

from phimono.configuration import default_configuration
from phimono.core import ExtendedReal, RealFunction


class QuadratureError(ArithmeticError):
    pass


# relative change below which successive estimates only differ by rounding
rounding = 16 * numpy.finfo(float).eps


class QuadratureRule(Enum):
    composite_simpson = "composite-simpson"
    composite_trapezoid = "composite-trapezoid"


@dataclass(frozen=True)
class QuadratureSpec:
    rule: QuadratureRule = QuadratureRule.composite_simpson
    initial_subdivisions: int = 8
    tolerance: float = 1e-9
    max_refinements: int = 18

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("Quadrature tolerance must be positive, got {}.".format(self.tolerance))
        if self.initial_subdivisions < 4:
            raise ValueError("At least 4 initial subdivisions needed, got {}.".format(self.initial_subdivisions))
        if self.rule == QuadratureRule.composite_simpson and self.initial_subdivisions % 2 != 0:
            raise ValueError("Simpson's rule needs an even number of subdivisions, got {}.".format(
                self.initial_subdivisions))
        if self.max_refinements < 1:
            raise ValueError("At least one refinement needed, got {}.".format(self.max_refinements))

    def with_tolerance(self, tolerance: float) -> 'QuadratureSpec':
        return QuadratureSpec(self.rule, self.initial_subdivisions, tolerance, self.max_refinements)

    def as_dict(self) -> Dict:
        return {"rule": self.rule.value, "initial_subdivisions": self.initial_subdivisions,
                "tolerance": self.tolerance, "max_refinements": self.max_refinements}


def default_quadrature() -> QuadratureSpec:
    return default_configuration.quadrature()


def _grading(w: ndarray) -> (ndarray, ndarray):
    """Polynomial substitution with vanishing derivatives up to third order at both ends of [0, 1]."""
    g = w ** 4 * (35 - 84 * w + 70 * w ** 2 - 20 * w ** 3)
    dg = 140 * w ** 3 * (1 - w) ** 3
    return g, dg


def _rule_weights(rule: QuadratureRule, n: int) -> ndarray:
    if rule == QuadratureRule.composite_simpson:
        weights = numpy.ones(n + 1)
        weights[1:-1:2] = 4
        weights[2:-1:2] = 2
        return weights / (3 * n)

    weights = numpy.ones(n + 1)
    weights[0] = weights[-1] = .5
    return weights / n


def _composite(body: Callable[[ndarray], ndarray], lefts: ndarray, rights: ndarray, n: int,
               rule: QuadratureRule, graded: bool) -> ndarray:
    """Composite rule with n subdivisions on every piece [lefts[i], rights[i]]; endpoints are evaluated one-sided."""
    w = numpy.linspace(0., 1., n + 1)
    g, dg = _grading(w) if graded else (w, numpy.ones_like(w))

    widths = (rights - lefts)[:, None]
    nodes = lefts[:, None] + widths * g[None, :]
    nodes[:, 0] = numpy.nextafter(lefts, rights)
    nodes[:, -1] = numpy.nextafter(rights, lefts)
    jacobian = widths * dg[None, :]

    if graded:
        inner = nodes[:, 1:-1]
        values = numpy.zeros(nodes.shape)
        values[:, 1:-1] = numpy.asarray(body(inner.ravel()), dtype=float).reshape(inner.shape)
    else:
        values = numpy.asarray(body(nodes.ravel()), dtype=float).reshape(nodes.shape)

    return numpy.sum(values * jacobian * _rule_weights(rule, n)[None, :], axis=1)


def _pieces(breakpoints: ndarray) -> (ndarray, ndarray):
    breakpoints = numpy.unique(breakpoints)
    return breakpoints[:-1], breakpoints[1:]


def _refine(body, lefts: ndarray, rights: ndarray, quad: QuadratureSpec, graded: bool,
            converged: Callable[[ndarray, ndarray], bool], description: str) -> ndarray:
    n = quad.initial_subdivisions
    previous = _composite(body, lefts, rights, n, quad.rule, graded)
    for _ in range(quad.max_refinements):
        n *= 2
        current = _composite(body, lefts, rights, n, quad.rule, graded)
        if converged(previous, current):
            return current
        previous = current

    raise QuadratureError("{} did not converge to tolerance {} after {} refinements.".format(
        description, quad.tolerance, quad.max_refinements))


def integrate_pieces(body: Callable[[ndarray], ndarray], lefts: Sequence[float], rights: Sequence[float],
                     quad: Optional[QuadratureSpec] = None, graded: bool = False, tolerances=None) -> ndarray:
    """Integrals over many pieces at once, each refined until its estimate moves by at most its tolerance."""
    quad = default_quadrature() if quad is None else quad
    lefts = numpy.asarray(lefts, dtype=float)
    rights = numpy.asarray(rights, dtype=float)
    if len(lefts) == 0:
        return numpy.zeros(0)
    tolerances = numpy.broadcast_to(quad.tolerance if tolerances is None else tolerances, lefts.shape)

    return _refine(body, lefts, rights, quad, graded,
                   converged=lambda previous, current: bool(numpy.all(
                       numpy.abs(current - previous) <= tolerances + rounding * numpy.abs(current))),
                   description="Integral over {} pieces".format(len(lefts)))


def integrate(body: Callable[[ndarray], ndarray], a: float, b: float, quad: Optional[QuadratureSpec] = None,
              knots: Sequence[float] = (), graded: bool = False, tolerance: Optional[float] = None) -> float:
    """
    Integral of a vectorized body over [a, b], split at the knots inside. Subdivisions double until two
    successive estimates differ by at most `tolerance` (default: the quadrature tolerance).
    """
    if a == b:
        return 0.
    if a > b:
        return -integrate(body, b, a, quad, knots, graded, tolerance)

    quad = default_quadrature() if quad is None else quad
    tolerance = quad.tolerance if tolerance is None else tolerance
    knots = numpy.asarray(knots, dtype=float)
    lefts, rights = _pieces(numpy.concatenate([[a, b], knots[(knots > a) & (knots < b)]]))

    return float(numpy.sum(_refine(
        body, lefts, rights, quad, graded,
        converged=lambda previous, current: abs(numpy.sum(current) - numpy.sum(previous)) <=
                                            tolerance + rounding * abs(numpy.sum(current)),
        description="Integral over [{}, {}]".format(a, b))))


def integral_average(f: RealFunction, a: float, b: float, quad: Optional[QuadratureSpec] = None) -> float:
    """Mean of f over the hull of {a, b}; f(a) when a = b."""
    f.values([a, b])
    if a == b:
        return f(a)

    quad = default_quadrature() if quad is None else quad
    lo, hi = min(a, b), max(a, b)
    return integrate(f.extended_values, lo, hi, quad, knots=f.knots, graded=f.graded_quadrature,
                     tolerance=quad.tolerance * (hi - lo)) / (hi - lo)


def cumulative_integrals(f: RealFunction, points: Sequence[float], quad: Optional[QuadratureSpec] = None) -> ndarray:
    """Integrals of f from points[0] to every point, for increasing points inside f.domain."""
    points = numpy.asarray(points, dtype=float)
    if len(points) < 2:
        return numpy.zeros(len(points))
    if not numpy.all(numpy.diff(points) > 0):
        raise ValueError("Points must be strictly increasing.")
    f.values(points[[0, -1]])

    quad = default_quadrature() if quad is None else quad
    knots = f.knots_within(points[0], points[-1])
    lefts, rights = _pieces(numpy.concatenate([points, knots]))
    pieces = integrate_pieces(f.extended_values, lefts, rights, quad, f.graded_quadrature,
                              tolerances=quad.tolerance * (rights - lefts))

    breakpoints = numpy.concatenate([[points[0]], rights])
    totals = numpy.concatenate([[0.], numpy.cumsum(pieces)])
    return totals[numpy.searchsorted(breakpoints, points)]


def _extremum_points(f: RealFunction, a: float, b: float, resolution: Optional[int]) -> ndarray:
    if not a <= b:
        raise ValueError("Expected a <= b, got [{}, {}].".format(a, b))
    resolution = default_configuration.extremum_resolution if resolution is None else resolution
    if resolution < 2:
        raise ValueError("Resolution must be at least 2, got {}.".format(resolution))
    f.values([a, b])

    knots = f.knots[(f.knots >= a) & (f.knots <= b)]
    if f.extrema_at_knots:
        return numpy.concatenate([[a, b], knots])
    return numpy.concatenate([numpy.linspace(a, b, resolution), knots])


def inf_over(f: RealFunction, a: float, b: float, resolution: Optional[int] = None) -> ExtendedReal:
    """
    Minimum of f over a closed grid on [a, b] with both ends and the knots inside, an upper estimate of
    the infimum. Exact for sampled tables, whose extrema sit at samples or ends.
    """
    return ExtendedReal(numpy.min(f.extended_values(_extremum_points(f, a, b, resolution))))


def sup_over(f: RealFunction, a: float, b: float, resolution: Optional[int] = None) -> ExtendedReal:
    return ExtendedReal(numpy.max(f.extended_values(_extremum_points(f, a, b, resolution))))
