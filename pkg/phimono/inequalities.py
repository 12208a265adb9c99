import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy
from numpy import ndarray

from phimono.analysis import check_phi_holder, check_phi_monotone, screen_error_function
from phimono.configuration import default_configuration
from phimono.core import CallableFunction, CheckReport, Grid, Interval, RealFunction, SampledFunction, \
    ScreeningError
from phimono.error_fn import ErrorFunction, PowerErrorFunction, transform_psi_to_phi
from phimono.numerics import QuadratureSpec, cumulative_integrals, default_quadrature, integral_average
from phimono.tools import log


class IterateBlowUpError(ArithmeticError):
    pass


class BoundKind(Enum):
    hh_lower = "hh_lower"
    hh_upper = "hh_upper"
    ostrowski = "ostrowski"
    ghh = "ghh"
    ghh_holder = "ghh_holder"

    @property
    def reference(self) -> str:
        return {BoundKind.hh_lower: "Eq. HH1", BoundKind.hh_upper: "Eq. HH1", BoundKind.ostrowski: "Eq. OI1",
                BoundKind.ghh: "Eq. GHH", BoundKind.ghh_holder: "Eq. GHH2"}[self]


@dataclass(frozen=True)
class BoundCertificate:
    """A bound compared with the value achieved by a witness; sharp when they agree within the tolerance."""
    kind: BoundKind
    bound_value: float
    achieved_value: float
    tolerance: float
    witness_function: Optional[RealFunction] = field(default=None, compare=False)
    details: Dict = field(default_factory=dict, compare=False)

    @property
    def gap(self) -> float:
        return self.bound_value - self.achieved_value

    @property
    def is_sharp(self) -> bool:
        return abs(self.gap) <= self.tolerance

    def __str__(self):
        return "{}: bound {:.9g}, achieved {:.9g}, gap {:.3g} ({})".format(
            self.kind.value, self.bound_value, self.achieved_value, self.gap, "sharp" if self.is_sharp else "not sharp")


class ConverseVariant(Enum):
    left = "left"
    right = "right"
    holder_left = "holder_left"
    holder_right = "holder_right"

    @property
    def is_holder(self) -> bool:
        return self in (ConverseVariant.holder_left, ConverseVariant.holder_right)

    @property
    def premise_reference(self) -> str:
        return {ConverseVariant.left: "Eq. HHL", ConverseVariant.right: "Eq. HHR",
                ConverseVariant.holder_left: "Eq. HHHL", ConverseVariant.holder_right: "Eq. HHHR"}[self]

    @property
    def conclusion_reference(self) -> str:
        return {ConverseVariant.left: "Thm. HHLI", ConverseVariant.right: "Thm. HHRI",
                ConverseVariant.holder_left: "Thm. HHHLI", ConverseVariant.holder_right: "Thm. HHHRI"}[self]


def _tolerance(tol: Optional[float]) -> float:
    return default_configuration.tolerance if tol is None else tol


def _quadrature(quad: Optional[QuadratureSpec]) -> QuadratureSpec:
    return default_quadrature() if quad is None else quad


def _check_segment(x: float, y: float) -> None:
    if not x < y:
        raise ValueError("Expected x < y, got x = {}, y = {}.".format(x, y))


def _screening_grid(f: RealFunction, x: float, y: float, extra: Tuple[float, ...] = ()) -> Grid:
    points = numpy.unique(numpy.concatenate([numpy.linspace(x, y, default_configuration.screening_grid_size), extra]))
    return Grid(f.domain, points)


def window(x: float, y: float, phi: ErrorFunction) -> Interval:
    """Open interval slightly wider than [x, y], so [x, y] is interior and Phi stays in its domain."""
    _check_segment(x, y)
    delta = (y - x) / 1000
    if math.isfinite(phi.domain_length):
        if y - x >= phi.domain_length:
            raise ScreeningError("Segment length {} is not below the domain length {} of {}.".format(
                y - x, phi.domain_length, phi))
        delta = min(delta, (phi.domain_length - (y - x)) / 4)
    return Interval(x - delta, y + delta)


def check_generalized_hh(f: RealFunction, phi: ErrorFunction, u: float, v: float, w: float, z: float,
                         quad: Optional[QuadratureSpec] = None, tol: Optional[float] = None,
                         holder: bool = False) -> CheckReport:
    """
    Monotone form: A(f, <u,v>) <= A(f, <w,z>) + A(Phi, <w-u, z-v>) for u <= w, v <= z.
    Hoelder form: |A(f, <u,v>) - A(f, <w,z>)| <= A(Phi o |.|, <w-u, z-v>) for any order.
    """
    quad = _quadrature(quad)
    if not holder and not (u <= w and v <= z):
        raise ValueError("Monotone form needs u <= w and v <= z, got u={}, v={}, w={}, z={}.".format(u, v, w, z))

    left = integral_average(f, u, v, quad)
    right = integral_average(f, w, z, quad)
    error = phi.average(w - u, z - v, quad, absolute=holder)
    margin = error - abs(left - right) if holder else right + error - left

    return CheckReport.from_margins([margin], [u], [z], _tolerance(tol),
                                    reference="Eq. GHH2" if holder else "Eq. GHH",
                                    details={"left_average": left, "right_average": right, "error_average": error,
                                             "points": [u, v, w, z]})


def hh_bounds(f: RealFunction, phi: ErrorFunction, x: float, y: float, quad: Optional[QuadratureSpec] = None,
              tol: Optional[float] = None) -> (float, float):
    """
    Slacks of f(x) - E <= A(f, [x, y]) <= f(y) + E with E = integral of Phi over [0, y - x] divided by y - x.
    """
    _check_segment(x, y)
    screen = check_phi_monotone(f, phi, _screening_grid(f, x, y), tol)
    if not screen.holds:
        raise ScreeningError("{} is not Phi-monotone for {} on [{}, {}]: {}".format(f, phi, x, y, screen), screen)

    quad = _quadrature(quad)
    average = integral_average(f, x, y, quad)
    error = phi.integral(y - x, quad) / (y - x)
    return average - (f(x) - error), f(y) + error - average


def extremal_functions(phi: ErrorFunction, x: float, y: float, domain: Optional[Interval] = None) \
        -> (RealFunction, RealFunction):
    """
    The lower witness 0 up to x and -Phi(u - x) beyond, and the upper witness Phi(y - u) before y and 0 from y on.
    """
    domain = window(x, y, phi) if domain is None else domain
    lower = CallableFunction(domain, lambda us: numpy.where(us <= x, 0., -phi.values(numpy.maximum(us - x, 0.))),
                             knots=numpy.concatenate([[x], x + phi.knots]),
                             description="lower extremal at {}".format(x), graded_quadrature=True)
    upper = CallableFunction(domain, lambda us: numpy.where(us < y, phi.values(numpy.maximum(y - us, 0.)), 0.),
                             knots=numpy.concatenate([[y], y - phi.knots]),
                             description="upper extremal at {}".format(y), graded_quadrature=True)
    return lower, upper


def hh_sharpness(phi: ErrorFunction, x: float, y: float, quad: Optional[QuadratureSpec] = None,
                 tol: Optional[float] = None, domain: Optional[Interval] = None) \
        -> (BoundCertificate, BoundCertificate):
    quad = _quadrature(quad)
    tol = 10 * quad.tolerance if tol is None else tol
    domain = window(x, y, phi) if domain is None else domain
    screen_error_function(phi, upper=y - x, nondecreasing=True, subadditive=True)

    bound = phi.integral(y - x, quad) / (y - x)
    lower, upper = extremal_functions(phi, x, y, domain)
    details = {"x": x, "y": y, "error_function": str(phi)}

    return (BoundCertificate(BoundKind.hh_lower, bound, lower(x) - integral_average(lower, x, y, quad), tol,
                             witness_function=lower, details=details),
            BoundCertificate(BoundKind.hh_upper, bound, integral_average(upper, x, y, quad) - upper(y), tol,
                             witness_function=upper, details=details))


def ghh_sharpness(phi: ErrorFunction, x: float, y: float, holder: bool = False,
                  quad: Optional[QuadratureSpec] = None, tol: Optional[float] = None,
                  domain: Optional[Interval] = None) -> BoundCertificate:
    """
    The generalized bound at (u, v, w, z) = (x, x, x, y), attained by the lower extremal function, or in the
    Hoelder form by -Phi(|. - x|).
    """
    quad = _quadrature(quad)
    tol = 10 * quad.tolerance if tol is None else tol
    domain = window(x, y, phi) if domain is None else domain
    if holder:
        screen_error_function(phi, upper=y - x, absolutely_subadditive=True, zero_at_zero=True)
        witness = phi.distance_profile(x, domain).negated()
    else:
        screen_error_function(phi, upper=y - x, nondecreasing=True, subadditive=True)
        witness, _ = extremal_functions(phi, x, y, domain)

    report = check_generalized_hh(witness, phi, x, x, x, y, quad, tol, holder)
    achieved = report.details["left_average"] - report.details["right_average"]
    return BoundCertificate(BoundKind.ghh_holder if holder else BoundKind.ghh, report.details["error_average"],
                            abs(achieved) if holder else achieved, tol, witness_function=witness,
                            details={"x": x, "y": y, "error_function": str(phi)})


def _check_point(x: float, y: float, p: float) -> None:
    _check_segment(x, y)
    if not x <= p <= y:
        raise ValueError("Point {} outside [{}, {}].".format(p, x, y))


def _ostrowski_value(phi: ErrorFunction, x: float, y: float, p: float, quad: QuadratureSpec) -> float:
    return (phi.integral(p - x, quad) + phi.integral(y - p, quad)) / (y - x)


def ostrowski_bound(f: RealFunction, phi: ErrorFunction, x: float, y: float, p: float,
                    quad: Optional[QuadratureSpec] = None, tol: Optional[float] = None) -> CheckReport:
    """|f(p) - A(f, [x, y])| <= (integral of Phi over [0, p - x] plus over [0, y - p]) / (y - x)."""
    _check_point(x, y, p)
    screen = check_phi_holder(f, phi, _screening_grid(f, x, y, (p,)), tol)
    if not screen.holds:
        raise ScreeningError("{} is not Phi-Hoelder for {} on [{}, {}]: {}".format(f, phi, x, y, screen), screen)

    quad = _quadrature(quad)
    deviation = abs(f(p) - integral_average(f, x, y, quad))
    bound = _ostrowski_value(phi, x, y, p, quad)
    return CheckReport.from_margins([bound - deviation], [x], [y], _tolerance(tol), reference="Eq. OI",
                                    middle=[p], details={"bound": bound, "deviation": deviation, "point": p})


def ostrowski_witness(phi: ErrorFunction, p: float, domain: Interval) -> RealFunction:
    return phi.distance_profile(p, domain)


def ostrowski_sharpness(phi: ErrorFunction, x: float, y: float, p: float, quad: Optional[QuadratureSpec] = None,
                        tol: Optional[float] = None, domain: Optional[Interval] = None) -> BoundCertificate:
    _check_point(x, y, p)
    quad = _quadrature(quad)
    tol = 10 * quad.tolerance if tol is None else tol
    domain = window(x, y, phi) if domain is None else domain
    screen_error_function(phi, upper=y - x, nondecreasing=True, subadditive=True, zero_at_zero=True)

    witness = ostrowski_witness(phi, p, domain)
    achieved = abs(witness(p) - integral_average(witness, x, y, quad))
    return BoundCertificate(BoundKind.ostrowski, _ostrowski_value(phi, x, y, p, quad), achieved, tol,
                            witness_function=witness, details={"x": x, "y": y, "point": p,
                                                               "error_function": str(phi)})


def power_case_bounds(c: float, p_exp: float, x: float, y: float, point: float) -> (float, float):
    """Closed forms of both bounds for Phi(t) = c * t^p_exp."""
    if c < 0:
        raise ValueError("Coefficient must be nonnegative, got {}.".format(c))
    if not 0 < p_exp <= 1:
        raise ValueError("Exponent must lie in ]0, 1], got {}.".format(p_exp))
    _check_point(x, y, point)

    hh = c / (p_exp + 1) * (y - x) ** p_exp
    ostrowski = c / ((p_exp + 1) * (y - x)) * ((point - x) ** (p_exp + 1) + (y - point) ** (p_exp + 1))
    return hh, ostrowski


def _premise_margins(values: ndarray, integrals: ndarray, xs: ndarray, psi: ErrorFunction, left: bool) \
        -> (ndarray, ndarray, ndarray):
    i, j = numpy.triu_indices(len(xs), k=1)
    averages = (integrals[j] - integrals[i]) / (xs[j] - xs[i])
    errors = psi.values(xs[j] - xs[i])
    margins = averages + errors - values[i] if left else values[j] + errors - averages
    return margins, i, j


def check_converse_premise(f: RealFunction, psi: ErrorFunction, variant: ConverseVariant, grid: Grid,
                           quad: Optional[QuadratureSpec] = None, tol: Optional[float] = None) -> CheckReport:
    """
    For grid pairs u < v with A = A(f, [u, v]):
    left f(u) <= A + Psi(v - u), right A <= f(v) + Psi(v - u), and the Hoelder variants bound |f(u) - A|
    respectively |f(v) - A| by Psi(v - u).
    """
    if grid.diameter >= psi.domain_length:
        raise ScreeningError("Grid diameter {} is not below the domain length {} of {}.".format(
            grid.diameter, psi.domain_length, psi))
    xs = grid.points
    values = f.values(xs)
    integrals = cumulative_integrals(f, xs, _quadrature(quad))
    left = variant in (ConverseVariant.left, ConverseVariant.holder_left)

    margins, i, j = _premise_margins(values, integrals, xs, psi, left)
    if variant.is_holder:
        mirrored, _, _ = _premise_margins(-values, -integrals, xs, psi, left)
        margins = numpy.minimum(margins, mirrored)

    return CheckReport.from_margins(margins, xs[i], xs[j], _tolerance(tol),
                                    reference=variant.premise_reference,
                                    details={"grid_size": len(xs), "error_function": str(psi)})


def converse_error_function(psi: ErrorFunction) -> ErrorFunction:
    """The Phi the converse theorems conclude with; Phi = 0 for power Psi with exponent above 1."""
    if isinstance(psi, PowerErrorFunction) and psi.p > 1:
        return PowerErrorFunction(0., 1., psi.domain_length)
    return transform_psi_to_phi(psi)


def check_converse_conclusion(f: RealFunction, psi: ErrorFunction, variant: ConverseVariant, grid: Grid,
                              quad: Optional[QuadratureSpec] = None, tol: Optional[float] = None) -> CheckReport:
    """
    Phi-monotonicity (Phi-Hoelder property for the Hoelder variants) of f for the transformed Phi. A failure
    while the premise holds on the grid is a resolution finding: the grid is refined before the final verdict.
    """
    phi = converse_error_function(psi)
    check = check_phi_holder if variant.is_holder else check_phi_monotone

    report = check(f, phi, grid, tol)
    refinements = 0
    while not report.holds and refinements < default_configuration.converse_refinement_steps:
        if not check_converse_premise(f, psi, variant, grid, quad, tol).holds:
            break
        log("Converse conclusion fails for {} on {} although the premise holds; refining.".format(f, grid))
        grid = grid.refined()
        refinements += 1
        if not check_converse_premise(f, psi, variant, grid, quad, tol).holds:
            log("Premise fails on the refined grid {}.".format(grid))
        report = check(f, phi, grid, tol)

    return CheckReport(report.verdict, report.worst_margin, report.witness, report.pairs_checked, report.tolerance,
                       reference=variant.conclusion_reference,
                       details=dict(report.details, error_function=str(phi), refinements=refinements))


def iterate_T(f: RealFunction, psi: ErrorFunction, x: float, y: float, n: int,
              quad: Optional[QuadratureSpec] = None, samples: Optional[int] = None) -> List[SampledFunction]:
    """
    Iterates of (Tg)(u) = A(g, [u, y]) + Psi(y - u) for u < y, (Tg)(y) = g(y), each stored as a linear table.
    """
    _check_segment(x, y)
    if n < 1:
        raise ValueError("At least one iterate needed, got {}.".format(n))
    samples = default_configuration.iterate_sample_count if samples is None else samples
    quad = _quadrature(quad)

    us = numpy.linspace(x, y, samples)
    errors = psi.values(y - us[:-1])
    iterates = []
    g = f
    for index in range(n):
        integrals = cumulative_integrals(g, us, quad)
        values = numpy.empty(samples)
        values[:-1] = (integrals[-1] - integrals[:-1]) / (y - us[:-1]) + errors
        values[-1] = g(y)

        magnitude = float(numpy.max(numpy.abs(values)))
        if not magnitude <= default_configuration.iterate_blow_up_magnitude:
            raise IterateBlowUpError("Iterate {} reaches magnitude {:.3g}.".format(index + 1, magnitude))

        g = SampledFunction(f.domain, us, values)
        iterates.append(g)

    log("Computed {} iterates of the averaging operator on [{}, {}] with {} samples.".format(n, x, y, samples))
    return iterates
