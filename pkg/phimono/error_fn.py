import math
import threading
from abc import ABCMeta, abstractmethod
from collections import OrderedDict
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy
from numpy import ndarray

from phimono.configuration import default_configuration
from phimono.core import CallableFunction, CheckReport, Grid, Interpolation, Interval, OutOfDomainError, \
    ParsingException, RealFunction, SampledFunction, ScreeningError, interpolate
from phimono.expression import ExpressionFunction
from phimono.numerics import QuadratureSpec, default_quadrature, integrate, integrate_pieces
from phimono.tools import log


class SingularTransformError(ScreeningError):
    pass


class ErrorFunction(metaclass=ABCMeta):
    """Nonnegative function on [0, domain_length)."""

    def __init__(self, domain_length: float = math.inf, knots: Sequence[float] = ()):
        if not domain_length > 0:
            raise ValueError("Domain length must be positive, got {}.".format(domain_length))
        self.domain_length = domain_length
        self.knots = numpy.unique(numpy.array(list(knots), dtype=float))

    @abstractmethod
    def _body(self, ts: ndarray) -> ndarray: raise NotImplementedError

    def values(self, ts) -> ndarray:
        ts = numpy.asarray(ts, dtype=float)
        outside = (ts < 0) | (ts >= self.domain_length) | numpy.isnan(ts)
        if numpy.any(outside):
            raise OutOfDomainError("{} is outside the domain [0, {}) of {}.".format(
                ts[outside].flat[0], self.domain_length, self))
        return numpy.asarray(self._body(ts), dtype=float)

    def __call__(self, t: float) -> float:
        return float(self.values(numpy.array([t]))[0])

    def _check_upper(self, upper: float) -> None:
        if not 0 <= upper <= self.domain_length:
            raise OutOfDomainError("Integration bound {} outside [0, {}].".format(upper, self.domain_length))

    def integral(self, upper: float, quad: Optional[QuadratureSpec] = None) -> float:
        """Integral of the error function over [0, upper]."""
        self._check_upper(upper)
        return integrate(self._body, 0., upper, quad, knots=self.knots, graded=True)

    def average(self, a: float, b: float, quad: Optional[QuadratureSpec] = None, absolute: bool = False) -> float:
        """
        Integral average over the hull of {a, b}; with `absolute` the average of t -> Phi(|t|), so a and b
        may be negative.
        """
        ends = numpy.abs([a, b]) if absolute else numpy.array([a, b], dtype=float)
        self.values(ends)
        if a == b:
            return float(self.values(ends[:1])[0])

        quad = default_quadrature() if quad is None else quad
        lo, hi = min(a, b), max(a, b)
        knots = numpy.concatenate([[0.], self.knots, -self.knots]) if absolute else self.knots
        body = (lambda ts: self._body(numpy.abs(ts))) if absolute else self._body
        return integrate(body, lo, hi, quad, knots=knots, graded=True, tolerance=quad.tolerance * (hi - lo)) / (hi - lo)

    def distance_profile(self, p: float, domain: Interval) -> RealFunction:
        """Phi_p(x) = Phi(|x - p|) on the given interval."""
        return CallableFunction(domain, lambda xs: self._body(numpy.abs(xs - p)),
                                knots=numpy.concatenate([[p], p + self.knots, p - self.knots]),
                                description="{}(|x - {}|)".format(self, p), graded_quadrature=True)


class PowerErrorFunction(ErrorFunction):
    """Phi(t) = c * t^p."""

    def __init__(self, c: float, p: float, domain_length: float = math.inf):
        if not c >= 0:
            raise ValueError("Coefficient must be nonnegative, got {}.".format(c))
        if not p > 0:
            raise ValueError("Exponent must be positive, got {}.".format(p))
        super().__init__(domain_length)
        self.c = float(c)
        self.p = float(p)

    def _body(self, ts: ndarray) -> ndarray:
        return self.c * numpy.power(ts, self.p)

    def _antiderivative(self, t: float) -> float:
        return self.c * abs(t) ** (self.p + 1) / (self.p + 1) * math.copysign(1., t)

    def integral(self, upper: float, quad: Optional[QuadratureSpec] = None) -> float:
        self._check_upper(upper)
        return self._antiderivative(upper)

    def average(self, a: float, b: float, quad: Optional[QuadratureSpec] = None, absolute: bool = False) -> float:
        self.values(numpy.abs([a, b]) if absolute else [a, b])
        if a == b:
            return self(abs(a))
        lo, hi = min(a, b), max(a, b)
        return (self._antiderivative(hi) - self._antiderivative(lo)) / (hi - lo)

    def __eq__(self, other):
        return isinstance(other, PowerErrorFunction) and \
               (self.c, self.p, self.domain_length) == (other.c, other.p, other.domain_length)

    def __hash__(self):
        return hash((self.c, self.p, self.domain_length))

    def __str__(self):
        return "power:c={:g},p={:g}".format(self.c, self.p)

    def __repr__(self):
        return "PowerErrorFunction({!r}, {!r})".format(self.c, self.p)


class TabulatedErrorFunction(ErrorFunction):
    """
    Error function given by a vectorized body on [0, domain_length): a real function evaluated without
    its open-domain check, or a sample table.
    """

    def __init__(self, body: Callable[[ndarray], ndarray], domain_length: float, knots: Sequence[float] = (),
                 description: str = "table", sample_ts: Optional[ndarray] = None):
        super().__init__(domain_length, knots=knots)
        self.body = body
        self.description = description
        self.sample_ts = sample_ts

    def _body(self, ts: ndarray) -> ndarray:
        return self.body(ts)

    def __str__(self):
        return self.description

    @staticmethod
    def from_function(f: RealFunction, domain_length: Optional[float] = None) -> 'TabulatedErrorFunction':
        return TabulatedErrorFunction(f.extended_values, f.domain.hi if domain_length is None else domain_length,
                                      knots=f.knots[f.knots >= 0], description="table:{}".format(f))

    @staticmethod
    def from_samples(ts: Sequence[float], values: Sequence[float], domain_length: float = math.inf,
                     rule: Interpolation = Interpolation.linear, description: str = "table") -> 'TabulatedErrorFunction':
        ts = numpy.array(list(ts), dtype=float)
        values = numpy.array(list(values), dtype=float)
        if len(ts) == 0 or len(ts) != len(values):
            raise ValueError("Sample table needs equally many t and values, got {} and {}.".format(len(ts), len(values)))
        if not numpy.all(numpy.diff(ts) > 0):
            raise ValueError("Sample t values must be strictly increasing.")
        if ts[0] < 0 or ts[-1] >= domain_length:
            raise OutOfDomainError("Samples [{}, {}] outside [0, {}).".format(ts[0], ts[-1], domain_length))
        if numpy.any(values < 0):
            raise ValueError("Error function samples must be nonnegative.")

        return TabulatedErrorFunction(lambda xs: interpolate(ts, values, rule, xs), domain_length, knots=ts,
                                      description=description, sample_ts=ts)

    @staticmethod
    def load_csv(csv_file: Path, domain_length: float = math.inf) -> 'TabulatedErrorFunction':
        ts, values = SampledFunction.read_csv(csv_file)
        try:
            return TabulatedErrorFunction.from_samples(ts, values, domain_length,
                                                       description="table:{}".format(csv_file))
        except ValueError as e:
            raise ParsingException("{}: {}".format(csv_file, e))


class NearZeroFit:
    """Psi(t) ~ coefficient * t^exponent near 0, from a log-log regression on five small arguments."""

    def __init__(self, psi: ErrorFunction, sample_count: int = 5):
        if isinstance(psi, TabulatedErrorFunction) and psi.sample_ts is not None:
            ts = psi.sample_ts[psi.sample_ts > 0][:sample_count]
        else:
            scale = min(1., psi.domain_length / 2)
            ts = scale * numpy.logspace(-8, -4, sample_count)

        if len(ts) < 2:
            raise SingularTransformError("Too few positive samples of {} to screen integrability near 0.".format(psi))
        values = psi.values(ts)
        if values[0] == 0:
            # nondecreasing and nonnegative: Psi vanishes on ]0, ts[0]]
            self.coefficient, self.exponent = 0., 1.
            return
        if numpy.any(values < 0):
            raise SingularTransformError("Cannot fit a power law to {} near 0: values {}.".format(psi, values))

        self.exponent, log_coefficient = numpy.polyfit(numpy.log(ts), numpy.log(values), 1)
        self.coefficient = math.exp(log_coefficient)
        if not self.exponent > 0:
            raise SingularTransformError(
                "Psi(t)/t is not integrable near 0 for {}: fitted exponent {:.4g}.".format(psi, self.exponent))

    def integral_over_inverse(self, delta: ndarray) -> ndarray:
        """Integral of coefficient * t^(exponent - 1) over [0, delta]."""
        return self.coefficient * numpy.power(delta, self.exponent) / self.exponent


class TransformedErrorFunction(ErrorFunction):
    """
    Phi(u) = Psi(u) + integral of Psi(t)/t over [0, u], by quadrature: on [u / 10^4, u] in the logarithmic
    variable, below that by the power law fitted to Psi near 0.
    """

    cutoff_ratio = 1e4

    def __init__(self, base: ErrorFunction, force_quadrature: bool = False, quad: Optional[QuadratureSpec] = None,
                 memo_size: Optional[int] = None):
        super().__init__(base.domain_length)
        self.base = base
        self.force_quadrature = force_quadrature
        self.quad = default_quadrature() if quad is None else quad
        self.memo_size = default_configuration.transform_memo_size if memo_size is None else memo_size
        self._memo: 'OrderedDict[float, float]' = OrderedDict()
        self._memo_lock = threading.Lock()
        self.near_zero_fit = NearZeroFit(base)

    def _singular_integrals(self, us: ndarray) -> ndarray:
        upper = numpy.log(us)
        lower = upper - math.log(self.cutoff_ratio)
        log_knots = numpy.log(self.base.knots[self.base.knots > 0])

        lefts, rights, owners = [], [], []
        for index, (lo, hi) in enumerate(zip(lower, upper)):
            breakpoints = numpy.concatenate([[lo], log_knots[(log_knots > lo) & (log_knots < hi)], [hi]])
            lefts.extend(breakpoints[:-1])
            rights.extend(breakpoints[1:])
            owners.extend([index] * (len(breakpoints) - 1))

        pieces = integrate_pieces(lambda rs: self.base.values(numpy.exp(rs)), lefts, rights, self.quad,
                                  tolerances=self.quad.tolerance * (numpy.array(rights) - numpy.array(lefts)) /
                                             math.log(self.cutoff_ratio))
        return numpy.bincount(owners, weights=pieces, minlength=len(us)) + \
               self.near_zero_fit.integral_over_inverse(us / self.cutoff_ratio)

    def _body(self, ts: ndarray) -> ndarray:
        flat = numpy.ravel(ts).tolist()
        known = {}
        with self._memo_lock:
            for t in flat:
                if t > 0 and t in self._memo:
                    self._memo.move_to_end(t)
                    known[t] = self._memo[t]
        missing = numpy.unique([t for t in flat if t > 0 and t not in known])
        if len(missing):
            computed = self._singular_integrals(missing)
            known.update(zip(missing.tolist(), computed.tolist()))
            with self._memo_lock:
                self._memo.update(zip(missing.tolist(), computed.tolist()))
                while len(self._memo) > self.memo_size:
                    self._memo.popitem(last=False)

        integrals = numpy.array([known[t] if t > 0 else 0. for t in flat])
        return self.base.values(ts) + integrals.reshape(numpy.shape(ts))

    def __str__(self):
        return "transform:{}".format(self.base)


def transform_psi_to_phi(psi: ErrorFunction, force_quadrature: bool = False) -> ErrorFunction:
    """Phi(u) = Psi(u) + integral of Psi(t)/t over [0, u]; exact for power bodies."""
    if isinstance(psi, PowerErrorFunction) and not force_quadrature:
        return PowerErrorFunction(psi.c * (psi.p + 1) / psi.p, psi.p, psi.domain_length)
    return TransformedErrorFunction(psi, force_quadrature=force_quadrature)


def eval_error(phi: ErrorFunction, t: float) -> float:
    return phi(t)


def _error_points(phi: ErrorFunction, grid: Grid) -> ndarray:
    phi.values(grid.points)
    return grid.points


def _tolerance(tol: Optional[float]) -> float:
    return default_configuration.tolerance if tol is None else tol


def check_nonnegative(phi: ErrorFunction, grid: Grid, tol: Optional[float] = None) -> CheckReport:
    ts = _error_points(phi, grid)
    return CheckReport.from_margins(phi.values(ts), ts, ts, _tolerance(tol), reference="§1")


def check_nondecreasing(phi: ErrorFunction, grid: Grid, tol: Optional[float] = None) -> CheckReport:
    ts = _error_points(phi, grid)
    values = phi.values(ts)
    i, j = numpy.triu_indices(len(ts), k=1)
    return CheckReport.from_margins(values[j] - values[i], ts[i], ts[j], _tolerance(tol), reference="§2")


def check_subadditive(phi: ErrorFunction, grid: Grid, tol: Optional[float] = None) -> CheckReport:
    ts = _error_points(phi, grid)
    i, j = numpy.triu_indices(len(ts))
    u, v = ts[i], ts[j]
    admissible = u + v < phi.domain_length
    u, v = u[admissible], v[admissible]

    return CheckReport.from_margins(phi.values(u) + phi.values(v) - phi.values(u + v), u, v, _tolerance(tol),
                                    reference="§1")


def check_absolutely_subadditive(phi: ErrorFunction, grid: Grid, tol: Optional[float] = None) -> CheckReport:
    ts = _error_points(phi, grid)
    signed = numpy.unique(numpy.concatenate([ts, -ts]))
    i, j = numpy.triu_indices(len(signed))
    u, v = signed[i], signed[j]
    admissible = numpy.abs(u + v) < phi.domain_length
    u, v = u[admissible], v[admissible]

    margins = phi.values(numpy.abs(u)) + phi.values(numpy.abs(v)) - phi.values(numpy.abs(u + v))
    return CheckReport.from_margins(margins, u, v, _tolerance(tol), reference="§1")


def verify_cphi_identity(psi: ErrorFunction, phi: ErrorFunction, grid: Grid, quad: Optional[QuadratureSpec] = None,
                         tol: Optional[float] = None) -> CheckReport:
    """Residuals of Psi(u) + (1/u) * integral of Phi over [0, u] = Phi(u) at the positive grid points."""
    us = _error_points(phi, grid)
    us = us[us > 0]
    psi.values(us)

    residuals = numpy.array([psi(u) + phi.integral(u, quad) / u - phi(u) for u in us])
    report = CheckReport.from_margins(-numpy.abs(residuals), us, us, _tolerance(tol), reference="Eq. CPhi",
                                      details={"worst_residual": float(numpy.max(numpy.abs(residuals)))
                                      if len(residuals) else 0.})
    log("Transform identity for {} -> {}: worst residual {:.3g} over {} points.".format(
        psi, phi, report.details["worst_residual"], len(us)))
    return report


def parse_error_function(spec: str, domain_length: float = math.inf) -> ErrorFunction:
    """`power:c=<real>,p=<real>`, `table:<path.csv>`, `expr:<expression in t>` or `transform:<inner spec>`."""
    kind, separator, argument = spec.strip().partition(":")
    if not separator:
        raise ParsingException("Error function spec '{}' lacks a kind prefix.".format(spec))

    if kind == "power":
        try:
            parameters = dict((key.strip(), float(value)) for key, value in
                              (item.split("=", 1) for item in argument.split(",")))
        except ValueError:
            raise ParsingException("Malformed power spec '{}', expected power:c=<real>,p=<real>.".format(spec))
        if set(parameters) != {"c", "p"}:
            raise ParsingException("Power spec '{}' needs exactly c and p.".format(spec))
        try:
            return PowerErrorFunction(parameters["c"], parameters["p"], domain_length)
        except ValueError as e:
            raise ParsingException("Invalid power spec '{}': {}".format(spec, e))
    if kind == "table":
        return TabulatedErrorFunction.load_csv(Path(argument), domain_length)
    if kind == "expr":
        upper = domain_length if math.isfinite(domain_length) else default_configuration.horizon
        body = ExpressionFunction(Interval(0., upper), argument)
        phi = TabulatedErrorFunction(body.extended_values, domain_length, knots=body.knots,
                                     description="expr:{}".format(argument))
        report = check_nonnegative(phi, Grid.on_error_domain(domain_length, default_configuration.screening_grid_size))
        if not report.holds:
            raise ParsingException("Error function '{}' takes negative values: {}".format(spec, report))
        return phi
    if kind == "transform":
        return transform_psi_to_phi(parse_error_function(argument, domain_length))

    raise ParsingException("Unknown error function kind '{}' in '{}'.".format(kind, spec))
