import csv
import math
from abc import ABCMeta, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from functools import total_ordering
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy
from lazy import lazy
from numpy import ndarray

from phimono.configuration import default_configuration


class ParsingException(Exception):
    pass


class OutOfDomainError(ValueError):
    pass


class DegenerateIntervalError(ValueError):
    pass


class ScreeningError(ValueError):
    """A hypothesis of an operation was found violated on its screening grid; `report` holds the failed check."""

    def __init__(self, message: str, report: Optional['CheckReport'] = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class Interval:
    """Open interval ]lo, hi[; hi may be +inf."""
    lo: float
    hi: float

    def __post_init__(self):
        if not math.isfinite(self.lo):
            raise DegenerateIntervalError("Left endpoint must be finite, got {}.".format(self.lo))
        if math.isnan(self.hi) or self.hi == -math.inf:
            raise DegenerateIntervalError("Invalid right endpoint {}.".format(self.hi))
        if not self.lo < self.hi:
            raise DegenerateIntervalError("Empty interval ]{}, {}[.".format(self.lo, self.hi))

    def length(self) -> float:
        return self.hi - self.lo

    def is_bounded(self) -> bool:
        return math.isfinite(self.hi)

    def contains(self, x: float) -> bool:
        return self.lo < x < self.hi

    def __str__(self):
        return "]{}, {}[".format(self.lo, self.hi)


class Grid:
    """
    Strictly increasing sample points inside an interval. Grids on the half-open error domain
    [0, l[ admit the left endpoint (`closed_left`).
    """

    def __init__(self, interval: Interval, points: Iterable[float], margin: float = 0., closed_left: bool = False):
        points = numpy.array(list(points), dtype=float)

        if len(points) < 2:
            raise DegenerateIntervalError("A grid needs at least 2 points, got {}.".format(len(points)))
        if not numpy.all(numpy.diff(points) > 0):
            raise ValueError("Grid points must be strictly increasing.")
        if (points[0] < interval.lo) if closed_left else (points[0] <= interval.lo):
            raise OutOfDomainError("Grid point {} outside {}.".format(points[0], interval))
        if points[-1] >= interval.hi:
            raise OutOfDomainError("Grid point {} outside {}.".format(points[-1], interval))
        if points[0] < interval.lo + margin or (interval.is_bounded() and points[-1] > interval.hi - margin):
            raise OutOfDomainError("Grid points closer than margin {} to the endpoints of {}.".format(
                margin, interval))

        points.flags.writeable = False
        self.interval = interval
        self.points = points
        self.margin = margin
        self.closed_left = closed_left

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def first(self) -> float:
        return float(self.points[0])

    @property
    def last(self) -> float:
        return float(self.points[-1])

    @property
    def diameter(self) -> float:
        return self.last - self.first

    @lazy
    def spacing(self) -> float:
        return float(numpy.max(numpy.diff(self.points)))

    def nearest(self, value: float) -> float:
        return float(self.points[numpy.argmin(numpy.abs(self.points - value))])

    def index_of(self, value: float, tolerance: float = 1e-12) -> int:
        index = int(numpy.argmin(numpy.abs(self.points - value)))
        if abs(self.points[index] - value) > tolerance * max(1., abs(value)):
            raise ValueError("{} is not a grid point.".format(value))
        return index

    def refined(self) -> 'Grid':
        midpoints = (self.points[:-1] + self.points[1:]) / 2
        return Grid(self.interval, numpy.sort(numpy.concatenate([self.points, midpoints])),
                    margin=self.margin, closed_left=self.closed_left)

    def subset(self, count: int) -> 'Grid':
        """At most `count` points, evenly picked by index and keeping both extremes."""
        if len(self) <= count:
            return self
        indices = numpy.unique(numpy.round(numpy.linspace(0, len(self) - 1, count)).astype(int))
        return Grid(self.interval, self.points[indices], margin=self.margin, closed_left=self.closed_left)

    @staticmethod
    def on_error_domain(domain_length: float, n: int, upper: Optional[float] = None,
                        horizon: Optional[float] = None) -> 'Grid':
        """n equally spaced points on [0, upper], upper < domain_length (default: the last of n+1 cells)."""
        if upper is None:
            upper = domain_length * (n - 1) / n if math.isfinite(domain_length) else \
                (default_configuration.horizon if horizon is None else horizon)
        if not 0 < upper < domain_length:
            raise DegenerateIntervalError("Upper grid end {} outside ]0, {}[.".format(upper, domain_length))
        return Grid(Interval(0., domain_length), numpy.linspace(0., upper, n), closed_left=True)

    def __str__(self):
        return "{} points on [{}, {}]".format(len(self), self.first, self.last)


def make_grid(interval: Interval, n: int, margin: Optional[float] = None, horizon: Optional[float] = None) -> Grid:
    if n < 2:
        raise DegenerateIntervalError("A grid needs at least 2 points, got {}.".format(n))
    if horizon is None:
        horizon = default_configuration.horizon

    upper_limit = interval.hi if interval.is_bounded() else horizon
    if margin is None:
        margin = (upper_limit - interval.lo) * default_configuration.margin_fraction
    if margin <= 0:
        raise DegenerateIntervalError("Margin must be positive, got {}.".format(margin))

    lower = interval.lo + margin
    upper = interval.hi - margin if interval.is_bounded() else horizon
    if interval.is_bounded() and margin >= interval.length() / 2 or not lower < upper:
        raise DegenerateIntervalError("Clipped range [{}, {}] of {} is empty.".format(lower, upper, interval))

    return Grid(interval, numpy.linspace(lower, upper, n), margin=margin)


@total_ordering
class ExtendedReal:
    """A value of [-inf, inf]."""

    def __init__(self, value: float):
        value = float(value)
        if math.isnan(value):
            raise ValueError("NaN is not an extended real.")
        self.value = value

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    def __float__(self):
        return self.value

    def __eq__(self, other):
        return self.value == float(other)

    def __lt__(self, other):
        return self.value < float(other)

    def __hash__(self):
        return hash(self.value)

    def __neg__(self):
        return ExtendedReal(-self.value)

    def __repr__(self):
        return "ExtendedReal({})".format(self.value)

    @staticmethod
    def minimum(values: Iterable['ExtendedReal']) -> 'ExtendedReal':
        return min(ExtendedReal(float(v)) for v in values)

    @staticmethod
    def maximum(values: Iterable['ExtendedReal']) -> 'ExtendedReal':
        return max(ExtendedReal(float(v)) for v in values)


ExtendedReal.negative_infinity = ExtendedReal(-math.inf)
ExtendedReal.positive_infinity = ExtendedReal(math.inf)


class Interpolation(Enum):
    linear = "linear"
    left_step = "left-step"
    right_step = "right-step"


def interpolate(sample_xs: ndarray, sample_ys: ndarray, rule: Interpolation, xs: ndarray) -> ndarray:
    """Evaluates a table; outside the sample hull the nearest sample is used."""
    if rule == Interpolation.linear:
        return numpy.interp(xs, sample_xs, sample_ys)
    if rule == Interpolation.left_step:
        indices = numpy.searchsorted(sample_xs, xs, side='right') - 1
    elif rule == Interpolation.right_step:
        indices = numpy.searchsorted(sample_xs, xs, side='left')
    else:
        raise ValueError(rule)

    return sample_ys[numpy.clip(indices, 0, len(sample_xs) - 1)]


class RealFunction(metaclass=ABCMeta):
    def __init__(self, domain: Interval, knots: Sequence[float] = (), graded_quadrature: bool = False,
                 extrema_at_knots: bool = False):
        self.domain = domain
        self.knots = numpy.unique(numpy.array(list(knots), dtype=float))
        # power-type behaviour at knots: quadrature grades its nodes towards them
        self.graded_quadrature = graded_quadrature
        # extrema over a closed subinterval are attained at its ends or at knots
        self.extrema_at_knots = extrema_at_knots

    @abstractmethod
    def _body(self, xs: ndarray) -> ndarray: raise NotImplementedError

    def extended_values(self, xs) -> ndarray:
        """Values without the domain check, e.g. at the closed end of an error domain."""
        return numpy.asarray(self._body(numpy.asarray(xs, dtype=float)), dtype=float)

    def values(self, xs) -> ndarray:
        xs = numpy.asarray(xs, dtype=float)
        outside = (xs <= self.domain.lo) | (xs >= self.domain.hi)
        if numpy.any(outside):
            raise OutOfDomainError("{} is outside the domain {} of {}.".format(
                xs[outside].flat[0], self.domain, self))
        return self.extended_values(xs)

    def __call__(self, x: float) -> float:
        return float(self.values(numpy.array([x]))[0])

    def knots_within(self, a: float, b: float) -> ndarray:
        return self.knots[(self.knots > a) & (self.knots < b)]

    def negated(self) -> 'RealFunction':
        return CallableFunction(self.domain, lambda xs: -self._body(xs), knots=self.knots,
                                description="-({})".format(self), graded_quadrature=self.graded_quadrature,
                                extrema_at_knots=self.extrema_at_knots)

    def sampled(self, points: Iterable[float], rule: Interpolation = Interpolation.linear) -> 'SampledFunction':
        points = numpy.array(list(points), dtype=float)
        return SampledFunction(self.domain, points, self.values(points), rule=rule)


class CallableFunction(RealFunction):
    """Closed form given by a vectorized callable, with declared knots (kinks or jumps)."""

    def __init__(self, domain: Interval, body: Callable[[ndarray], ndarray], knots: Sequence[float] = (),
                 description: str = "callable", graded_quadrature: bool = False, extrema_at_knots: bool = False):
        super().__init__(domain, knots=knots, graded_quadrature=graded_quadrature, extrema_at_knots=extrema_at_knots)
        self.body = body
        self.description = description

    def _body(self, xs: ndarray) -> ndarray:
        return self.body(xs)

    def __str__(self):
        return self.description


class SampledFunction(RealFunction):
    def __init__(self, domain: Interval, xs: Iterable[float], ys: Iterable[float],
                 rule: Interpolation = Interpolation.linear):
        xs = numpy.array(list(xs), dtype=float)
        ys = numpy.array(list(ys), dtype=float)

        if len(xs) == 0 or len(xs) != len(ys):
            raise ValueError("Sample table needs equally many x and y values, got {} and {}.".format(len(xs), len(ys)))
        if not numpy.all(numpy.diff(xs) > 0):
            raise ValueError("Sample x values must be strictly increasing.")
        if not numpy.all(numpy.isfinite(ys)):
            raise ValueError("Sample y values must be finite.")
        if xs[0] <= domain.lo or xs[-1] >= domain.hi:
            raise OutOfDomainError("Samples [{}, {}] are not inside {}.".format(xs[0], xs[-1], domain))

        xs.flags.writeable = False
        ys.flags.writeable = False
        super().__init__(domain, knots=xs, extrema_at_knots=True)
        self.xs = xs
        self.ys = ys
        self.rule = rule

    def _body(self, xs: ndarray) -> ndarray:
        return interpolate(self.xs, self.ys, self.rule, xs)

    def __str__(self):
        return "table of {} samples ({})".format(len(self.xs), self.rule.value)

    def save_csv(self, csv_file: Path) -> None:
        with csv_file.open('w', encoding='utf8', newline='') as opened_csv:
            writer = csv.writer(opened_csv, lineterminator='\n')
            writer.writerow(("x", "y"))
            for x, y in zip(self.xs, self.ys):
                writer.writerow((repr(float(x)), repr(float(y))))

    @staticmethod
    def read_csv(csv_file: Path) -> (ndarray, ndarray):
        try:
            with csv_file.open(encoding='utf8', newline='') as opened_csv:
                rows = [row for row in csv.reader(opened_csv) if row]
        except UnicodeDecodeError as e:
            raise ParsingException("{} is not UTF-8: {}".format(csv_file, e))

        if not rows or [cell.strip() for cell in rows[0]] != ["x", "y"]:
            raise ParsingException("{} must start with the header 'x,y'.".format(csv_file))

        def parse(line_number: int, cell: str) -> float:
            try:
                value = float(cell)
            except ValueError:
                raise ParsingException("{}:{}: '{}' is not a decimal number.".format(csv_file, line_number, cell))
            if not math.isfinite(value):
                raise ParsingException("{}:{}: '{}' is not finite.".format(csv_file, line_number, cell))
            return value

        pairs = []
        for line_number, row in enumerate(rows[1:], start=2):
            if len(row) != 2:
                raise ParsingException("{}:{}: expected 2 columns, got {}.".format(csv_file, line_number, len(row)))
            pairs.append((parse(line_number, row[0]), parse(line_number, row[1])))

        if not pairs:
            raise ParsingException("{} contains no samples.".format(csv_file))

        xs, ys = (numpy.array(column) for column in zip(*pairs))
        if not numpy.all(numpy.diff(xs) > 0):
            raise ParsingException("{}: x values must be strictly increasing.".format(csv_file))

        return xs, ys

    @staticmethod
    def load_csv(csv_file: Path, domain: Interval, rule: Interpolation = Interpolation.linear) -> 'SampledFunction':
        xs, ys = SampledFunction.read_csv(csv_file)
        return SampledFunction(domain, xs, ys, rule=rule)


def evaluate(f: RealFunction, x: float) -> float:
    return f(x)


def load_function(spec: str, domain: Interval) -> RealFunction:
    """A CSV path (sampled table) or a closed-form expression in x."""
    if spec.lower().endswith(".csv") or Path(spec).is_file():
        return SampledFunction.load_csv(Path(spec), domain)

    from phimono.expression import ExpressionFunction
    return ExpressionFunction(domain, spec)


def _pointwise(functions: List[RealFunction], combine: Callable[[ndarray], ndarray], name: str) -> RealFunction:
    if not functions:
        raise ValueError("At least one function is needed.")
    domain = functions[0].domain
    if any(f.domain != domain for f in functions):
        raise ValueError("Functions must share their domain.")

    return CallableFunction(
        domain, lambda xs: combine(numpy.stack([f.extended_values(xs) for f in functions])),
        knots=numpy.concatenate([f.knots for f in functions]),
        description="{}({})".format(name, ", ".join(str(f) for f in functions)),
        graded_quadrature=any(f.graded_quadrature for f in functions))


def pointwise_minimum(functions: List[RealFunction]) -> RealFunction:
    return _pointwise(functions, lambda stacked: numpy.min(stacked, axis=0), "min")


def pointwise_maximum(functions: List[RealFunction]) -> RealFunction:
    return _pointwise(functions, lambda stacked: numpy.max(stacked, axis=0), "max")


class Verdict(Enum):
    holds = "holds"
    fails = "fails"


@dataclass(frozen=True)
class Witness:
    x: float
    y: float
    slack: float
    middle: Optional[float] = None


@dataclass(frozen=True)
class CheckReport:
    """
    Outcome of a grid verification. Margins are right-hand side minus left-hand side; the verdict fails
    exactly when the most negative margin is below -tolerance, and only then is a witness attached.
    """
    verdict: Verdict
    worst_margin: float
    witness: Optional[Witness]
    pairs_checked: int
    tolerance: float
    reference: str = ""
    details: Dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict == Verdict.holds

    @staticmethod
    def from_margins(margins, first, second, tolerance: float, reference: str = "", middle=None,
                     details: Optional[Dict] = None) -> 'CheckReport':
        margins = numpy.ravel(numpy.asarray(margins, dtype=float))
        first = numpy.ravel(numpy.broadcast_to(numpy.asarray(first, dtype=float), margins.shape))
        second = numpy.ravel(numpy.broadcast_to(numpy.asarray(second, dtype=float), margins.shape))
        details = {} if details is None else details

        if len(margins) == 0:
            return CheckReport(Verdict.holds, math.inf, None, 0, tolerance, reference, details)
        if numpy.any(numpy.isnan(margins)):
            raise ArithmeticError("Undefined margin encountered while checking {}.".format(reference))

        worst = int(numpy.argmin(margins))
        worst_margin = float(margins[worst])
        if worst_margin >= -tolerance:
            return CheckReport(Verdict.holds, worst_margin, None, len(margins), tolerance, reference, details)

        witness = Witness(float(first[worst]), float(second[worst]), worst_margin,
                          None if middle is None else float(numpy.ravel(
                              numpy.broadcast_to(numpy.asarray(middle, dtype=float), margins.shape))[worst]))
        return CheckReport(Verdict.fails, worst_margin, witness, len(margins), tolerance, reference, details)

    def __str__(self):
        return "{}: {} (worst margin {:.6g} over {} pairs{})".format(
            self.reference, self.verdict.value, self.worst_margin, self.pairs_checked,
            "" if self.witness is None else ", witness ({:.6g}, {:.6g})".format(self.witness.x, self.witness.y))
