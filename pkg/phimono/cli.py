import argparse
import math
import sys
from dataclasses import dataclass
from enum import Enum
from multiprocessing.pool import ThreadPool
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy

from phimono.analysis import InterpolationSide, build_holder_interpolant, build_two_point, check_diagonal_bounds, \
    check_feg_equations, check_feh_equations, check_phi_holder, check_phi_monotone, can_interpolate_holder, \
    can_interpolate_monotone, interpolation_sandwich, NegatedTwoPoint
from phimono import configuration
from phimono.configuration import LoggedRun, default_configuration
from phimono.core import CheckReport, Grid, Interval, ParsingException, RealFunction, ScreeningError, load_function, \
    make_grid
from phimono.error_fn import parse_error_function
from phimono.inequalities import BoundCertificate, ConverseVariant, check_converse_conclusion, \
    check_converse_premise, hh_bounds, hh_sharpness, iterate_T, ostrowski_bound, \
    ostrowski_sharpness, ostrowski_witness
from phimono.numerics import QuadratureRule, QuadratureSpec
from phimono.report import Report, emit_plot_data
from phimono.tools import log, timestamp


class Suite(Enum):
    monotone = "monotone"
    holder = "holder"
    feh = "feh"
    hh = "hh"
    ostrowski = "ostrowski"
    converse = "converse"
    all = "all"


@dataclass(frozen=True)
class RunConfig:
    function_spec: Optional[str]
    error_spec: str
    suite: Suite
    interval: Tuple[float, float]
    grid_n: int
    tolerance: float
    quad: QuadratureSpec
    output: Path
    plots: Optional[Path] = None
    point: Optional[float] = None
    variant: ConverseVariant = ConverseVariant.left
    iterates: int = 5
    workers: int = 1

    def as_dict(self) -> Dict:
        return {"function": self.function_spec, "error": self.error_spec, "suite": self.suite.value,
                "interval": list(self.interval), "grid_n": self.grid_n, "tolerance": self.tolerance,
                "quadrature": self.quad.as_dict(), "output": str(self.output),
                "plots": None if self.plots is None else str(self.plots), "point": self.point,
                "variant": self.variant.value, "iterates": self.iterates, "workers": self.workers}


def parse_interval(text: str) -> Tuple[float, float]:
    try:
        lo, hi = (float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("Expected an interval 'lo,hi', got '{}'.".format(text))
    if not math.isfinite(lo) or math.isnan(hi) or not lo < hi:
        raise argparse.ArgumentTypeError("Invalid interval ]{}, {}[.".format(lo, hi))
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="analyze", description="Verify approximate monotonicity, Hoelder-type bounds and the associated "
                                    "Hermite-Hadamard and Ostrowski inequalities on grids.")
    parser.add_argument("--suite", required=True, choices=[suite.value for suite in Suite])
    parser.add_argument("--function", help="Expression in x or path of a CSV table with header x,y.")
    parser.add_argument("--error", required=True,
                        help="power:c=<real>,p=<real> | table:<path.csv> | expr:<expression> | transform:<spec>")
    parser.add_argument("--interval", required=True, type=parse_interval, help="lo,hi (hi may be inf)")
    parser.add_argument("--grid-n", type=int, default=default_configuration.grid_size)
    parser.add_argument("--tol", type=float, default=default_configuration.tolerance)
    parser.add_argument("--quad-tol", type=float, default=default_configuration.quadrature_tolerance)
    parser.add_argument("--quad-rule", choices=[rule.value for rule in QuadratureRule],
                        default=default_configuration.quadrature_rule)
    parser.add_argument("--out", type=Path, help="Report path (default: timestamped file in the reports directory).")
    parser.add_argument("--plots", type=Path, help="Directory for two-column plot data files.")
    parser.add_argument("--point", type=float, help="Interpolation and Ostrowski point (default: grid midpoint).")
    parser.add_argument("--variant", choices=[variant.value for variant in ConverseVariant],
                        default=ConverseVariant.left.value)
    parser.add_argument("--iterates", type=int, default=5)
    parser.add_argument("--workers", type=int, default=1)
    return parser


def config_from_arguments(arguments: argparse.Namespace) -> RunConfig:
    suite = Suite(arguments.suite)
    output = arguments.out if arguments.out is not None else \
        configuration.default_data_directories.reports_directory / "{}-{}.json".format(timestamp(), suite.value)
    return RunConfig(
        function_spec=arguments.function, error_spec=arguments.error, suite=suite, interval=arguments.interval,
        grid_n=arguments.grid_n, tolerance=arguments.tol,
        quad=QuadratureSpec(rule=QuadratureRule(arguments.quad_rule),
                            initial_subdivisions=default_configuration.quadrature_initial_subdivisions,
                            tolerance=arguments.quad_tol,
                            max_refinements=default_configuration.quadrature_max_refinements),
        output=output, plots=arguments.plots, point=arguments.point, variant=ConverseVariant(arguments.variant),
        iterates=arguments.iterates, workers=arguments.workers)


Outcome = Tuple[str, object]


def failed_screen(error: ScreeningError, reference: str) -> CheckReport:
    """A bound check whose hypothesis screen failed, reported as that failed screen."""
    if error.report is None:
        raise error
    screen = error.report
    return CheckReport(screen.verdict, screen.worst_margin, screen.witness, screen.pairs_checked, screen.tolerance,
                       reference=reference, details={"screen": screen.reference, "reason": str(error)})


class SuiteRun:
    """Inputs shared by the checks of one run and the check bundle of every suite."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.domain = Interval(*config.interval)
        self.function = None if config.function_spec is None else load_function(config.function_spec, self.domain)
        # error functions of the command line live on [0, inf[, so segments may span the whole interval
        self.error = parse_error_function(config.error_spec)
        self.grid = make_grid(self.domain, config.grid_n)
        self.point = self.grid.nearest(self.grid.points[len(self.grid) // 2] if config.point is None
                                       else config.point)
        self.curves: Dict[str, Tuple[numpy.ndarray, numpy.ndarray]] = {}

    def provenance(self, grid: Optional[Grid] = None) -> Dict:
        grid = self.grid if grid is None else grid
        return {"grid_size": len(grid), "grid_range": [grid.first, grid.last], "grid_spacing": grid.spacing,
                "tolerance": self.config.tolerance, "quadrature": self.config.quad.as_dict()}

    def require_function(self, suite: Suite) -> RealFunction:
        if self.function is None:
            raise ParsingException("Suite '{}' needs --function.".format(suite.value))
        return self.function

    def curve(self, name: str, f: RealFunction, xs: Optional[numpy.ndarray] = None) -> None:
        xs = self.grid.points if xs is None else xs
        self.curves[name] = (xs, f.values(xs))

    def segment(self) -> (float, float):
        """The interval itself when bounded, the grid range otherwise."""
        return (self.domain.lo, self.domain.hi) if self.domain.is_bounded() else (self.grid.first, self.grid.last)

    def monotone(self) -> List[Callable[[], List[Outcome]]]:
        f = self.require_function(Suite.monotone)
        tol = self.config.tolerance

        def interpolation() -> List[Outcome]:
            lower, upper = interpolation_sandwich(f, self.point, self.error, tol=tol)
            self.curve("h_p", lower)
            self.curve("h_sup_p", upper)
            return [("monotone.interpolation_{}".format(side.value),
                     can_interpolate_monotone(f, self.point, side, self.error, self.grid, tol))
                    for side in InterpolationSide]

        return [lambda: [("monotone.phi_monotone", check_phi_monotone(f, self.error, self.grid, tol))],
                interpolation]

    def holder(self) -> List[Callable[[], List[Outcome]]]:
        f = self.require_function(Suite.holder)
        tol = self.config.tolerance

        def interpolation() -> List[Outcome]:
            self.curve("holder_lower_p", build_holder_interpolant(f, self.point, InterpolationSide.below, self.error))
            self.curve("holder_upper_p", build_holder_interpolant(f, self.point, InterpolationSide.above, self.error))
            return [("holder.interpolation_{}".format(side.value),
                     can_interpolate_holder(f, self.point, side, self.error, self.grid, tol))
                    for side in InterpolationSide]

        return [lambda: [("holder.phi_holder", check_phi_holder(f, self.error, self.grid, tol))], interpolation]

    def feh(self) -> List[Callable[[], List[Outcome]]]:
        f = self.require_function(Suite.feh)
        grid = self.grid.subset(default_configuration.dense_cache_limit)
        # the equations are exact for tables
        H = build_two_point(f if f.extrema_at_knots else f.sampled(grid.points))
        tol = self.config.tolerance
        return [lambda: [("feh.min_max_equations", check_feh_equations(H, grid, tol)),
                         ("feh.max_min_equations", check_feg_equations(NegatedTwoPoint(H), grid, tol)),
                         ("feh.diagonal_bounds", check_diagonal_bounds(H, grid, False, tol))]]

    def hh(self) -> List[Callable[[], List[Outcome]]]:
        x, y = self.segment()

        def sharpness() -> List[Outcome]:
            lower, upper = hh_sharpness(self.error, x, y, self.config.quad)
            xs = numpy.linspace(x, y, len(self.grid))
            self.curve("f_lower_extremal", lower.witness_function, xs)
            self.curve("f_upper_extremal", upper.witness_function, xs)
            return [("hh.sharpness_lower", lower), ("hh.sharpness_upper", upper)]

        tasks = [sharpness]
        if self.function is not None:
            def bounds() -> List[Outcome]:
                try:
                    lower_slack, upper_slack = hh_bounds(self.function, self.error, self.grid.first, self.grid.last,
                                                         self.config.quad, self.config.tolerance)
                except ScreeningError as e:
                    return [("hh.bounds", failed_screen(e, "Eq. HH"))]
                return [("hh.bounds", CheckReport.from_margins(
                    [lower_slack, upper_slack], [self.grid.first] * 2, [self.grid.last] * 2, self.config.tolerance,
                    reference="Eq. HH",
                    details={"lower_slack": lower_slack, "upper_slack": upper_slack}))]

            tasks.append(bounds)
        return tasks

    def ostrowski(self) -> List[Callable[[], List[Outcome]]]:
        x, y = self.segment()
        point = min(max(self.point, x), y)

        def sharpness() -> List[Outcome]:
            certificate = ostrowski_sharpness(self.error, x, y, point, self.config.quad)
            self.curve("phi_p", ostrowski_witness(self.error, point, self.domain))
            return [("ostrowski.sharpness", certificate)]

        tasks = [sharpness]
        if self.function is not None:
            def bound() -> List[Outcome]:
                try:
                    return [("ostrowski.bound", ostrowski_bound(self.function, self.error, self.grid.first,
                                                                self.grid.last, self.point, self.config.quad,
                                                                self.config.tolerance))]
                except ScreeningError as e:
                    return [("ostrowski.bound", failed_screen(e, "Eq. OI"))]

            tasks.append(bound)
        return tasks

    def converse(self) -> List[Callable[[], List[Outcome]]]:
        f = self.require_function(Suite.converse)
        variant = self.config.variant
        quad, tol = self.config.quad, self.config.tolerance

        def iterates() -> List[Outcome]:
            for index, iterate in enumerate(iterate_T(f, self.error, self.grid.first, self.grid.last,
                                                      self.config.iterates, quad), start=1):
                self.curve("T{}".format(index), iterate, iterate.xs)
            return []

        return [lambda: [("converse.premise_{}".format(variant.value),
                          check_converse_premise(f, self.error, variant, self.grid, quad, tol))],
                lambda: [("converse.conclusion_{}".format(variant.value),
                          check_converse_conclusion(f, self.error, variant, self.grid, quad, tol))],
                iterates]

    def tasks(self) -> List[Callable[[], List[Outcome]]]:
        bundles = {Suite.monotone: self.monotone, Suite.holder: self.holder, Suite.feh: self.feh, Suite.hh: self.hh,
                   Suite.ostrowski: self.ostrowski, Suite.converse: self.converse}
        suites = [suite for suite in Suite if suite != Suite.all] if self.config.suite == Suite.all \
            else [self.config.suite]
        return [task for suite in suites for task in bundles[suite]()]

    def run(self) -> Report:
        if self.function is not None:
            self.curve("f", self.function)

        tasks = self.tasks()
        if self.config.workers > 1:
            with ThreadPool(processes=self.config.workers) as pool:
                outcomes = pool.map(lambda task: task(), tasks)
        else:
            outcomes = [task() for task in tasks]

        report = Report(self.config.as_dict())
        for outcome_id, outcome in sorted((item for items in outcomes for item in items), key=lambda item: item[0]):
            if isinstance(outcome, BoundCertificate):
                report.add_certificate(outcome_id, outcome, self.provenance())
            else:
                report.add_check(outcome_id, outcome, self.provenance())
            log("{}: {}".format(outcome_id, outcome))
        for name, (xs, values) in self.curves.items():
            report.add_curve(name, xs, values)
        return report


input_errors = (ParsingException, ValueError, ArithmeticError, OSError)


def run_suite(config: RunConfig) -> int:
    """0 when every check holds and every certificate is sharp, 1 otherwise, 2 on input errors."""

    def action() -> int:
        try:
            report = SuiteRun(config).run()
            report.write(config.output)
            if config.plots is not None:
                emit_plot_data(report, config.plots)
        except input_errors as e:
            log("Error: {}".format(e))
            print("analyze: error: {}".format(e), file=sys.stderr)
            return 2

        status = report.exit_status()
        log("Wrote {} ({}).".format(config.output, "all hold" if status == 0 else "failures"))
        return status

    try:
        return LoggedRun(action, name="{}.log".format(config.output.stem),
                         results_directory=config.output.parent)()
    except OSError as e:
        print("analyze: error: {}".format(e), file=sys.stderr)
        return 2


def main(argv: Optional[Sequence[str]] = None) -> int:
    arguments = build_parser().parse_args(argv)
    try:
        config = config_from_arguments(arguments)
    except ValueError as e:
        print("analyze: error: {}".format(e), file=sys.stderr)
        return 2
    return run_suite(config)
