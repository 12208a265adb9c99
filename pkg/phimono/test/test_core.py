import math
import random
import tempfile
from pathlib import Path
from unittest import TestCase

import numpy

from phimono.core import CheckReport, DegenerateIntervalError, ExtendedReal, Grid, Interpolation, Interval, \
    OutOfDomainError, ParsingException, SampledFunction, Verdict, evaluate, load_function, make_grid, \
    pointwise_maximum, pointwise_minimum


class IntervalTest(TestCase):
    def test_rejects_empty_and_unbounded_left(self):
        with self.assertRaises(DegenerateIntervalError):
            Interval(1., 1.)
        with self.assertRaises(DegenerateIntervalError):
            Interval(-math.inf, 0.)

    def test_unbounded_right(self):
        interval = Interval(0., math.inf)
        self.assertFalse(interval.is_bounded())
        self.assertTrue(interval.contains(1e9))
        self.assertFalse(interval.contains(0.))


class GridTest(TestCase):
    def test_make_grid_with_explicit_margin(self):
        numpy.testing.assert_allclose([0.25, 0.5, 0.75], make_grid(Interval(0., 1.), 3, margin=0.25).points)
        numpy.testing.assert_allclose([1., 3.], make_grid(Interval(0., 4.), 2, margin=1.).points)
        numpy.testing.assert_allclose([1., 3.25, 5.5, 7.75, 10.],
                                      make_grid(Interval(0., math.inf), 5, margin=1., horizon=10.).points)

    def test_spacing_is_constant(self):
        generator = random.Random(42)
        for _ in range(20):
            lo = generator.uniform(-5., 5.)
            grid = make_grid(Interval(lo, lo + generator.uniform(0.1, 10.)), generator.randrange(2, 500))
            steps = numpy.diff(grid.points)

            self.assertAlmostEqual(grid.spacing, float(numpy.min(steps)), delta=1e-9)

    def test_make_grid_keeps_margin(self):
        grid = make_grid(Interval(0., 1.), 11)

        self.assertEqual(11, len(grid))
        self.assertAlmostEqual(0.001, grid.first)
        self.assertAlmostEqual(0.999, grid.last)

    def test_make_grid_on_half_line_uses_horizon(self):
        grid = make_grid(Interval(0., math.inf), 5, horizon=4.)

        self.assertAlmostEqual(4., grid.last)

    def test_single_point_is_degenerate(self):
        with self.assertRaises(DegenerateIntervalError):
            make_grid(Interval(0., 1.), 1)

    def test_points_outside_rejected(self):
        with self.assertRaises(OutOfDomainError):
            Grid(Interval(0., 1.), [0., 0.5])

    def test_points_are_read_only(self):
        grid = make_grid(Interval(0., 1.), 5)

        with self.assertRaises(ValueError):
            grid.points[0] = 0.5

    def test_refined_inserts_midpoints(self):
        grid = make_grid(Interval(0., 1.), 5)
        refined = grid.refined()

        self.assertEqual(9, len(refined))
        self.assertEqual(grid.first, refined.first)
        self.assertEqual(grid.last, refined.last)

    def test_subset_keeps_extremes(self):
        grid = make_grid(Interval(0., 1.), 101)
        subset = grid.subset(11)

        self.assertEqual(11, len(subset))
        self.assertEqual(grid.first, subset.first)
        self.assertEqual(grid.last, subset.last)

    def test_on_error_domain_is_closed_left(self):
        grid = Grid.on_error_domain(2., 10, upper=0.9)

        self.assertEqual(0., grid.first)
        self.assertAlmostEqual(0.9, grid.last)
        self.assertAlmostEqual(0.1, grid.points[1])

    def test_index_of(self):
        grid = make_grid(Interval(0., 1.), 11)

        self.assertEqual(5, grid.index_of(grid.points[5]))
        with self.assertRaises(ValueError):
            grid.index_of(0.55)


class ExtendedRealTest(TestCase):
    def test_ordering(self):
        self.assertLess(ExtendedReal.negative_infinity, ExtendedReal(-1e300))
        self.assertEqual(ExtendedReal(2.), ExtendedReal.minimum([ExtendedReal(3.), 2., ExtendedReal.positive_infinity]))
        self.assertFalse(ExtendedReal.positive_infinity.is_finite)

    def test_nan_rejected(self):
        with self.assertRaises(ValueError):
            ExtendedReal(math.nan)


class SampledFunctionTest(TestCase):
    def setUp(self):
        self.domain = Interval(0., 1.)

    def test_interpolation_rules(self):
        xs, ys = [0.2, 0.4, 0.6], [1., 2., 4.]
        linear = SampledFunction(self.domain, xs, ys)
        left = SampledFunction(self.domain, xs, ys, rule=Interpolation.left_step)
        right = SampledFunction(self.domain, xs, ys, rule=Interpolation.right_step)

        self.assertAlmostEqual(3., linear(0.5))
        self.assertEqual(2., left(0.5))
        self.assertEqual(4., right(0.5))
        self.assertEqual(1., linear(0.1))
        self.assertEqual(4., left(0.9))

    def test_evaluation_outside_domain(self):
        f = SampledFunction(self.domain, [0.2, 0.4], [1., 2.])

        with self.assertRaises(OutOfDomainError):
            evaluate(f, 1.)

    def test_csv(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "f.csv"
            f = SampledFunction(self.domain, [0.1, 0.3, 0.7], [-1., 0.25, 1. / 3])
            f.save_csv(path)

            loaded = load_function(str(path), self.domain)

            numpy.testing.assert_array_equal(f.xs, loaded.xs)
            numpy.testing.assert_array_equal(f.ys, loaded.ys)

    def test_malformed_csv(self):
        contents = ["a,b\n0.1,1\n", "x,y\n0.1,one\n", "x,y\n0.1,nan\n", "x,y\n0.1,1,2\n", "x,y\n",
                    "x,y\n0.3,1\n0.2,2\n"]
        with tempfile.TemporaryDirectory() as directory:
            for index, content in enumerate(contents):
                path = Path(directory) / "malformed{}.csv".format(index)
                path.write_text(content, encoding='utf8')

                with self.assertRaises(ParsingException, msg=content):
                    SampledFunction.load_csv(path, self.domain)


class PointwiseTest(TestCase):
    def test_minimum_and_maximum(self):
        domain = Interval(0., 1.)
        f = load_function("x", domain)
        g = load_function("1 - x", domain)
        xs = numpy.array([0.2, 0.5, 0.8])

        numpy.testing.assert_allclose([0.2, 0.5, 0.2], pointwise_minimum([f, g]).values(xs))
        numpy.testing.assert_allclose([0.8, 0.5, 0.8], pointwise_maximum([f, g]).values(xs))
        numpy.testing.assert_allclose([-0.2, -0.5, -0.8], f.negated().values(xs))


class CheckReportTest(TestCase):
    def test_holds_without_witness(self):
        report = CheckReport.from_margins([0.5, -1e-12, 2.], [0., 1., 2.], [1., 2., 3.], 1e-9)

        self.assertEqual(Verdict.holds, report.verdict)
        self.assertIsNone(report.witness)
        self.assertEqual(3, report.pairs_checked)

    def test_fails_at_worst_margin(self):
        report = CheckReport.from_margins([0.5, -0.25, -1.], [0., 1., 2.], [1., 2., 3.], 1e-9, middle=[5., 6., 7.])

        self.assertFalse(report.holds)
        self.assertEqual(-1., report.worst_margin)
        self.assertEqual((2., 3., -1., 7.), (report.witness.x, report.witness.y, report.witness.slack,
                                             report.witness.middle))

    def test_empty_holds(self):
        report = CheckReport.from_margins([], [], [], 1e-9)

        self.assertTrue(report.holds)
        self.assertEqual(math.inf, report.worst_margin)

    def test_nan_margin(self):
        with self.assertRaises(ArithmeticError):
            CheckReport.from_margins([math.nan], [0.], [1.], 1e-9)
