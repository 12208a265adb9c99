import math
import random
import tempfile
from pathlib import Path
from unittest import TestCase

import numpy

from phimono.core import Grid, Interpolation, OutOfDomainError, ParsingException
from phimono.error_fn import PowerErrorFunction, SingularTransformError, TabulatedErrorFunction, \
    TransformedErrorFunction, check_absolutely_subadditive, check_nondecreasing, check_nonnegative, \
    check_subadditive, eval_error, parse_error_function, transform_psi_to_phi, verify_cphi_identity


class PowerErrorFunctionTest(TestCase):
    def test_values(self):
        phi = PowerErrorFunction(2., 0.5)

        self.assertEqual(0., eval_error(phi, 0.))
        self.assertAlmostEqual(4., eval_error(phi, 4.))

    def test_domain(self):
        phi = PowerErrorFunction(1., 1., domain_length=1.)

        with self.assertRaises(OutOfDomainError):
            phi(1.)
        with self.assertRaises(OutOfDomainError):
            phi(-0.1)

    def test_invalid_parameters(self):
        with self.assertRaises(ValueError):
            PowerErrorFunction(-1., 1.)
        with self.assertRaises(ValueError):
            PowerErrorFunction(1., 0.)

    def test_integral_and_averages(self):
        phi = PowerErrorFunction(1., 1.)

        self.assertEqual(2., phi.integral(2.))
        self.assertAlmostEqual(1., phi.average(0., 2.))
        self.assertAlmostEqual(0.5, phi.average(-1., 1., absolute=True))
        self.assertAlmostEqual(0.5, phi.average(0.5, 0.5))

    def test_closed_forms_agree_with_quadrature(self):
        phi = PowerErrorFunction(1.5, 0.3)
        tabulated = TabulatedErrorFunction(phi._body, math.inf, description="quadrature")

        self.assertAlmostEqual(phi.integral(0.7), tabulated.integral(0.7), delta=1e-8)
        self.assertAlmostEqual(phi.average(-0.2, 0.6, absolute=True), tabulated.average(-0.2, 0.6, absolute=True),
                               delta=1e-8)


class TransformTest(TestCase):
    def test_power_is_exact(self):
        self.assertEqual(PowerErrorFunction(3., 0.5), transform_psi_to_phi(PowerErrorFunction(1., 0.5)))
        self.assertEqual(PowerErrorFunction(4., 1.), transform_psi_to_phi(PowerErrorFunction(2., 1.)))

    def test_forced_quadrature(self):
        phi = transform_psi_to_phi(PowerErrorFunction(1., 0.5), force_quadrature=True)

        self.assertIsInstance(phi, TransformedErrorFunction)
        self.assertAlmostEqual(3., phi(1.), delta=1e-6)
        self.assertEqual(0., phi(0.))

    def test_identity_on_random_powers(self):
        generator = random.Random(42)
        grid = Grid.on_error_domain(math.inf, 50, upper=2.)

        for _ in range(20):
            psi = PowerErrorFunction(generator.uniform(0.1, 2.), generator.uniform(0.1, 1.5))

            analytic = verify_cphi_identity(psi, transform_psi_to_phi(psi), grid, tol=1e-7)
            self.assertTrue(analytic.holds, msg=str(analytic))

        psi = PowerErrorFunction(generator.uniform(0.1, 2.), generator.uniform(0.1, 1.5))
        quadrature = verify_cphi_identity(psi, transform_psi_to_phi(psi, force_quadrature=True), grid, tol=1e-4)
        self.assertTrue(quadrature.holds, msg=str(quadrature))

    def test_identity_fails_for_wrong_phi(self):
        psi = PowerErrorFunction(1., 1.)
        report = verify_cphi_identity(psi, psi, Grid.on_error_domain(math.inf, 11, upper=1.))

        self.assertFalse(report.holds)
        self.assertAlmostEqual(0.5, report.details["worst_residual"])
        self.assertAlmostEqual(1., report.witness.x)

    def test_non_integrable_psi(self):
        with self.assertRaises(SingularTransformError):
            transform_psi_to_phi(parse_error_function("expr:1 / (1 + t)"))

    def test_zero_psi(self):
        phi = transform_psi_to_phi(parse_error_function("expr:0 * t"))

        self.assertEqual(0., phi(1.))

    def test_tabulated_transform(self):
        phi = parse_error_function("transform:expr:t")

        self.assertAlmostEqual(2., phi(1.), delta=1e-6)

    def test_table_vanishing_near_zero(self):
        psi = TabulatedErrorFunction.from_samples([0., .1, .2, .3, .4, .5, .6], [0., 0., 0., 0., 0., .1, .6])
        phi = transform_psi_to_phi(psi)

        self.assertEqual(0., phi.near_zero_fit.coefficient)
        self.assertEqual(0., phi(0.3))
        self.assertAlmostEqual(0.67317084, phi(0.6), delta=1e-6)

    def test_bounded_memo(self):
        psi = PowerErrorFunction(1., 0.5)
        ts = numpy.linspace(0.1, 2., 10)
        bounded = TransformedErrorFunction(psi, memo_size=4)
        unbounded = TransformedErrorFunction(psi)

        numpy.testing.assert_allclose(unbounded.values(ts), bounded.values(ts), rtol=1e-9)
        numpy.testing.assert_allclose(unbounded.values(ts[::-1]), bounded.values(ts[::-1]), rtol=1e-9)
        self.assertLessEqual(len(bounded._memo), 4)
        self.assertEqual(10, len(unbounded._memo))


class PropertyCheckTest(TestCase):
    def test_square_is_not_subadditive(self):
        phi = parse_error_function("expr:t^2", 2.)
        report = check_subadditive(phi, Grid.on_error_domain(2., 10, upper=0.9))

        self.assertFalse(report.holds)
        self.assertAlmostEqual(0.9, report.witness.x)
        self.assertAlmostEqual(0.9, report.witness.y)
        self.assertAlmostEqual(-1.62, report.worst_margin)

    def test_root_is_subadditive(self):
        phi = PowerErrorFunction(1., 0.5)
        grid = Grid.on_error_domain(math.inf, 41, upper=4.)

        self.assertTrue(check_subadditive(phi, grid).holds)
        self.assertTrue(check_absolutely_subadditive(phi, grid).holds)
        self.assertTrue(check_nondecreasing(phi, grid).holds)
        self.assertTrue(check_nonnegative(phi, grid).holds)

    def test_decreasing(self):
        phi = parse_error_function("expr:1 - t", 1.)
        report = check_nondecreasing(phi, Grid.on_error_domain(1., 10, upper=0.9))

        self.assertFalse(report.holds)
        self.assertEqual((0., 0.9), (report.witness.x, report.witness.y))
        self.assertAlmostEqual(-0.9, report.worst_margin)

    def test_subadditive_but_not_absolutely(self):
        phi = parse_error_function("expr:if(t == 0, 0, if(t < 1, 3, 1))")
        grid = Grid.on_error_domain(math.inf, 11, upper=2.)

        self.assertTrue(check_subadditive(phi, grid).holds)
        report = check_absolutely_subadditive(phi, grid)
        self.assertFalse(report.holds)
        self.assertAlmostEqual(-1., report.worst_margin)

    def test_negative_values(self):
        phi = TabulatedErrorFunction(lambda ts: ts - 0.5, math.inf, description="t - 0.5")
        report = check_nonnegative(phi, Grid.on_error_domain(math.inf, 11, upper=1.))

        self.assertFalse(report.holds)
        self.assertAlmostEqual(-0.5, report.worst_margin)
        self.assertEqual("§1", report.reference)

    def test_absolutely_subadditive_is_subadditive(self):
        generator = random.Random(42)
        grid = Grid.on_error_domain(math.inf, 21, upper=2.)
        candidates = [PowerErrorFunction(1., generator.uniform(0.1, 2.)) for _ in range(20)]
        for _ in range(20):
            ts = numpy.linspace(0., 2.5, 8)
            values = numpy.concatenate([[0.], numpy.cumsum([generator.uniform(0., 1.) for _ in ts[1:]])])
            rule = generator.choice(list(Interpolation))
            candidates.append(TabulatedErrorFunction.from_samples(ts, values, rule=rule))

        verdicts = set()
        for phi in candidates:
            absolutely = check_absolutely_subadditive(phi, grid).holds
            if absolutely:
                self.assertTrue(check_subadditive(phi, grid).holds, msg=str(phi))
            verdicts.add(absolutely)
        self.assertEqual({True, False}, verdicts)


class ParseErrorFunctionTest(TestCase):
    def test_power(self):
        self.assertEqual(PowerErrorFunction(2., 0.5), parse_error_function("power:c=2,p=0.5"))
        self.assertEqual(PowerErrorFunction(2., 1.), parse_error_function("transform:power:c=1,p=1"))

    def test_malformed(self):
        for spec in ["power:c=1", "power:c=-1,p=1", "power:c=x,p=1", "gauss:s=1", "power", "expr:y"]:
            with self.assertRaises(ParsingException, msg=spec):
                parse_error_function(spec)

    def test_negative_expression(self):
        for spec in ["expr:-t", "expr:t - 0.5", "expr:1 - t"]:
            with self.assertRaises(ParsingException, msg=spec):
                parse_error_function(spec)

    def test_table(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "phi.csv"
            path.write_text("x,y\n0,0\n1,1\n2,1.5\n", encoding='utf8')
            phi = parse_error_function("table:{}".format(path))

            numpy.testing.assert_allclose([0., 0.5, 1.25, 1.5], phi.values([0., 0.5, 1.5, 3.]))

    def test_negative_table(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "phi.csv"
            path.write_text("x,y\n0,0\n1,-1\n", encoding='utf8')

            with self.assertRaises(ParsingException):
                parse_error_function("table:{}".format(path))
