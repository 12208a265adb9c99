import json
import math
import tempfile
from pathlib import Path
from unittest import TestCase

import numpy

from phimono.core import CheckReport
from phimono.error_fn import PowerErrorFunction
from phimono.inequalities import hh_sharpness
from phimono.numerics import QuadratureSpec
from phimono.report import Report, emit_plot_data, jsonable, load_report, serialize


class JsonableTest(TestCase):
    def test_values(self):
        self.assertEqual({"a": ["inf", "-inf", "nan", 1, 0.5, True, None, "text"]},
                         jsonable({"a": (math.inf, -math.inf, math.nan, numpy.int64(1), numpy.float64(0.5),
                                         numpy.bool_(True), None, "text")}))
        self.assertEqual([0.25, 0.5], jsonable(numpy.array([0.25, 0.5])))
        self.assertEqual("a/b", jsonable(Path("a") / "b"))

    def test_serialize_is_stable(self):
        document = {"b": 0.1, "a": [1 / 3, math.inf]}
        text = serialize(document)

        self.assertTrue(text.index('"a"') < text.index('"b"'))
        self.assertEqual(text, serialize(json.loads(text)))


class ReportTest(TestCase):
    def setUp(self):
        self.report = Report({"suite": "test", "quadrature": QuadratureSpec().as_dict()})
        self.provenance = {"grid_size": 3, "tolerance": 1e-9}

    def test_checks_and_exit_status(self):
        self.report.add_check("b.holds", CheckReport.from_margins([1., 2.], [0., 1.], [1., 2.], 1e-9, "ok"),
                              self.provenance)
        self.assertEqual(0, self.report.exit_status())

        self.report.add_check("a.fails", CheckReport.from_margins([1., -2.], [0., 1.], [1., 2.], 1e-9, "bad",
                                                                  middle=[0.5, 1.5]), self.provenance)
        self.assertEqual(1, self.report.exit_status())

        checks = json.loads(self.report.to_json())["checks"]
        self.assertEqual(["a.fails", "b.holds"], [check["id"] for check in checks])
        self.assertEqual({"x": 1., "y": 2., "slack": -2., "middle": 1.5}, checks[0]["witness"])
        self.assertNotIn("witness", checks[1])
        self.assertEqual("bad", checks[0]["paper_ref"])
        self.assertEqual("fails", checks[0]["verdict"])

    def test_certificates(self):
        lower, upper = hh_sharpness(PowerErrorFunction(1., 1.), 0., 1.)
        self.report.add_certificate("hh.sharpness_lower", lower, self.provenance)
        self.report.add_certificate("hh.sharpness_upper", upper, self.provenance)

        certificates = self.report.document()["certificates"]
        self.assertEqual(0, self.report.exit_status())
        self.assertEqual("hh_lower", jsonable(certificates[0])["kind"])
        self.assertEqual("Eq. HH1", certificates[0]["paper_ref"])
        self.assertAlmostEqual(0.5, certificates[1]["bound_value"])

    def test_write_and_load(self):
        self.report.add_check("a", CheckReport.from_margins([], [], [], 1e-9, "empty"), self.provenance)

        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "nested" / "report.json"
            self.report.write(path)

            loaded = load_report(path)
            self.assertEqual("inf", loaded["checks"][0]["worst_margin"])
            self.assertEqual(path.read_text(encoding='utf8'), serialize(loaded))

    def test_plot_data(self):
        self.report.add_curve("f", [0.1, 0.2], [1., 4.])
        self.report.add_curve("h_p", [0.1, 0.2], [0.5, 1. / 3])

        with tempfile.TemporaryDirectory() as directory:
            files = emit_plot_data(self.report, Path(directory) / "plots")

            self.assertEqual(["f.dat", "h_p.dat"], [file.name for file in files])
            data = numpy.loadtxt(str(files[1]))
            numpy.testing.assert_array_equal([[0.1, 0.5], [0.2, 1. / 3]], data)
            self.assertTrue(files[0].read_text().startswith("# x value"))
