import tempfile
from pathlib import Path
from typing import Dict, List
from unittest import TestCase

from phimono.cli import Suite, build_parser, config_from_arguments, main
from phimono.report import load_report, serialize


class CliTest(TestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)
        self.out = self.root / "report.json"
        self.plots = self.root / "plots"

    def tearDown(self):
        self.directory.cleanup()

    def run_cli(self, *arguments: str) -> int:
        return main(list(arguments) + ["--out", str(self.out), "--plots", str(self.plots)])

    def checks(self) -> Dict[str, Dict]:
        return dict((check["id"], check) for check in load_report(self.out)["checks"])

    def plot_files(self) -> List[str]:
        return sorted(path.name for path in self.plots.iterdir())

    def test_monotone_failure(self):
        status = self.run_cli("--suite", "monotone", "--function=-2*x", "--error", "power:c=1,p=1", "--interval", "0,1")

        self.assertEqual(1, status)
        witness = self.checks()["monotone.phi_monotone"]["witness"]
        self.assertAlmostEqual(0.001, witness["x"])
        self.assertAlmostEqual(0.999, witness["y"])
        self.assertEqual("Eq. H1", self.checks()["monotone.phi_monotone"]["paper_ref"])
        self.assertEqual(["f.dat", "h_p.dat", "h_sup_p.dat"], self.plot_files())
        self.assertTrue((self.root / "report.log").exists())

    def test_hh_certificate(self):
        status = self.run_cli("--suite", "hh", "--function", "x", "--error", "power:c=1,p=1", "--interval", "0,1")

        self.assertEqual(0, status)
        certificates = load_report(self.out)["certificates"]
        self.assertEqual(["hh.sharpness_lower", "hh.sharpness_upper"], [c["id"] for c in certificates])
        for certificate in certificates:
            self.assertAlmostEqual(0.5, certificate["bound_value"])
            self.assertTrue(certificate["is_sharp"])
            self.assertEqual("Eq. HH1", certificate["paper_ref"])
        self.assertEqual("holds", self.checks()["hh.bounds"]["verdict"])
        self.assertEqual(["f.dat", "f_lower_extremal.dat", "f_upper_extremal.dat"], self.plot_files())

    def test_hh_without_function(self):
        self.assertEqual(0, self.run_cli("--suite", "hh", "--error", "power:c=1,p=1", "--interval", "0,2"))
        self.assertEqual(["f_lower_extremal.dat", "f_upper_extremal.dat"], self.plot_files())

    def test_holder_root(self):
        status = self.run_cli("--suite", "holder", "--function", "sqrt(x)", "--error", "power:c=1,p=0.5",
                              "--interval", "0,4")

        self.assertEqual(0, status)
        self.assertEqual({"holder.phi_holder", "holder.interpolation_below", "holder.interpolation_above"},
                         set(self.checks()))
        provenance = self.checks()["holder.phi_holder"]["provenance"]
        self.assertEqual(101, provenance["grid_size"])
        self.assertAlmostEqual(0.04, provenance["grid_spacing"], delta=1e-3)
        self.assertEqual(1e-9, provenance["tolerance"])
        self.assertEqual("composite-simpson", provenance["quadrature"]["rule"])

    def test_converse_iterates(self):
        status = self.run_cli("--suite", "converse", "--function=-x/2", "--error", "power:c=1,p=1", "--interval",
                              "0,1", "--iterates", "5")

        self.assertEqual(0, status)
        self.assertIn("converse.premise_left", self.checks())
        self.assertIn("converse.conclusion_left", self.checks())
        self.assertEqual(["T{}.dat".format(index) for index in range(1, 6)] + ["f.dat"], self.plot_files())

    def test_feh_and_ostrowski(self):
        self.assertEqual(0, self.run_cli("--suite", "feh", "--function", "x^2", "--error", "power:c=1,p=1",
                                         "--interval", "0,1", "--grid-n", "41"))
        self.assertEqual({"feh.min_max_equations", "feh.max_min_equations", "feh.diagonal_bounds"}, set(self.checks()))

        self.assertEqual(0, self.run_cli("--suite", "ostrowski", "--error", "power:c=1,p=1", "--interval", "0,1"))
        certificate = load_report(self.out)["certificates"][0]
        self.assertAlmostEqual(0.25, certificate["bound_value"])

    def test_all_suites_with_workers(self):
        status = self.run_cli("--suite", "all", "--function", "x/2", "--error", "power:c=1,p=1", "--interval", "0,1",
                              "--grid-n", "41", "--workers", "4")

        self.assertEqual(0, status)
        ids = [check["id"] for check in load_report(self.out)["checks"]]
        self.assertEqual(sorted(ids), ids)
        self.assertEqual({"monotone", "holder", "feh", "hh", "ostrowski", "converse"},
                         set(identifier.split(".")[0] for identifier in ids))

    def test_failed_screens_are_reported(self):
        status = self.run_cli("--suite", "all", "--function=-2*x", "--error", "power:c=1,p=1", "--interval", "0,1",
                              "--grid-n", "21")

        self.assertEqual(1, status)
        checks = self.checks()
        self.assertEqual("fails", checks["hh.bounds"]["verdict"])
        self.assertEqual("Eq. HH", checks["hh.bounds"]["paper_ref"])
        self.assertEqual("Eq. H1", checks["hh.bounds"]["details"]["screen"])
        self.assertEqual("fails", checks["ostrowski.bound"]["verdict"])
        self.assertEqual("Eq. H2", checks["ostrowski.bound"]["details"]["screen"])
        self.assertIn("converse.premise_left", checks)

    def test_report_round_trips(self):
        self.run_cli("--suite", "monotone", "--function=-2*x", "--error", "power:c=1,p=1", "--interval", "0,1")
        text = self.out.read_text(encoding='utf8')

        self.assertEqual(text, serialize(load_report(self.out)))

    def test_input_errors(self):
        self.assertEqual(2, self.run_cli("--suite", "monotone", "--function", "x", "--error", "gauss:s=1",
                                         "--interval", "0,1"))
        self.assertEqual(2, self.run_cli("--suite", "monotone", "--error", "power:c=1,p=1", "--interval", "0,1"))
        self.assertEqual(2, self.run_cli("--suite", "monotone", "--function", str(self.root / "missing.csv"),
                                         "--error", "power:c=1,p=1", "--interval", "0,1"))
        self.assertEqual(2, self.run_cli("--suite", "hh", "--error", "expr:t^2", "--interval", "0,1"))
        self.assertFalse(self.out.exists())

    def test_unknown_suite_rejected_at_parse_time(self):
        with self.assertRaises(SystemExit):
            build_parser().parse_args(["--suite", "nothing", "--error", "power:c=1,p=1", "--interval", "0,1"])

    def test_config(self):
        arguments = build_parser().parse_args(["--suite", "hh", "--error", "power:c=1,p=1", "--interval", "0,inf",
                                               "--quad-tol", "1e-7", "--point", "0.25"])
        config = config_from_arguments(arguments)

        self.assertEqual(Suite.hh, config.suite)
        self.assertEqual((0., float("inf")), config.interval)
        self.assertEqual(1e-7, config.quad.tolerance)
        self.assertEqual(0.25, config.as_dict()["point"])
        self.assertEqual(".json", config.output.suffix)
        self.assertTrue(config.output.name.endswith("-hh.json"))
