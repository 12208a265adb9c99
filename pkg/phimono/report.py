import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy
from numpy import ndarray

from phimono.core import CheckReport
from phimono.inequalities import BoundCertificate
from phimono.tools import mkdir, read_text, write_text


def jsonable(value: Any) -> Any:
    """Plain JSON values; non-finite floats become the strings "inf", "-inf" and "nan"."""
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, ndarray)):
        return [jsonable(item) for item in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (bool, numpy.bool_)):
        return bool(value)
    if isinstance(value, (int, numpy.integer)):
        return int(value)
    if isinstance(value, (float, numpy.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if value is None or isinstance(value, str):
        return value
    return str(value)


def serialize(document: Dict) -> str:
    """Stable text: sorted keys, shortest round-trip float representation."""
    return json.dumps(jsonable(document), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


class Report:
    """Checks and certificates of one suite run, plus the curves for plot data files."""

    def __init__(self, config: Dict):
        self.config = config
        self.checks: List[Dict] = []
        self.certificates: List[Dict] = []
        self.curves: Dict[str, Tuple[ndarray, ndarray]] = {}

    def add_check(self, check_id: str, report: CheckReport, provenance: Dict) -> None:
        entry = {"id": check_id, "paper_ref": report.reference, "verdict": report.verdict,
                 "worst_margin": report.worst_margin, "pairs_checked": report.pairs_checked,
                 "tolerance": report.tolerance, "details": report.details, "provenance": provenance}
        if report.witness is not None:
            entry["witness"] = {"x": report.witness.x, "y": report.witness.y, "slack": report.witness.slack}
            if report.witness.middle is not None:
                entry["witness"]["middle"] = report.witness.middle
        self.checks.append(entry)

    def add_certificate(self, certificate_id: str, certificate: BoundCertificate, provenance: Dict) -> None:
        self.certificates.append({
            "id": certificate_id, "kind": certificate.kind, "paper_ref": certificate.kind.reference,
            "bound_value": certificate.bound_value, "achieved_value": certificate.achieved_value,
            "gap": certificate.gap, "tolerance": certificate.tolerance, "is_sharp": certificate.is_sharp,
            "details": certificate.details, "provenance": provenance})

    def add_curve(self, name: str, xs: ndarray, values: ndarray) -> None:
        self.curves[name] = (numpy.asarray(xs, dtype=float), numpy.asarray(values, dtype=float))

    def all_hold(self) -> bool:
        return all(check["verdict"].value == "holds" for check in self.checks) and \
               all(certificate["is_sharp"] for certificate in self.certificates)

    def exit_status(self) -> int:
        return 0 if self.all_hold() else 1

    def document(self) -> Dict:
        return {"config": self.config,
                "checks": sorted(self.checks, key=lambda check: check["id"]),
                "certificates": sorted(self.certificates, key=lambda certificate: certificate["id"])}

    def to_json(self) -> str:
        return serialize(self.document())

    def write(self, path: Path) -> None:
        mkdir(path.parent)
        write_text(path, self.to_json())


def load_report(path: Path) -> Dict:
    return json.loads(read_text(path))


def emit_plot_data(report: Report, output_directory: Path) -> List[Path]:
    """One two-column (x, value) file per curve, named after the curve."""
    mkdir(output_directory)
    files = []
    for name, (xs, values) in sorted(report.curves.items()):
        path = output_directory / "{}.dat".format(name)
        numpy.savetxt(str(path), numpy.column_stack([xs, values]), fmt="%.17g", header="x value")
        files.append(path)
    return files
