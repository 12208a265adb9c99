import logging
from pathlib import Path
from typing import Callable

from phimono.tools import home_directory, mkdir, write_text, logger


class DataDirectories:
    def __init__(self, data_directory: Path = home_directory() / "phimono-data"):
        self.data_directory = data_directory
        self.reports_directory = data_directory / "reports"
        self.plots_directory = data_directory / "plots"


default_data_directories = DataDirectories()


class Configuration:
    """
    Numeric defaults shared by all operations. Every operation taking an optional
    tolerance, resolution or quadrature falls back to `default_configuration`.
    """

    def __init__(self,
                 tolerance: float = 1e-9,
                 horizon: float = 10.,
                 margin_fraction: float = 1e-3,
                 extremum_resolution: int = 201,
                 dense_cache_limit: int = 201,
                 screening_grid_size: int = 101,
                 grid_size: int = 101,
                 quadrature_rule: str = "composite-simpson",
                 quadrature_initial_subdivisions: int = 8,
                 quadrature_tolerance: float = 1e-9,
                 quadrature_max_refinements: int = 18,
                 iterate_sample_count: int = 257,
                 iterate_blow_up_magnitude: float = 1e12,
                 converse_refinement_steps: int = 1,
                 transform_memo_size: int = 65536):
        self.tolerance = tolerance
        self.horizon = horizon
        self.margin_fraction = margin_fraction
        self.extremum_resolution = extremum_resolution
        self.dense_cache_limit = dense_cache_limit
        self.screening_grid_size = screening_grid_size
        self.grid_size = grid_size
        self.quadrature_rule = quadrature_rule
        self.quadrature_initial_subdivisions = quadrature_initial_subdivisions
        self.quadrature_tolerance = quadrature_tolerance
        self.quadrature_max_refinements = quadrature_max_refinements
        self.iterate_sample_count = iterate_sample_count
        self.iterate_blow_up_magnitude = iterate_blow_up_magnitude
        self.converse_refinement_steps = converse_refinement_steps
        self.transform_memo_size = transform_memo_size

    def quadrature(self) -> 'QuadratureSpec':
        from phimono.numerics import QuadratureSpec, QuadratureRule

        return QuadratureSpec(rule=QuadratureRule(self.quadrature_rule),
                              initial_subdivisions=self.quadrature_initial_subdivisions,
                              tolerance=self.quadrature_tolerance,
                              max_refinements=self.quadrature_max_refinements)

    @staticmethod
    def desk() -> 'Configuration':
        return Configuration()

    @staticmethod
    def strict() -> 'Configuration':
        return Configuration(tolerance=1e-12, quadrature_tolerance=1e-11, quadrature_max_refinements=20,
                             extremum_resolution=1001)


default_configuration = Configuration.desk()


class LoggedRun:
    def __init__(self, action: Callable[[], int], name: str,
                 results_directory: Path = default_data_directories.reports_directory):
        self.action = action
        self.name = name
        self.results_directory = results_directory
        self.result_file = self.results_directory / self.name

    def __call__(self) -> int:
        mkdir(self.results_directory)
        write_text(self.result_file, "")
        handler = logging.FileHandler(str(self.result_file), encoding='utf8')
        handler.setLevel(logging.INFO)
        logger.addHandler(handler)
        try:
            return self.action()
        finally:
            logger.removeHandler(handler)
            handler.close()
