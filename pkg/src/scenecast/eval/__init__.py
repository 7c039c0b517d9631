"""Metrics, experiment orchestration, reports and synthetic cities."""
from .experiment import (CellResult, ExperimentPlan, RmseReport, pool_size, read_results, run_cell,
                         run_experiment, summarize_results)
from .metrics import ci95, east_west_split, rmse, row_rmse
from .pipeline import CityArtifacts, prepare_city
from .report import bar_chart_svg, write_charts
from .synth import MODES, SynthConfig, SyntheticCity, generate_synthetic_city

__all__ = [
    "CellResult", "CityArtifacts", "ExperimentPlan", "MODES", "RmseReport", "SynthConfig", "SyntheticCity",
    "bar_chart_svg", "ci95", "east_west_split", "generate_synthetic_city", "pool_size", "prepare_city",
    "read_results", "rmse", "row_rmse", "run_cell", "run_experiment", "summarize_results", "write_charts",
]
