from .generate import LatentSample, generate, stream
from .montecarlo import MCReport, MCSettings, ReplicateResult, format_table, run_monte_carlo, run_replicate, summarize
from .scenarios import (
    SCENARIOS,
    Distortion,
    Scenario,
    TruncatedNormal,
    Uniform,
    expsat_design,
    power_design,
    get_scenario,
    mdrd_synthetic,
)

__all__ = [
    "LatentSample", "generate", "stream",
    "MCReport", "MCSettings", "ReplicateResult", "format_table", "run_monte_carlo", "run_replicate", "summarize",
    "SCENARIOS", "Distortion", "Scenario", "TruncatedNormal", "Uniform",
    "expsat_design", "power_design", "get_scenario", "mdrd_synthetic",
]
