"""Federated-averaging free-rider simulator.

Thin dict-based wrappers over the compiled core. Scenario arguments accept
either a dict (serialized for you) or a JSON string.
"""

import json as _json

from frsim._core import (
    ScenarioError,
    SimulationError,
    detect_json as _detect_json,
    fair_band_json as _fair_band_json,
    monte_carlo_json as _monte_carlo_json,
    simulate_csv as _simulate_csv,
    simulate_json as _simulate_json,
    theory_json as _theory_json,
)

__all__ = [
    "ScenarioError",
    "SimulationError",
    "theory",
    "simulate_csv",
    "simulate",
    "monte_carlo",
    "detect",
    "fair_band",
]


def _scenario_text(scenario):
    if isinstance(scenario, str):
        return scenario
    return _json.dumps(scenario)


def theory(scenario):
    """Closed-form gap moments: epsilon, ratio, expectation, variances."""
    return _json.loads(_theory_json(_scenario_text(scenario)))


def simulate_csv(scenario, seed=None):
    """One seeded training run as CSV text (round, client, role, upload)."""
    return _simulate_csv(_scenario_text(scenario), seed)


def simulate(scenario, seed=None):
    """One seeded training run as a dict with per-round uploads and noise."""
    return _json.loads(_simulate_json(_scenario_text(scenario), seed))


def monte_carlo(scenario, replicates=0, checkpoints=(), threads=1):
    """Gap moments over replicated coupled runs.

    replicates <= 0 falls back to the scenario's replicate_count. An empty
    checkpoint list selects rounds {50, 100, 200} clipped to the horizon.
    """
    return _json.loads(
        _monte_carlo_json(_scenario_text(scenario), replicates, list(checkpoints), threads)
    )


def detect(trace_csv, scenario, tolerance=0.0):
    """Per-client increment statistics and plain-upload flags for a trace."""
    return _json.loads(_detect_json(trace_csv, _scenario_text(scenario), tolerance))


def fair_band(scenario, fair_seeds=30, threads=1):
    """Fair-only final-loss band versus the attacked run (descent clients)."""
    return _json.loads(_fair_band_json(_scenario_text(scenario), fair_seeds, threads))
