"""Monte Carlo toolkit for the semi-discrete Brownian directed polymer."""

import json as _json

from ._dpbe import (
    __version__,
    characteristic_params,
    config_hash,
    free_energy_density,
    identity_names,
    psi0,
    psi1,
    psi1_inv,
    psi2,
    ptp_logz,
    run_cli,
    run_identity,
    stationary_logz,
)
from ._dpbe import run_experiment as _run_experiment


def run_experiment(experiment, n_list, **options):
    """Runs an exponent experiment and returns its summary as a dict.

    Keyword options mirror the ``exponent`` command line flags: alpha, beta0,
    tau_list, gamma, replicas, seed, delta, delta_scale, budget_core_hours,
    phi, tail_b, bootstrap, model and workers. The per-point rows are under
    the ``rows`` key.
    """
    summary, rows = _run_experiment(experiment, list(n_list), options)
    result = _json.loads(summary)
    result["rows"] = rows
    return result


__all__ = [
    "__version__",
    "characteristic_params",
    "config_hash",
    "free_energy_density",
    "identity_names",
    "psi0",
    "psi1",
    "psi1_inv",
    "psi2",
    "ptp_logz",
    "run_cli",
    "run_experiment",
    "run_identity",
    "stationary_logz",
]
