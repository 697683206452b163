"""Risk-sensitive jump-diffusion asset management: policy iteration, Riccati oracle and Monte Carlo checks."""

from ._riskhjb import (
    Config,
    __version__,
    load_config,
    minimize_hamiltonian,
    parse_config,
    riccati,
    simulate,
    solve,
    validate,
)

__all__ = [
    "Config",
    "__version__",
    "load_config",
    "minimize_hamiltonian",
    "parse_config",
    "riccati",
    "simulate",
    "solve",
    "validate",
]
