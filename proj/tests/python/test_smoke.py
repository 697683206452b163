from pathlib import Path

import numpy as np
import pytest

import riskhjb

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def test_zero_market_value_is_flat():
    cfg = riskhjb.load_config(str(CONFIGS / "zero_market.yaml"))
    out = riskhjb.solve(cfg, nodes=[41], time_steps=20)
    assert np.allclose(out["phi_tilde"], 1.0, atol=1e-12)
    assert out["report"]["converged"]
    assert all(np.abs(h).max() <= 1e-12 for h in out["policy"])


def test_lgq_matches_riccati():
    cfg = riskhjb.load_config(str(CONFIGS / "lgq.yaml"))
    out = riskhjb.solve(cfg, nodes=[101], time_steps=200)
    ric = riskhjb.riccati(cfg, ode_steps=2000)
    assert ric["ansatz_residual"] <= 1e-6
    x = out["points"][:, 0]
    core = np.abs(x) <= 0.9
    Q, q, k = ric["Q"][0][0, 0], ric["q"][0][0], ric["k"][0]
    exact = 0.5 * Q * x**2 + q * x + k
    rel = np.abs(out["phi"][0] - exact) / (1 + np.abs(exact))
    assert rel[core].max() <= 1e-2


def test_direct_and_policy_iteration_agree():
    cfg = riskhjb.load_config(str(CONFIGS / "jumps.yaml"))
    a = riskhjb.solve(cfg, nodes=[61], time_steps=60)
    b = riskhjb.solve(cfg, nodes=[61], time_steps=60, method="direct")
    assert np.abs(a["phi_tilde"] - b["phi_tilde"]).max() <= 1e-7


def test_minimizer_and_simulation():
    cfg = riskhjb.load_config(str(CONFIGS / "jumps.yaml"))
    res = riskhjb.minimize_hamiltonian(cfg, 0.0, np.array([0.0]), 1.0, np.array([0.1]))
    assert res["kkt_residual"] <= 1e-8
    assert res["jump_margin"] > 0
    sim = riskhjb.simulate(cfg, np.array([0.3]), np.array([0.0]), paths=4000, seed=3)
    chi = sim["chi_mean"]
    assert abs(chi["mean"] - 1.0) <= 4 * chi["std_error"]


def test_errors_surface_as_python_exceptions():
    with pytest.raises(ValueError, match="malformed.yaml"):
        riskhjb.load_config(str(CONFIGS / "malformed.yaml"))
    cfg = riskhjb.load_config(str(CONFIGS / "simultaneous_jump.yaml"))
    assert not riskhjb.validate(cfg)["accepted"]
    assert riskhjb.parse_config((CONFIGS / "lgq.yaml").read_text()).hash == riskhjb.load_config(
        str(CONFIGS / "lgq.yaml")
    ).hash
