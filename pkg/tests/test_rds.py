import numpy as np
import pytest

from helpers import EX1_A, EX1_B, LES_A, LES_B, LES_D, SWAP_A, SWAP_B, coupled, rho_eig
from rdstab import rds
from rdstab.matcore import AdmissibilityError, MatrixError
from rdstab.rds import CouplingClass, SystemPair

# a diagonal pair that strong diffusion destabilises
BAD_A = np.array([[0.7, 2.5], [0.0, 0.3]])
BAD_B = np.array([[0.5, 0.0], [2.5, 0.3]])


def test_coupling_class_parse():
    assert CouplingClass.parse("leslie-single-row") is CouplingClass.LESLIE_SINGLE_ROW
    assert CouplingClass.parse(CouplingClass.LESLIE) is CouplingClass.LESLIE
    with pytest.raises(ValueError):
        CouplingClass.parse("full")


def test_system_pair_validation():
    with pytest.raises(rds.NotSchurError):
        SystemPair(np.eye(2), EX1_B)
    with pytest.raises(MatrixError):
        SystemPair(EX1_A, LES_A)
    with pytest.raises(MatrixError):
        SystemPair(np.full((3, 3), 0.1), LES_B, "leslie")


def test_check_coupling():
    pair = SystemPair(LES_A, LES_B, "leslie")
    assert rds.check_coupling(pair, LES_D) is not None
    with pytest.raises(AdmissibilityError):
        rds.check_coupling(pair, np.diag([0.05, 0.0, 0.0]))  # (0, 0) is outside the pattern
    with pytest.raises(AdmissibilityError):
        rds.check_coupling(pair, LES_D * 3)
    single = SystemPair(LES_A, LES_B, "leslie_single_row")
    with pytest.raises(AdmissibilityError):
        rds.check_coupling(single, LES_D)


def test_rho_coupled_matches_direct_eigvals():
    pair = SystemPair(LES_A, LES_B, "leslie")
    assert rds.rho_coupled(pair, LES_D) == pytest.approx(rho_eig(coupled(LES_A, LES_B, LES_D)), abs=1e-12)
    assert rds.rho_coupled(pair, LES_D) == pytest.approx(1.0189, abs=1e-4)


def test_zero_coupling_gives_larger_system_radius():
    pair = SystemPair(LES_A, LES_B, "leslie")
    assert rds.rho_coupled(pair, np.zeros((3, 3))) == pytest.approx(max(rho_eig(LES_A), rho_eig(LES_B)))


def test_verdicts_for_examples():
    v = rds.decide_rds(SystemPair(EX1_A, EX1_B))
    assert (v.status, v.reason) == ("certified", "cdlf_lyapunov")
    v = rds.decide_rds(SystemPair(SWAP_A, SWAP_B))
    assert (v.status, v.reason) == ("certified", "jlclf_irreducible")
    v = rds.decide_rds(SystemPair(LES_A, LES_B, "leslie"))
    assert v.status == "refuted" and v.rho_at_witness > 1
    v = rds.decide_rds(SystemPair(LES_A, LES_B, "leslie_single_row"))
    assert (v.status, v.reason) == ("certified", "leslie_single_row")
    assert v.certificate.margin == pytest.approx(1 - rho_eig(LES_A))


def test_clclf_preferred_when_available():
    a = np.array([[0.2, 0.1], [0.1, 0.3]])
    v = rds.decide_rds(SystemPair(a, a.T))
    assert v.reason == "clclf"


def test_leslie_certificates():
    a = LES_A * 0.5
    b = LES_B * 0.5
    v = rds.decide_rds(SystemPair(a, b, "leslie"))
    assert v.status == "certified" and v.reason in ("s1_s2", "common_right_vector")
    assert rds.verify_certificate(a, b, v.certificate)


def test_diagonal_refutation():
    pair = SystemPair(BAD_A, BAD_B)
    v = rds.decide_rds(pair, budget=500)
    assert v.status == "refuted"
    d = v.witness_d
    assert np.count_nonzero(d - np.diag(np.diag(d))) == 0
    assert rho_eig(coupled(BAD_A, BAD_B, d)) > 1
    assert v.to_json()["witness_d"]["n"] == 2


def test_destabilizer_is_deterministic():
    pair = SystemPair(LES_A, LES_B, "leslie")
    h1 = rds.find_destabilizer(pair, budget=300, seed=3)
    h2 = rds.find_destabilizer(pair, budget=300, seed=3)
    np.testing.assert_array_equal(h1[0], h2[0])
    assert h1[1] == h2[1]
    with pytest.raises(ValueError):
        rds.find_destabilizer(pair, budget=0)


def test_destabilizer_none_when_no_free_coordinates():
    # zero diagonals leave no room for a diagonal coupling
    pair = SystemPair(np.array([[0.0, 0.5], [0.0, 0.0]]), np.zeros((2, 2)))
    assert rds.find_destabilizer(pair, budget=10) is None


def test_certificate_verification_rejects_tampering():
    v = rds.decide_rds(SystemPair(SWAP_A, SWAP_B))
    cert = rds.certificate_from_json(v.certificate.to_json())
    assert rds.verify_certificate(SWAP_A, SWAP_B, cert)
    assert not rds.verify_certificate(BAD_A, BAD_B, cert)
    forged = rds.SingleRowCert(0.5)
    assert not rds.verify_certificate(LES_A, LES_B, forged)
    assert not rds.verify_certificate(LES_A, LES_B, rds.RightVectorCert(np.ones(3), 0.1))


def test_simulation_growth_matches_log_rho():
    pair = SystemPair(LES_A, LES_B, "leslie")
    traj = rds.simulate_coupled(pair, LES_D, np.ones(3), np.ones(3), 400)
    assert traj.states.shape == (401, 6)
    assert traj.growth_estimate == pytest.approx(np.log(rds.rho_coupled(pair, LES_D)), abs=1e-4)
    assert not traj.diverged


def test_simulation_divergence_and_decay():
    pair = SystemPair(BAD_A, BAD_B)
    d = np.diag([0.5, 0.3])
    traj = rds.simulate_coupled(pair, d, np.ones(2) * 1e290, np.ones(2), 5000)
    assert traj.diverged
    pair = SystemPair(np.zeros((2, 2)), np.zeros((2, 2)))
    traj = rds.simulate_coupled(pair, np.zeros((2, 2)), np.ones(2), np.ones(2), 5)
    assert traj.growth_estimate == -np.inf
    with pytest.raises(ValueError):
        rds.simulate_coupled(pair, np.zeros((2, 2)), -np.ones(2), np.ones(2), 5)
    with pytest.raises(ValueError):
        rds.simulate_coupled(pair, np.zeros((2, 2)), np.ones(2), np.ones(2), 0)


def test_diagonal_rds_holds_on_certified_pair():
    rng = np.random.default_rng(21)
    for a, b in ((EX1_A, EX1_B), (SWAP_A, SWAP_B)):
        cap = np.minimum(np.diag(a), np.diag(b))
        for _ in range(200):
            d = np.diag(rng.random(2) * cap)
            assert rho_eig(coupled(a, b, d)) < 1 + 1e-9
