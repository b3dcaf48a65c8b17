"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (with its runtime) that is printed in
the terminal summary, so ``pytest tests/test_acceptance.py`` shows all
eight verdicts together.
"""

import itertools
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from helpers import (
    EX1_A, EX1_B, LES_A, LES_B, LES_D, SWAP_A, SWAP_B,
    coupled, random_leslie, random_nonneg, rho_eig,
)
from rdstab import certificates as certs
from rdstab import leslie, rds
from rdstab.matcore import (
    is_irreducible, is_schur, no_supporting_vector, spectral_radii, symmetric_eigen_max,
)


@contextmanager
def criterion(log, number, title, limit=None):
    info = {}
    t0 = time.perf_counter()
    ok = False
    try:
        yield info
        ok = True
    finally:
        dt = time.perf_counter() - t0
        if limit is not None and dt >= limit:
            ok = False
            info["runtime"] = f"over the {limit:g} s limit"
        detail = ", ".join(f"{k}={v}" for k, v in info.items())
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  [{dt:.2f} s] {detail}"
        log.append(line)
        print(line)
    if limit is not None:
        assert dt < limit, f"runtime {dt:.2f} s exceeds {limit} s"


def test_criterion_1_diagonal_lyapunov_pair(acceptance_log):
    with criterion(acceptance_log, 1, "diagonal Lyapunov pair reproduction", limit=1.0) as info:
        lyap = certs.find_cdlf(EX1_A, EX1_B, "lyapunov")
        assert lyap.status == "found"
        identity = certs.DiagonalCert(np.ones(2), "lyapunov", 0.5)
        assert certs.verify_diagonal_cert(EX1_A, EX1_B, identity)
        expected = -1.9 + math.sqrt(1.01)
        for m in (EX1_A, EX1_B):
            lam, _ = symmetric_eigen_max(certs.lyapunov_form(m, np.ones(2)))
            assert abs(lam - expected) <= 1e-9
            info.setdefault("lambda_max", f"{lam:.12f}")
        assert certs.find_clclf(EX1_A, EX1_B) is None
        stein = certs.find_cdlf(EX1_A, EX1_B, "stein")
        assert stein.status == "infeasible"
        info["stein_cuts"] = stein.cuts


def test_criterion_2_joint_copositive_pair(acceptance_log):
    with criterion(acceptance_log, 2, "joint copositive pair reproduction", limit=1.0) as info:
        assert certs.find_clclf(SWAP_A, SWAP_B) is None
        cert = certs.find_jlclf(SWAP_A, SWAP_B)
        assert cert is not None
        assert certs.verify_copositive_cert(SWAP_A, SWAP_B, cert)
        v = cert.v
        assert np.all(v > 0)
        assert np.all(v @ (SWAP_A + SWAP_B) < 2 * v)
        assert is_irreducible(SWAP_A) and is_irreducible(SWAP_B)
        verdict = rds.decide_rds(rds.SystemPair(SWAP_A, SWAP_B, "diagonal"))
        assert verdict.status == "certified"
        assert verdict.reason == "jlclf_irreducible"
        info["v"] = [round(float(x), 6) for x in v]


def test_criterion_3_leslie_counterexample(acceptance_log):
    with criterion(acceptance_log, 3, "Leslie counterexample reproduction", limit=10.0) as info:
        pair = rds.SystemPair(LES_A, LES_B, "leslie")
        rho = rds.rho_coupled(pair, LES_D)
        info["rho_M"] = f"{rho:.6f}"
        assert abs(rho - 1.02) <= 0.005
        verdict = rds.decide_rds(pair, budget=10000, seed=0)
        assert verdict.status == "refuted"
        assert verdict.rho_at_witness > 1.0
        # the witness is re-checked from scratch
        assert rho_eig(coupled(LES_A, LES_B, verdict.witness_d)) > 1.0
        info["witness_rho"] = f"{verdict.rho_at_witness:.6f}"


def test_criterion_4_single_row_couplings(acceptance_log):
    rng = np.random.default_rng(4)
    with criterion(acceptance_log, 4, "single-row Leslie couplings never destabilise", limit=60.0) as info:
        worst = 0.0
        checked = 0
        for k in range(300):
            n = int(rng.integers(2, 6))
            a = random_leslie(rng, n, max_rho=0.95)
            b = random_leslie(rng, n, max_rho=0.95)
            ds = [c.matrix() for c in itertools.islice(
                leslie.enumerate_coupling_class(a, b, "L1", grid=4, seed=k, n_random=200), 200)]
            stack = np.stack([coupled(a, b, d) for d in ds])
            radii = spectral_radii(stack)
            worst = max(worst, float(radii.max()))
            checked += len(ds)
        info["couplings"] = checked
        info["max_rho"] = f"{worst:.6f}"
        assert worst < 1.0


def test_criterion_5_right_vector_vs_row_selections(acceptance_log):
    rng = np.random.default_rng(5)
    with criterion(acceptance_log, 5, "common right vector matches row-selection check", limit=30.0) as info:
        tested = excluded = disagree = 0
        outcomes = set()
        while tested < 300:
            n = int(rng.integers(2, 5))
            scale = rng.uniform(0.6, 1.2)
            a = random_nonneg(rng, n, scale * rng.uniform(0.7, 1.0))
            b = random_nonneg(rng, n, scale * rng.uniform(0.7, 1.0))
            radii = leslie.selection_radii(a, b)
            if np.any(np.abs(radii - 1.0) < 1e-6):
                excluded += 1
                continue
            exhaustive = bool(np.all(radii < 1.0))
            has_vector = leslie.common_right_vector(a, b) is not None
            disagree += exhaustive != has_vector
            outcomes.add(exhaustive)
            tested += 1
        info.update(pairs=tested, excluded=excluded, disagreements=disagree)
        assert outcomes == {True, False}
        assert disagree == 0


def test_criterion_6_stein_implies_lyapunov_and_rds(acceptance_log):
    rng = np.random.default_rng(6)
    with criterion(acceptance_log, 6, "Stein certificate implies Lyapunov certificate and RDS") as info:
        pairs = []
        while len(pairs) < 100:
            n = int(rng.integers(2, 5))
            a = random_nonneg(rng, n, rng.uniform(0.2, 0.9))
            b = random_nonneg(rng, n, rng.uniform(0.2, 0.9))
            found = certs.find_cdlf(a, b, "stein")
            if found:
                pairs.append((a, b, found.certificate))
        lyap_ok = 0
        violations = 0
        worst = 0.0
        for a, b, cert in pairs:
            same_e = certs.DiagonalCert(cert.e, "lyapunov", cert.margin)
            lyap_ok += certs.verify_diagonal_cert(a, b, same_e)
            n = a.shape[0]
            cap = np.minimum(np.diag(a), np.diag(b))
            d = rng.random((10000, n)) * cap
            d[:2 ** n] = np.array(list(itertools.product([0, 1], repeat=n)))[:10000] * cap
            ds = np.einsum("ki,ij->kij", d, np.eye(n))
            stack = np.block([[a - ds, ds], [ds, b - ds]])
            radii = spectral_radii(stack)
            worst = max(worst, float(radii.max()))
            violations += int(np.sum(radii >= 1.0 + 1e-9))
        info.update(lyapunov_verified=f"{lyap_ok}/100", violations=violations, max_rho=f"{worst:.6f}")
        assert lyap_ok == 100
        assert violations == 0


def test_criterion_7_algebraic_identities(acceptance_log):
    rng = np.random.default_rng(7)
    with criterion(acceptance_log, 7, "algebraic identities") as info:
        worst_id = worst_q = worst_block = 0.0
        for _ in range(1000):
            n = int(rng.integers(1, 7))
            a = rng.random((n, n)) * rng.uniform(0.1, 3.0)
            e = rng.uniform(0.1, 10.0, n)
            res = certs.stein_lyapunov_identity_residual(a, e)
            assert res <= certs.identity_tolerance(a, e)
            worst_id = max(worst_id, res / certs.identity_tolerance(a, e))
        for _ in range(1000):
            n = int(rng.integers(1, 6))
            a = rng.random((n, n))
            b = rng.random((n, n))
            d = np.diag(rng.random(n) * np.minimum(np.diag(a), np.diag(b)))
            e = rng.uniform(0.1, 2.0, n)
            E = np.diag(e)
            m = coupled(a, b, d)
            p = np.kron(np.eye(2), E)
            eye = np.eye(2 * n)
            q_m = (m - eye).T @ p + p @ (m - eye)
            q_a, q_b = certs.lyapunov_form(a, e), certs.lyapunov_form(b, e)
            ed = 2 * E @ d
            blocks = np.block([[q_a - ed, ed], [ed, q_b - ed]])
            worst_q = max(worst_q, float(np.max(np.abs(q_m - blocks))))
            lam, _ = symmetric_eigen_max(np.block([[-ed, ed], [ed, -ed]]))
            worst_block = max(worst_block, lam)
        info.update(identity_ratio=f"{worst_id:.2e}", qm_residual=f"{worst_q:.2e}",
                    block_lambda_max=f"{worst_block:.2e}")
        assert worst_q <= 1e-12
        assert worst_block <= 1e-12


def test_criterion_8_schur_characterisations_agree(acceptance_log):
    rng = np.random.default_rng(8)
    with criterion(acceptance_log, 8, "Schur-stability characterisations agree") as info:
        tested = disagree = 0
        stable = 0
        while tested < 500:
            n = int(rng.integers(1, 7))
            target = rng.uniform(0.5, 1.5)
            a = random_nonneg(rng, n, target)
            rho = rho_eig(a)
            if abs(rho - 1.0) < 1e-3:
                continue
            answers = {
                "schur": is_schur(a),
                "no_supporting_vector": no_supporting_vector(a),
                "left_vector": certs.find_clclf(a, a) is not None,
                "stein": bool(certs.find_cdlf(a, a, "stein")),
                "lyapunov": bool(certs.find_cdlf(a, a, "lyapunov")),
            }
            truth = rho < 1.0
            disagree += any(v != truth for v in answers.values())
            stable += truth
            tested += 1
        info.update(matrices=tested, stable=stable, disagreements=disagree)
        assert 0 < stable < tested
        assert disagree == 0


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
