"""Search and verification of Lyapunov-type certificates for a pair (A, B).

Copositive certificates (common linear, joint linear) are found by
margin-maximising LPs. Common diagonal certificates, in Stein form
``A^T E A - E < 0`` or Lyapunov form ``(A - I)^T E + E (A - I) < 0``, are
found by an eigenvector cutting-plane method over the diagonal of ``E``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import lpsolve
from .matcore import MatrixError, as_nonneg, ggt0, symmetric_eigen_max
from .lpsolve import FEASTOL, LinearProgram

VECTOR_BOUND = 1e6
E_LOWER = 1.0
E_UPPER = 1e6
MAX_CUTS = 500
JLCLF_SLACK = 1e-12

COPOSITIVE_FLAVORS = ("clclf", "jlclf")
DIAGONAL_FLAVORS = ("stein", "lyapunov")


@dataclass(frozen=True)
class CopositiveCert:
    v: np.ndarray
    margin: float
    flavor: str

    def to_json(self) -> dict:
        return {"flavor": self.flavor, "vector": [float(x) for x in self.v], "margin": float(self.margin)}


@dataclass(frozen=True)
class DiagonalCert:
    e: np.ndarray
    flavor: str
    margin: float

    def to_json(self) -> dict:
        return {"flavor": self.flavor, "diag": [float(x) for x in self.e], "margin": float(self.margin)}


@dataclass(frozen=True)
class CdlfSearch:
    """Outcome of :func:`find_cdlf`: ``found``, ``infeasible`` or ``undecided``."""

    status: str
    certificate: Optional[DiagonalCert]
    cuts: int
    upper_bound: float  # bound on the best achievable margin over the box

    def __bool__(self) -> bool:
        return self.status == "found"


def cert_from_json(obj: dict):
    """Rebuild a copositive or diagonal certificate from its JSON form."""
    flavor = obj.get("flavor")
    margin = float(obj.get("margin", 0.0))
    if flavor in COPOSITIVE_FLAVORS and "vector" in obj:
        return CopositiveCert(np.asarray(obj["vector"], dtype=float), margin, flavor)
    if flavor in DIAGONAL_FLAVORS and "diag" in obj:
        return DiagonalCert(np.asarray(obj["diag"], dtype=float), flavor, margin)
    raise ValueError(f"unrecognised certificate (flavor={flavor!r})")


# -- copositive certificates ------------------------------------------------

def _left_rows(a: np.ndarray, strict: bool) -> list:
    # column j of A - I gives the j-th entry of v^T (A - I)
    n = a.shape[0]
    c = a - np.eye(n)
    return [(c[:, j], strict) for j in range(n)]


def _normalise(v: np.ndarray) -> np.ndarray:
    return v / v.min()


def _strict_margin(v: np.ndarray, rows: list) -> float:
    return min(-_row_dot(v, c) for c, strict in rows if strict)


def find_clclf(a, b, feastol: float = FEASTOL) -> Optional[CopositiveCert]:
    """A vector ``v >> 0`` with ``v^T A << v^T`` and ``v^T B << v^T``, or None."""
    a, b = as_nonneg(a, "A"), as_nonneg(b, "B")
    _same_shape(a, b)
    n = a.shape[0]
    rows = _left_rows(a, True) + _left_rows(b, True)
    ok, v, eps = lpsolve.strict_feasibility(rows, np.ones(n), VECTOR_BOUND, feastol=feastol)
    if not ok:
        return None
    v = _normalise(v)
    cert = CopositiveCert(v, _strict_margin(v, rows), "clclf")
    if not verify_copositive_cert(a, b, cert):
        raise lpsolve.LpError("CLCLF witness failed independent verification")
    return cert


def find_jlclf(a, b, feastol: float = FEASTOL) -> Optional[CopositiveCert]:
    """A joint linear copositive vector, or None.

    Requires ``v^T A <= v^T`` and ``v^T B <= v^T`` (up to ``1e-12``) and the
    strict combined row ``v^T (A + B) << 2 v^T``.
    """
    a, b = as_nonneg(a, "A"), as_nonneg(b, "B")
    _same_shape(a, b)
    n = a.shape[0]
    combined = [(a[:, j] + b[:, j] - 2.0 * np.eye(n)[:, j], True) for j in range(n)]
    rows = _left_rows(a, False) + _left_rows(b, False) + combined
    ok, v, eps = lpsolve.strict_feasibility(
        rows, np.ones(n), VECTOR_BOUND, nonstrict_slack=JLCLF_SLACK, feastol=feastol
    )
    if not ok:
        return None
    v = _normalise(v)
    cert = CopositiveCert(v, _strict_margin(v, rows), "jlclf")
    if not verify_copositive_cert(a, b, cert):
        raise lpsolve.LpError("JLCLF witness failed independent verification")
    return cert


def _row_dot(v, col) -> float:
    return math.fsum(float(x) * float(y) for x, y in zip(v, col))


def verify_copositive_cert(a, b, cert: CopositiveCert, slack: float = JLCLF_SLACK) -> bool:
    """Re-check a copositive certificate with exactly-rounded sums.

    Strict rows must hold with slack ``margin / 2``; non-strict rows (joint
    flavour) with tolerance ``slack`` relative to ``max(v)``.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    v = np.asarray(cert.v, dtype=float)
    n = a.shape[0]
    if v.shape != (n,) or not ggt0(v) or cert.margin <= 0:
        return False
    need = cert.margin / 2
    tol = slack * max(1.0, float(v.max()))
    for j in range(n):
        ra = _row_dot(v, a[:, j]) - v[j]
        rb = _row_dot(v, b[:, j]) - v[j]
        if cert.flavor == "clclf":
            if ra > -need or rb > -need:
                return False
        elif cert.flavor == "jlclf":
            if ra > tol or rb > tol or ra + rb > -need:
                return False
        else:
            return False
    return True


# -- diagonal certificates --------------------------------------------------

def stein_form(a, e) -> np.ndarray:
    """``A^T E A - E`` for ``E = diag(e)``."""
    a = np.asarray(a, dtype=float)
    e = np.asarray(e, dtype=float)
    return a.T @ (e[:, None] * a) - np.diag(e)


def lyapunov_form(a, e) -> np.ndarray:
    """``(A - I)^T E + E (A - I)`` for ``E = diag(e)``."""
    a = np.asarray(a, dtype=float)
    e = np.asarray(e, dtype=float)
    c = e[:, None] * (a - np.eye(a.shape[0]))
    return c + c.T


def _form(flavor: str):
    if flavor == "stein":
        return stein_form
    if flavor == "lyapunov":
        return lyapunov_form
    raise ValueError(f"unknown diagonal flavor {flavor!r}")


def _cut_coeffs(a: np.ndarray, x: np.ndarray, flavor: str) -> np.ndarray:
    # x^T F(e) x is linear in e; these are its coefficients
    if flavor == "stein":
        return (a @ x) ** 2 - x ** 2
    return 2.0 * x * ((a - np.eye(a.shape[0])) @ x)


def _separation_delta(a: np.ndarray, b: np.ndarray) -> float:
    norm = max(np.abs(a).sum(axis=1).max(), np.abs(b).sum(axis=1).max())
    return 1e-8 * (1.0 + norm ** 2)


def find_cdlf(a, b, flavor: str, max_cuts: int = MAX_CUTS, feastol: float = FEASTOL) -> CdlfSearch:
    """Search for a common diagonal ``E > 0`` in Stein or Lyapunov form.

    The LP over ``(e, t)`` maximises ``t`` subject to ``t <= -x^T F_K(e) x``
    for every collected cut ``(K, x)`` and ``1 <= e_i <= 1e6``. The forms
    are homogeneous in ``e``, so pinning ``min(e) >= 1`` makes the margin
    scale-free; the LP optimum bounds the best achievable margin from above. At the LP point each constraint matrix ``F_K(e)`` with
    ``lambda_max > -delta`` contributes its top eigenvector as a new cut.
    """
    a, b = as_nonneg(a, "A"), as_nonneg(b, "B")
    _same_shape(a, b)
    form = _form(flavor)
    n = a.shape[0]
    delta = _separation_delta(a, b)
    mats = [a] if np.array_equal(a, b) else [a, b]
    t_cap = E_UPPER * (1.0 + max(float(np.abs(m).sum()) for m in mats) ** 2)

    cuts: list[np.ndarray] = []

    def evaluate(e: np.ndarray):
        worst = -math.inf
        new = []
        for m in mats:
            lam, x = symmetric_eigen_max(form(m, e))
            worst = max(worst, lam)
            if lam > -delta:
                new.append(_cut_coeffs(m, x, flavor))
        return worst, new

    # coordinate directions give valid initial cuts
    for m in mats:
        for i in range(n):
            cuts.append(_cut_coeffs(m, np.eye(n)[i], flavor))

    e = np.ones(n)
    worst, new = evaluate(e)
    if worst <= -delta:
        return _found(a, b, e, flavor, -worst, 0, math.inf)
    cuts.extend(new)

    upper = math.inf
    while len(cuts) < max_cuts + 2 * n:
        cons = [(np.append(g, 1.0), "<=", 0.0) for g in cuts]
        obj = np.zeros(n + 1)
        obj[-1] = 1.0
        lp = LinearProgram(
            num_vars=n + 1,
            constraints=cons,
            objective=obj,
            sense="maximize",
            lower=np.append(np.full(n, E_LOWER), -np.inf),
            upper=np.append(np.full(n, E_UPPER), t_cap),
        )
        out = lpsolve.solve(lp, feastol)
        if out.status != "optimal":
            return CdlfSearch("infeasible", None, len(cuts), -math.inf)
        upper = float(out.solution[-1])
        if upper < delta:
            return CdlfSearch("infeasible", None, len(cuts), upper)
        e = out.solution[:-1]
        worst, new = evaluate(e)
        if worst <= -delta:
            return _found(a, b, e, flavor, -worst, len(cuts), upper)
        cuts.extend(new)
    return CdlfSearch("undecided", None, len(cuts), upper)


def _found(a, b, e, flavor, margin, ncuts, upper) -> CdlfSearch:
    e = np.array(e, dtype=float)
    cert = DiagonalCert(e=e, flavor=flavor, margin=float(margin))
    if not verify_diagonal_cert(a, b, cert):
        # the cutting plane stops with margin >= delta, so this is a numerics fault
        return CdlfSearch("undecided", None, ncuts, upper)
    return CdlfSearch("found", cert, ncuts, upper)


def _neg_definite_by_cholesky(f: np.ndarray, margin: float) -> bool:
    try:
        ch = np.linalg.cholesky(-f - margin * np.eye(f.shape[0]))
    except np.linalg.LinAlgError:
        return False
    return bool(np.all(np.diag(ch) > 0))


def verify_diagonal_cert(a, b, cert: DiagonalCert) -> bool:
    """Check both constraint matrices have ``lambda_max <= -margin / 2``.

    Two routes must agree: a Cholesky factorisation of
    ``-F - (margin / 2) I`` and the Jacobi largest eigenvalue.
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    e = np.asarray(cert.e, dtype=float)
    if a.shape != b.shape or e.shape != (a.shape[0],) or not ggt0(e) or not cert.margin > 0:
        return False
    try:
        form = _form(cert.flavor)
    except ValueError:
        return False
    half = cert.margin / 2
    for m in (a, b):
        f = form(m, e)
        f = 0.5 * (f + f.T)
        by_chol = _neg_definite_by_cholesky(f, half)
        lam, _ = symmetric_eigen_max(f)
        by_eig = lam <= -half
        if not (by_chol and by_eig):
            return False
    return True


def stein_lyapunov_identity_residual(a, e) -> float:
    """Max-norm residual of ``A^T E A - E = Q + (A - I)^T E (A - I)``.

    ``Q`` is the Lyapunov form. The identity is exact algebra, so the
    residual only measures rounding.
    """
    a = np.asarray(a, dtype=float)
    e = np.asarray(e, dtype=float)
    c = a - np.eye(a.shape[0])
    lhs = stein_form(a, e)
    rhs = lyapunov_form(a, e) + c.T @ (e[:, None] * c)
    return float(np.max(np.abs(lhs - rhs)))


def identity_tolerance(a, e) -> float:
    a = np.asarray(a, dtype=float)
    norm = float(np.abs(a).sum(axis=1).max())
    return 1e-12 * (1.0 + norm ** 2 * float(np.max(np.abs(e))))


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise MatrixError(f"dimension mismatch: A{a.shape} vs B{b.shape}")
