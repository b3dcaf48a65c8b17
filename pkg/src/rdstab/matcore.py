"""Dense small-matrix numerics for nonnegative systems.

Spectral radius (LAPACK QR with an independent repeated-squaring check),
Schur tests, irreducibility, symmetric eigenproblems by cyclic Jacobi, and
assembly of the 2n x 2n coupled matrix ``[[A - D, D], [D, B - D]]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

DEFAULT_TOL = 1e-10
DEFAULT_MARGIN = 1e-9
# slack on strict orderings of user-supplied values (JSON round-trips)
INPUT_SLACK = 1e-12
MAX_DIM = 512


class MatrixError(ValueError):
    """Invalid matrix input: shape, finiteness, sign or pattern."""


class AdmissibilityError(MatrixError):
    """A coupling D violates ``A - D >= 0`` or ``B - D >= 0``."""


class SpectralConvergenceError(ArithmeticError):
    """An eigen-iteration failed to converge or two methods disagree."""

    def __init__(self, message: str, estimate: float, residual: float):
        super().__init__(f"{message} (best estimate {estimate!r}, residual {residual:.3e})")
        self.estimate = estimate
        self.residual = residual


def as_nonneg(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a float64 square nonnegative array.

    A read-only copy is returned so that validated values stay immutable.
    """
    arr = np.array(a, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise MatrixError(f"{name}: expected a nonempty square matrix, got shape {arr.shape}")
    if arr.shape[0] > MAX_DIM:
        raise MatrixError(f"{name}: dimension {arr.shape[0]} exceeds {MAX_DIM}")
    if not np.all(np.isfinite(arr)):
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise MatrixError(f"{name}: non-finite entry at ({i}, {j})")
    if np.any(arr < 0):
        i, j = np.argwhere(arr < 0)[0]
        raise MatrixError(f"{name}: negative entry {arr[i, j]!r} at ({i}, {j})")
    arr.setflags(write=False)
    return arr


# -- vector orderings -------------------------------------------------------

def geq0(v, slack: float = 0.0) -> bool:
    """``v >= 0`` entrywise."""
    return bool(np.all(np.asarray(v, dtype=float) >= -slack))


def gt0(v, slack: float = 0.0) -> bool:
    """``v >= 0`` and ``v != 0``."""
    v = np.asarray(v, dtype=float)
    return geq0(v, slack) and bool(np.any(v > slack))


def ggt0(v, slack: float = 0.0) -> bool:
    """Every entry strictly positive."""
    return bool(np.all(np.asarray(v, dtype=float) > slack))


# -- spectral radius --------------------------------------------------------

@dataclass(frozen=True)
class SpectralResult:
    rho: float
    method: str
    residual: float
    perron_vector: Optional[np.ndarray] = None


def rho_by_squaring(a, tol: float = DEFAULT_TOL, max_iter: int = 200) -> tuple[float, float]:
    """Spectral radius of a nonnegative matrix as ``lim ||A^(2^k)||^(1/2^k)``.

    Each square is renormalised and the scale factors are accumulated in log
    space, so neither overflow nor underflow occurs. Nonnegativity means no
    cancellation, which keeps the iteration accurate even for reducible or
    periodic matrices. Returns ``(rho, last_change)``.
    """
    b = np.array(a, dtype=float)
    s = np.abs(b).sum(axis=1).max()
    if s == 0.0:
        return 0.0, 0.0
    b /= s
    log_scale = math.log(s)  # log ||A^(2^k)|| estimate numerator
    power = 1.0
    prev = math.exp(log_scale)
    change = math.inf
    for _ in range(max_iter):
        b = b @ b
        s = np.abs(b).sum(axis=1).max()
        if s == 0.0:
            return 0.0, 0.0
        b /= s
        log_scale = 2.0 * log_scale + math.log(s)
        power *= 2.0
        # ||B_k|| = 1 after normalisation, so ||A^(2^k)|| = exp(log_scale)
        est = math.exp(log_scale / power)
        change = abs(est - prev)
        prev = est
        if change <= 0.1 * tol * max(1.0, est) and power >= 64:
            return est, change
        if power > 1e300:
            break
    raise SpectralConvergenceError("repeated squaring did not converge", prev, change)


def _perron_vector(a: np.ndarray, w: np.ndarray, vecs: np.ndarray, rho: float) -> np.ndarray:
    k = int(np.argmin(np.abs(w - rho)))
    x = np.abs(np.real(vecs[:, k]))
    # a few power steps on (I + A) polish the vector without changing rho
    for _ in range(3):
        y = x + a @ x
        x = y / np.abs(y).sum()
    return x / x.sum()


def spectral_radius(a, tol: float = DEFAULT_TOL, cross_check: bool = True) -> SpectralResult:
    """Spectral radius of a nonnegative matrix.

    The eigenvalues come from LAPACK (Hessenberg reduction followed by
    shifted QR); the max-modulus value is cross-checked against
    :func:`rho_by_squaring`. A disagreement beyond ``10 * tol`` raises
    :class:`SpectralConvergenceError`. For irreducible ``a`` the positive
    Perron vector is attached.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = as_nonneg(a)
    w, vecs = np.linalg.eig(a)
    rho = float(np.max(np.abs(w)))
    residual = 0.0
    method = "qr"
    if cross_check:
        rho_sq, _ = rho_by_squaring(a, tol)
        residual = abs(rho - rho_sq)
        if residual > 10 * tol * max(1.0, rho):
            # defective eigenvalues make QR lose digits; squaring does not
            method = "power-squaring"
            rho = rho_sq
            if not _defective_near(w, rho_sq, tol):
                raise SpectralConvergenceError("QR and repeated squaring disagree", rho_sq, residual)
    perron = None
    if is_irreducible(a):
        perron = _perron_vector(a, w, vecs, rho)
        perron_res = float(np.max(np.abs(a @ perron - rho * perron)))
        if perron_res > tol * (1 + rho) or not ggt0(perron):
            # fall back to a longer power iteration on the shifted matrix
            x = np.full(a.shape[0], 1.0 / a.shape[0])
            for _ in range(10000):
                y = x + a @ x
                y /= y.sum()
                if np.max(np.abs(y - x)) < 1e-15:
                    x = y
                    break
                x = y
            perron = x
            perron_res = float(np.max(np.abs(a @ perron - rho * perron)))
            if perron_res > tol * (1 + rho):
                raise SpectralConvergenceError("Perron vector did not converge", rho, perron_res)
        perron.setflags(write=False)
    return SpectralResult(rho=rho, method=method, residual=residual, perron_vector=perron)


def _defective_near(w: np.ndarray, rho: float, tol: float) -> bool:
    # clustered eigenvalues at the top modulus signal a Jordan block
    close = np.abs(np.abs(w) - rho) < max(1e-6, 1e3 * tol) * max(1.0, rho)
    return int(np.count_nonzero(close)) >= 2


def spectral_radii(stack: np.ndarray) -> np.ndarray:
    """Vectorised spectral radii of a ``(k, m, m)`` stack (no cross-check)."""
    stack = np.asarray(stack, dtype=float)
    if stack.shape[0] == 0:
        return np.zeros(0)
    return np.max(np.abs(np.linalg.eigvals(stack)), axis=-1)


def is_schur(a, margin: float = DEFAULT_MARGIN, tol: float = DEFAULT_TOL) -> bool:
    """True iff ``rho(a) < 1 - margin``."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    return spectral_radius(a, tol).rho < 1.0 - margin


def no_supporting_vector(a, feastol: float = 1e-9) -> bool:
    """True iff no ``w >= 0``, ``sum(w) = 1`` satisfies ``A w >= w``.

    Decided by an LP feasibility problem. For nonnegative ``a`` this is
    equivalent to Schur stability.
    """
    from .lpsolve import LinearProgram, solve

    a = as_nonneg(a)
    n = a.shape[0]
    rows = [((a[i] - np.eye(n)[i]), ">=", 0.0) for i in range(n)]
    rows.append((np.ones(n), "=", 1.0))
    lp = LinearProgram(num_vars=n, constraints=rows, objective=np.zeros(n), sense="maximize")
    return solve(lp, feastol).status == "infeasible"


# -- graph structure --------------------------------------------------------

def _reach(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    seen[start] = True
    stack = [start]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return seen


def is_irreducible(a) -> bool:
    """Strong connectivity of the digraph with an edge i -> j when a[i, j] > 0.

    Connectivity from node 0 in the graph and in its reverse is enough.
    """
    adj = np.asarray(a) > 0
    if adj.shape[0] == 1:
        return True
    return bool(_reach(adj, 0).all() and _reach(adj.T, 0).all())


# -- coupled matrix ---------------------------------------------------------

@dataclass(frozen=True)
class CoupledMatrix:
    m: np.ndarray
    a: np.ndarray
    b: np.ndarray
    d: np.ndarray

    @property
    def n(self) -> int:
        return self.a.shape[0]


def check_admissible(a: np.ndarray, b: np.ndarray, d: np.ndarray, slack: float = 0.0) -> None:
    if not (a.shape == b.shape == d.shape):
        raise MatrixError(f"dimension mismatch: A{a.shape}, B{b.shape}, D{d.shape}")
    for label, x in (("A - D", a - d), ("B - D", b - d)):
        bad = np.argwhere(x < -slack)
        if bad.size:
            i, j = bad[0]
            raise AdmissibilityError(f"{label} has negative entry {x[i, j]!r} at ({i}, {j})")


def assemble_coupled(a, b, d, slack: float = 0.0) -> CoupledMatrix:
    """Build ``M = [[A - D, D], [D, B - D]]`` after checking admissibility.

    ``slack`` tolerates tiny negative entries of ``A - D`` (user input
    only); those entries are clamped to zero in ``M``.
    """
    a, b, d = as_nonneg(a, "A"), as_nonneg(b, "B"), as_nonneg(d, "D")
    check_admissible(a, b, d, slack)
    n = a.shape[0]
    m = np.empty((2 * n, 2 * n))
    m[:n, :n] = np.maximum(a - d, 0.0)
    m[:n, n:] = d
    m[n:, :n] = d
    m[n:, n:] = np.maximum(b - d, 0.0)
    m.setflags(write=False)
    return CoupledMatrix(m=m, a=a, b=b, d=d)


def disassemble(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Recover ``(A, B, D)`` from a coupled block matrix."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0] // 2
    d = m[:n, n:].copy()
    return m[:n, :n] + d, m[n:, n:] + d, d


# -- symmetric eigenproblems ------------------------------------------------

def symmetrize(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    scale = max(1.0, float(np.max(np.abs(s)))) if s.size else 1.0
    if np.max(np.abs(s - s.T), initial=0.0) > 1e-12 * scale * s.shape[0]:
        raise MatrixError("matrix is not symmetric")
    return 0.5 * (s + s.T)


def jacobi_eigh(s, tol: float = 1e-14, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """All eigenpairs of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, v)`` with eigenvalues ascending and eigenvectors in the
    columns of ``v`` (orthonormal).
    """
    a = symmetrize(s).copy()
    n = a.shape[0]
    v = np.eye(n)
    norm = math.sqrt(float(np.sum(a * a))) or 1.0
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = math.sqrt(float(np.sum(a[offdiag] ** 2)))
        if off <= tol * norm:
            w = np.diag(a).copy()
            order = np.argsort(w, kind="stable")
            return w[order], v[:, order]
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - sn * aq
                a[:, q] = sn * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - sn * rq
                a[q, :] = sn * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - sn * v[:, q]
                v[:, q] = sn * vp + c * v[:, q]
    w = np.diag(a)
    k = int(np.argmax(w))
    raise SpectralConvergenceError("Jacobi sweeps did not converge", float(w[k]), off)


def symmetric_eigen_max(s, tol: float = DEFAULT_TOL) -> tuple[float, np.ndarray]:
    """Largest eigenvalue of a symmetric matrix and a unit eigenvector."""
    w, v = jacobi_eigh(s)
    lam = float(w[-1])
    x = v[:, -1]
    s = symmetrize(s)
    res = float(np.max(np.abs(s @ x - lam * x)))
    if res > tol * max(1.0, float(np.max(np.abs(s)))):
        raise SpectralConvergenceError("Jacobi eigenvector residual too large", lam, res)
    return lam, x


# -- JSON -------------------------------------------------------------------

def matrix_to_json(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"n": int(a.shape[0]), "rows": [[float(x) for x in row] for row in a]}


def matrix_from_json(obj, source: str = "<json>", nonneg: bool = True) -> np.ndarray:
    """Parse ``{"n": int, "rows": [[...], ...]}`` into a validated array.

    Error messages name ``source`` and the offending location.
    """
    if not isinstance(obj, dict) or "n" not in obj or "rows" not in obj:
        raise MatrixError(f"{source}: expected an object with keys 'n' and 'rows'")
    n = obj["n"]
    rows = obj["rows"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise MatrixError(f"{source}: 'n' must be a positive integer")
    if not isinstance(rows, list) or len(rows) != n:
        raise MatrixError(f"{source}: 'rows' must be a list of length n={n}")
    out = np.empty((n, n))
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise MatrixError(f"{source}: rows[{i}] must be a list of length {n}")
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise MatrixError(f"{source}: rows[{i}][{j}] is not a number")
            if not math.isfinite(x):
                raise MatrixError(f"{source}: rows[{i}][{j}] is not finite")
            if nonneg and x < 0:
                raise MatrixError(f"{source}: rows[{i}][{j}] is negative ({x!r})")
            out[i, j] = x
    return out


def load_matrix(path: Union[str, Path], nonneg: bool = True) -> np.ndarray:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise MatrixError(f"{path}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise MatrixError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}") from exc
    return matrix_from_json(obj, str(path), nonneg)
