"""Extended Leslie matrices and their structured couplings.

An extended Leslie matrix has a free first row (fecundities), a
subdiagonal (survival into the next age class) and an optional ``(n, n)``
entry (survival of the oldest class); everything else is zero. Couplings
between two patches then live on the subdiagonal plus the corner.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import lpsolve
from .lpsolve import FEASTOL
from .matcore import MatrixError, as_nonneg, is_schur, spectral_radius

COUPLING_KINDS = ("L", "L1")


class LesliePatternError(MatrixError):
    """Nonzero entries outside the extended Leslie pattern."""

    def __init__(self, offenders: list[tuple[int, int]], name: str = "matrix"):
        coords = ", ".join(f"({i}, {j})" for i, j in offenders)
        super().__init__(f"{name}: nonzero entries outside the Leslie pattern at {coords}")
        self.offenders = offenders


def leslie_mask(n: int) -> np.ndarray:
    """Boolean mask of positions allowed to be nonzero."""
    mask = np.zeros((n, n), dtype=bool)
    mask[0, :] = True
    idx = np.arange(1, n)
    mask[idx, idx - 1] = True
    mask[n - 1, n - 1] = True
    return mask


def coupling_mask(n: int) -> np.ndarray:
    """Positions a structured coupling may occupy: subdiagonal and corner."""
    mask = np.zeros((n, n), dtype=bool)
    idx = np.arange(1, n)
    mask[idx, idx - 1] = True
    mask[n - 1, n - 1] = True
    return mask


@dataclass(frozen=True)
class LeslieMatrix:
    inner: np.ndarray

    @property
    def n(self) -> int:
        return self.inner.shape[0]

    @property
    def first_row(self) -> np.ndarray:
        return self.inner[0].copy()

    @property
    def subdiag(self) -> np.ndarray:
        idx = np.arange(1, self.n)
        return self.inner[idx, idx - 1].copy()

    @property
    def corner(self) -> float:
        return float(self.inner[-1, -1])

    @classmethod
    def from_parts(cls, first_row, subdiag, corner: float) -> "LeslieMatrix":
        first_row = np.asarray(first_row, dtype=float)
        n = first_row.size
        m = np.zeros((n, n))
        m[0] = first_row
        idx = np.arange(1, n)
        m[idx, idx - 1] = subdiag
        m[n - 1, n - 1] = corner
        return validate_leslie(m)


def validate_leslie(m, name: str = "matrix") -> LeslieMatrix:
    """Structured view of ``m`` or :class:`LesliePatternError` listing every offender."""
    if isinstance(m, LeslieMatrix):
        return m
    m = as_nonneg(m, name)
    bad = np.argwhere((m != 0) & ~leslie_mask(m.shape[0]))
    if bad.size:
        raise LesliePatternError([(int(i), int(j)) for i, j in bad], name)
    return LeslieMatrix(m)


@dataclass(frozen=True)
class LeslieCoupling:
    subdiag: np.ndarray
    corner: float

    @property
    def n(self) -> int:
        return self.subdiag.size + 1

    def matrix(self) -> np.ndarray:
        n = self.n
        d = np.zeros((n, n))
        idx = np.arange(1, n)
        d[idx, idx - 1] = self.subdiag
        d[n - 1, n - 1] += self.corner
        return d

    def nonzero_rows(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(np.any(self.matrix() != 0, axis=1))]


def coupling_bounds(a: LeslieMatrix, b: LeslieMatrix) -> tuple[np.ndarray, float]:
    """Upper bounds keeping ``A - D`` and ``B - D`` nonnegative."""
    if a.n != b.n:
        raise MatrixError(f"dimension mismatch: {a.n} vs {b.n}")
    sub = np.minimum(a.subdiag, b.subdiag)
    corner = min(a.corner, b.corner)
    if a.n == 1:
        sub = np.zeros(0)
    return sub, corner


def _coords(n: int) -> list[tuple[int, int]]:
    # coupling coordinates in a fixed order: subdiagonal rows, then corner
    return [(i, i - 1) for i in range(1, n)] + [(n - 1, n - 1)]


def _from_vector(n: int, vec: np.ndarray) -> LeslieCoupling:
    return LeslieCoupling(subdiag=np.array(vec[: n - 1], dtype=float), corner=float(vec[n - 1]))


def enumerate_coupling_class(
    a,
    b,
    which: str,
    grid: int,
    seed: int,
    n_random: Optional[int] = None,
) -> Iterator[LeslieCoupling]:
    """Lattice of admissible couplings at resolution ``grid``, then random draws.

    Each free coordinate ``c`` takes ``grid + 1`` evenly spaced values in
    ``[0, bound_c]``, endpoints exact.
    For ``which == "L1"`` only one row of ``D`` may be nonzero, where the
    last row holds both ``d[n, n-1]`` and the corner. The random tail has
    ``n_random`` draws (default ``grid``) from a seeded generator, so the
    stream is restartable.
    """
    if which not in COUPLING_KINDS:
        raise ValueError(f"which must be one of {COUPLING_KINDS}")
    if grid < 1:
        raise ValueError("grid must be positive")
    a, b = validate_leslie(a, "A"), validate_leslie(b, "B")
    n = a.n
    sub, corner = coupling_bounds(a, b)
    bounds = np.append(sub, corner)
    coords = _coords(n)
    free = [k for k in range(n) if bounds[k] > 0]
    n_random = grid if n_random is None else n_random

    if which == "L":
        groups = [free]
    else:
        # group the free coordinates by the row they live in
        rows: dict[int, list[int]] = {}
        for k in free:
            rows.setdefault(coords[k][0], []).append(k)
        groups = [rows[r] for r in sorted(rows)]

    yield _from_vector(n, np.zeros(n))
    for group in groups:
        axes = [np.linspace(0.0, bounds[k], grid + 1) for k in group]
        for point in itertools.product(*axes):
            if all(x == 0 for x in point):
                continue
            vec = np.zeros(n)
            vec[group] = point
            yield _from_vector(n, vec)

    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        vec = np.zeros(n)
        if groups and any(groups):
            group = groups[rng.integers(len(groups))] if which == "L1" else groups[0]
            vec[group] = rng.random(len(group)) * bounds[group]
        yield _from_vector(n, vec)


@dataclass(frozen=True)
class RowSelection:
    chooser: tuple[bool, ...]
    matrix: np.ndarray


def row_selections(a, b) -> list[RowSelection]:
    """All ``2**n`` matrices whose row ``i`` is row ``i`` of A or of B.

    Selection ``k`` takes row ``i`` from A when bit ``i`` of ``k`` is set.
    """
    a, b = as_nonneg(a, "A"), as_nonneg(b, "B")
    if a.shape != b.shape:
        raise MatrixError(f"dimension mismatch: A{a.shape} vs B{b.shape}")
    n = a.shape[0]
    out = []
    for k in range(2 ** n):
        chooser = tuple(bool((k >> i) & 1) for i in range(n))
        m = np.where(np.array(chooser)[:, None], a, b)
        m.setflags(write=False)
        out.append(RowSelection(chooser, m))
    return out


def build_s1_s2(a, b) -> tuple[LeslieMatrix, LeslieMatrix]:
    """Envelope matrices sharing the entrywise-max survival structure.

    ``s1`` keeps A's first row and ``s2`` keeps B's. For ``n == 1`` the
    single entry is both first row and corner; the corner maximum wins.
    """
    a, b = validate_leslie(a, "A"), validate_leslie(b, "B")
    if a.n != b.n:
        raise MatrixError(f"dimension mismatch: {a.n} vs {b.n}")
    n = a.n
    sub = np.maximum(a.subdiag, b.subdiag)
    corner = max(a.corner, b.corner)
    s1 = a.inner.copy()
    s2 = b.inner.copy()
    idx = np.arange(1, n)
    for s in (s1, s2):
        s[idx, idx - 1] = sub
        s[n - 1, n - 1] = corner
    return validate_leslie(s1), validate_leslie(s2)


def common_right_vector(a, b, feastol: float = FEASTOL) -> Optional[np.ndarray]:
    """``v >> 0`` with ``A v << v`` and ``B v << v``, or None.

    The vector is normalised to ``min(v) = 1``.
    """
    a, b = as_nonneg(a, "A"), as_nonneg(b, "B")
    if a.shape != b.shape:
        raise MatrixError(f"dimension mismatch: A{a.shape} vs B{b.shape}")
    n = a.shape[0]
    eye = np.eye(n)
    rows = [((a - eye)[i], True) for i in range(n)] + [((b - eye)[i], True) for i in range(n)]
    ok, v, _ = lpsolve.strict_feasibility(rows, np.ones(n), 1e6, feastol=feastol)
    if not ok:
        return None
    v = v / v.min()
    if not (np.all(a @ v < v) and np.all(b @ v < v)):
        raise lpsolve.LpError("right vector failed re-substitution")
    return v


def right_vector_margin(a, b, v) -> float:
    a, b, v = np.asarray(a), np.asarray(b), np.asarray(v)
    return float(min(np.min(v - a @ v), np.min(v - b @ v)))


def all_selections_schur(a, b, margin: float = 0.0) -> bool:
    return all(is_schur(sel.matrix, margin) for sel in row_selections(a, b))


def selection_radii(a, b) -> np.ndarray:
    return np.array([spectral_radius(sel.matrix).rho for sel in row_selections(a, b)])
