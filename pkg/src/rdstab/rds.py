"""Robust diffusive stability verdicts for a coupled pair of positive systems.

Given Schur-stable nonnegative ``A`` and ``B`` and a class of admissible
couplings ``D``, decide whether ``M = [[A - D, D], [D, B - D]]`` stays
Schur-stable for every ``D`` in the class. Certificates give proofs; a
sampled ``D`` with ``rho(M) > 1`` gives a refutation; otherwise the answer
is undecided.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import certificates as certs
from . import leslie
from .lpsolve import FEASTOL
from .matcore import (
    DEFAULT_MARGIN,
    DEFAULT_TOL,
    INPUT_SLACK,
    AdmissibilityError,
    MatrixError,
    as_nonneg,
    assemble_coupled,
    is_irreducible,
    matrix_from_json,
    matrix_to_json,
    rho_by_squaring,
    spectral_radii,
    spectral_radius,
)

DEFAULT_BUDGET = 10000
LATTICE_CAP = 4096
GRID_RESOLUTION = 8
ASCENT_ROUNDS = 10


class CouplingClass(str, enum.Enum):
    DIAGONAL = "diagonal"
    LESLIE = "leslie"
    LESLIE_SINGLE_ROW = "leslie_single_row"

    @classmethod
    def parse(cls, value: Union[str, "CouplingClass"]) -> "CouplingClass":
        if isinstance(value, cls):
            return value
        return cls(str(value).replace("-", "_"))


class NotSchurError(MatrixError):
    """A system matrix is not Schur-stable with the required margin."""


# Human-readable justification attached to each certified reason.
REASON_TEXT = {
    "clclf": "common linear copositive Lyapunov function => RDS for diagonal couplings",
    "cdlf_lyapunov": "common diagonal Lyapunov function (Lyapunov form) => RDS for diagonal couplings",
    "cdlf_stein": "common diagonal Lyapunov function (Stein form) implies the Lyapunov form => RDS",
    "jlclf_irreducible": "joint linear copositive Lyapunov function with an irreducible system => RDS",
    "leslie_single_row": "Schur Leslie pair with single-row couplings is always RDS",
    "s1_s2": "both envelope matrices S1, S2 Schur => every row selection Schur => RDS for Leslie couplings",
    "common_right_vector": "common v >> 0 with Av << v, Bv << v => M v' << v' for every coupling",
    "sampled_counterexample": "an admissible coupling with rho(M) > 1 was found",
}


@dataclass(frozen=True)
class SystemPair:
    a: np.ndarray
    b: np.ndarray
    coupling_class: CouplingClass = CouplingClass.DIAGONAL
    schur_margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        a = as_nonneg(self.a, "A")
        b = as_nonneg(self.b, "B")
        if a.shape != b.shape:
            raise MatrixError(f"dimension mismatch: A{a.shape} vs B{b.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "coupling_class", CouplingClass.parse(self.coupling_class))
        for name, m in (("A", a), ("B", b)):
            rho = spectral_radius(m).rho
            if not rho < 1.0 - self.schur_margin:
                raise NotSchurError(f"{name} is not Schur-stable (rho = {rho!r})")
        if self.coupling_class is not CouplingClass.DIAGONAL:
            leslie.validate_leslie(a, "A")
            leslie.validate_leslie(b, "B")

    @property
    def n(self) -> int:
        return self.a.shape[0]


# -- structured-coupling certificates ---------------------------------------

@dataclass(frozen=True)
class EnvelopeCert:
    s1: np.ndarray
    s2: np.ndarray
    margin: float
    flavor: str = "s1_s2"

    def to_json(self) -> dict:
        return {"flavor": self.flavor, "s1": matrix_to_json(self.s1), "s2": matrix_to_json(self.s2),
                "margin": float(self.margin)}


@dataclass(frozen=True)
class RightVectorCert:
    v: np.ndarray
    margin: float
    flavor: str = "common_right_vector"

    def to_json(self) -> dict:
        return {"flavor": self.flavor, "vector": [float(x) for x in self.v], "margin": float(self.margin)}


@dataclass(frozen=True)
class SingleRowCert:
    margin: float  # 1 - max(rho(A), rho(B))
    flavor: str = "leslie_single_row"

    def to_json(self) -> dict:
        return {"flavor": self.flavor, "margin": float(self.margin)}


Certificate = Union[certs.CopositiveCert, certs.DiagonalCert, EnvelopeCert, RightVectorCert, SingleRowCert]


def certificate_from_json(obj: dict) -> Certificate:
    flavor = obj.get("flavor") if isinstance(obj, dict) else None
    if flavor == "s1_s2":
        return EnvelopeCert(matrix_from_json(obj["s1"], "s1"), matrix_from_json(obj["s2"], "s2"),
                            float(obj["margin"]))
    if flavor == "common_right_vector":
        return RightVectorCert(np.asarray(obj["vector"], dtype=float), float(obj["margin"]))
    if flavor == "leslie_single_row":
        return SingleRowCert(float(obj["margin"]))
    return certs.cert_from_json(obj)


def verify_certificate(a, b, cert: Certificate) -> bool:
    """Independent re-check of any certificate against the pair ``(a, b)``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if isinstance(cert, certs.CopositiveCert):
        return certs.verify_copositive_cert(a, b, cert)
    if isinstance(cert, certs.DiagonalCert):
        return certs.verify_diagonal_cert(a, b, cert)
    if isinstance(cert, RightVectorCert):
        v = np.asarray(cert.v, dtype=float)
        if v.shape != (a.shape[0],) or np.any(v <= 0) or not cert.margin > 0:
            return False
        need = cert.margin / 2
        for m in (a, b):
            for i in range(a.shape[0]):
                if math.fsum(float(x) * float(y) for x, y in zip(m[i], v)) - v[i] > -need:
                    return False
        return True
    try:
        la, lb = leslie.validate_leslie(a, "A"), leslie.validate_leslie(b, "B")
    except MatrixError:
        return False
    if isinstance(cert, EnvelopeCert):
        s1, s2 = leslie.build_s1_s2(la, lb)
        if not (np.array_equal(s1.inner, cert.s1) and np.array_equal(s2.inner, cert.s2)):
            return False
        return max(rho_by_squaring(s1.inner)[0], rho_by_squaring(s2.inner)[0]) <= 1 - cert.margin / 2
    if isinstance(cert, SingleRowCert):
        return max(rho_by_squaring(a)[0], rho_by_squaring(b)[0]) <= 1 - cert.margin / 2 and cert.margin > 0
    return False


# -- admissible couplings ---------------------------------------------------

def _coordinates(pair: SystemPair) -> tuple[list[tuple[int, int]], np.ndarray, list[list[int]]]:
    """Free coupling coordinates, their upper bounds, and row groups."""
    n = pair.n
    a, b = pair.a, pair.b
    if pair.coupling_class is CouplingClass.DIAGONAL:
        coords = [(i, i) for i in range(n)]
    else:
        coords = [(i, i - 1) for i in range(1, n)] + [(n - 1, n - 1)]
    bounds = np.array([min(a[i, j], b[i, j]) for i, j in coords])
    free = [k for k in range(len(coords)) if bounds[k] > 0]
    if pair.coupling_class is CouplingClass.LESLIE_SINGLE_ROW:
        rows: dict[int, list[int]] = {}
        for k in free:
            rows.setdefault(coords[k][0], []).append(k)
        groups = [rows[r] for r in sorted(rows)]
    else:
        groups = [free] if free else []
    return coords, bounds, groups


def check_coupling(pair: SystemPair, d, slack: float = INPUT_SLACK) -> np.ndarray:
    """Validate ``d`` against the pair's coupling class and return it."""
    d = as_nonneg(d, "D")
    if d.shape != pair.a.shape:
        raise MatrixError(f"dimension mismatch: D{d.shape} vs A{pair.a.shape}")
    n = pair.n
    if pair.coupling_class is CouplingClass.DIAGONAL:
        allowed = np.eye(n, dtype=bool)
    else:
        allowed = leslie.coupling_mask(n)
    bad = np.argwhere((d != 0) & ~allowed)
    if bad.size:
        i, j = bad[0]
        raise AdmissibilityError(
            f"D has entry {d[i, j]!r} at ({i}, {j}) outside the {pair.coupling_class.value} pattern"
        )
    if pair.coupling_class is CouplingClass.LESLIE_SINGLE_ROW:
        rows = np.flatnonzero(np.any(d != 0, axis=1))
        if rows.size > 1:
            raise AdmissibilityError(f"D has {rows.size} nonzero rows; single-row class allows one")
    assemble_coupled(pair.a, pair.b, d, slack)
    return d


def rho_coupled(pair: SystemPair, d, tol: float = DEFAULT_TOL) -> float:
    """Spectral radius of the coupled matrix for an admissible ``d``."""
    d = check_coupling(pair, d)
    return spectral_radius(assemble_coupled(pair.a, pair.b, d, INPUT_SLACK).m, tol).rho


# -- destabilising couplings ------------------------------------------------

def _stack(a: np.ndarray, b: np.ndarray, ds: np.ndarray) -> np.ndarray:
    k, n = ds.shape[0], a.shape[0]
    m = np.empty((k, 2 * n, 2 * n))
    m[:, :n, :n] = a - ds
    m[:, :n, n:] = ds
    m[:, n:, :n] = ds
    m[:, n:, n:] = b - ds
    return np.maximum(m, 0.0)


def _lattice(groups: list[list[int]], bounds: np.ndarray, ncoords: int, cap: int) -> np.ndarray:
    points = [np.zeros(ncoords)]
    if not groups:
        return np.array(points)
    per_group = max(1, (cap - 1) // len(groups))
    for group in groups:
        g = GRID_RESOLUTION
        while g > 1 and (g + 1) ** len(group) > per_group:
            g -= 1
        if (g + 1) ** len(group) > per_group:
            continue
        axes = [np.linspace(0.0, bounds[k], g + 1) for k in group]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(group))
        for p in mesh:
            if np.any(p != 0):
                vec = np.zeros(ncoords)
                vec[group] = p
                points.append(vec)
    return np.array(points)


def find_destabilizer(
    pair: SystemPair,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    feastol: float = FEASTOL,
) -> Optional[tuple[np.ndarray, float]]:
    """Search for an admissible ``D`` with ``rho(M) > 1 + feastol``.

    Samples a lattice (up to 8 steps per coordinate, at most 4096 points),
    fills the remaining budget with seeded uniform draws, then sharpens the
    best sample by coordinate ascent with step halving. The winner is
    re-verified by repeated squaring. ``None`` is not a proof of stability.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    coords, bounds, groups = _coordinates(pair)
    ncoords = len(coords)
    if not groups:
        return None
    lattice = _lattice(groups, bounds, ncoords, min(LATTICE_CAP, budget))[:budget]
    rng = np.random.default_rng(seed)
    nrand = budget - lattice.shape[0]
    rand = np.zeros((max(nrand, 0), ncoords))
    for r in range(rand.shape[0]):
        group = groups[rng.integers(len(groups))] if len(groups) > 1 else groups[0]
        rand[r, group] = rng.random(len(group)) * bounds[group]
    samples = np.vstack([lattice, rand])

    rows = np.array([i for i, _ in coords])
    cols = np.array([j for _, j in coords])

    def to_mats(vecs: np.ndarray) -> np.ndarray:
        ds = np.zeros((vecs.shape[0], pair.n, pair.n))
        np.add.at(ds, (slice(None), rows, cols), vecs)
        return ds

    radii = np.empty(samples.shape[0])
    for start in range(0, samples.shape[0], 2048):
        chunk = samples[start:start + 2048]
        radii[start:start + 2048] = spectral_radii(_stack(pair.a, pair.b, to_mats(chunk)))
    best_idx = int(np.argmax(radii))  # first maximiser in lattice order
    best = samples[best_idx].copy()
    best_rho = float(radii[best_idx])

    active = [k for k in range(ncoords) if best[k] != 0]
    group = next((g for g in groups if set(active) <= set(g)), groups[0])
    step = bounds.copy() / 4
    for _ in range(ASCENT_ROUNDS):
        for k in group:
            for sgn in (1.0, -1.0):
                trial = best.copy()
                trial[k] = min(max(trial[k] + sgn * step[k], 0.0), bounds[k])
                if trial[k] == best[k]:
                    continue
                r = float(spectral_radii(_stack(pair.a, pair.b, to_mats(trial[None])))[0])
                if r > best_rho:
                    best, best_rho = trial, r
        step /= 2

    if best_rho <= 1.0 + feastol:
        return None
    d = to_mats(best[None])[0]
    check_coupling(pair, d, slack=0.0)
    rho_check, _ = rho_by_squaring(assemble_coupled(pair.a, pair.b, d).m)
    if rho_check <= 1.0 + feastol:
        return None
    d.setflags(write=False)
    return d, rho_check


# -- verdicts ---------------------------------------------------------------

@dataclass
class RdsVerdict:
    status: str  # certified | refuted | undecided
    reason: Optional[str] = None
    certificate: Optional[Certificate] = None
    witness_d: Optional[np.ndarray] = None
    rho_at_witness: Optional[float] = None
    seed: int = 0
    budget: int = DEFAULT_BUDGET
    notes: list = field(default_factory=list)

    @property
    def explanation(self) -> str:
        return REASON_TEXT.get(self.reason, "no certificate and no counterexample found")

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "reason": self.reason,
            "certificate": None if self.certificate is None else self.certificate.to_json(),
            "witness_d": None if self.witness_d is None else matrix_to_json(self.witness_d),
            "rho_at_witness": self.rho_at_witness,
            "seed": self.seed,
            "budget": self.budget,
        }


def _diagonal_certificate(pair: SystemPair, notes: list) -> Optional[tuple[str, Certificate]]:
    # LP certificates first, then the cutting-plane searches
    a, b = pair.a, pair.b
    cert = certs.find_clclf(a, b)
    if cert is not None:
        return "clclf", cert
    cert = certs.find_jlclf(a, b)
    if cert is not None:
        if is_irreducible(a) or is_irreducible(b):
            return "jlclf_irreducible", cert
        notes.append("a JLCLF exists but both matrices are reducible; not sufficient here")
    for flavor in ("lyapunov", "stein"):
        search = certs.find_cdlf(a, b, flavor)
        if search.status == "found":
            return f"cdlf_{flavor}", search.certificate
        if search.status == "undecided":
            notes.append(f"CDLF ({flavor}) search hit the cut cap after {search.cuts} cuts")
    return None


def _leslie_certificate(pair: SystemPair) -> Optional[tuple[str, Certificate]]:
    a, b = pair.a, pair.b
    s1, s2 = leslie.build_s1_s2(a, b)
    rho_env = max(spectral_radius(s1.inner).rho, spectral_radius(s2.inner).rho)
    if rho_env < 1.0 - pair.schur_margin:
        return "s1_s2", EnvelopeCert(s1.inner, s2.inner, 1.0 - rho_env)
    v = leslie.common_right_vector(a, b)
    if v is not None:
        return "common_right_vector", RightVectorCert(v, leslie.right_vector_margin(a, b, v))
    return None


def decide_rds(pair: SystemPair, budget: int = DEFAULT_BUDGET, seed: int = 0) -> RdsVerdict:
    """Certify, refute, or leave undecided the RDS property of ``pair``.

    Certificates are tried in a fixed order per coupling class; failing
    those, a destabilising coupling is searched for.
    """
    notes: list = []
    if pair.coupling_class is CouplingClass.DIAGONAL:
        found = _diagonal_certificate(pair, notes)
    elif pair.coupling_class is CouplingClass.LESLIE:
        found = _leslie_certificate(pair)
    else:
        rho = max(spectral_radius(pair.a).rho, spectral_radius(pair.b).rho)
        found = ("leslie_single_row", SingleRowCert(1.0 - rho))
    if found is not None:
        reason, cert = found
        if not verify_certificate(pair.a, pair.b, cert):
            raise ArithmeticError(f"{reason} certificate failed re-verification")
        return RdsVerdict("certified", reason, cert, seed=seed, budget=budget, notes=notes)
    hit = find_destabilizer(pair, budget, seed)
    if hit is not None:
        d, rho = hit
        return RdsVerdict("refuted", "sampled_counterexample", None, d, rho, seed, budget, notes)
    return RdsVerdict("undecided", None, seed=seed, budget=budget, notes=notes)


# -- simulation -------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray  # shape (T + 1, 2n): x then y
    growth_estimate: float
    diverged: bool = False

    @property
    def norms(self) -> np.ndarray:
        return _norms(self.states)


def simulate_coupled(pair: SystemPair, d, x0, y0, t_max: int) -> Trajectory:
    """Iterate the coupled recurrence from ``(x0, y0)`` for ``t_max`` steps.

    The growth estimate is the least-squares slope of ``log ||(x, y)||``
    over the second half of the run. If the norm passes ``1e300`` the run
    is truncated and flagged as diverged.
    """
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    d = check_coupling(pair, d)
    n = pair.n
    x = np.asarray(x0, dtype=float)
    y = np.asarray(y0, dtype=float)
    if x.shape != (n,) or y.shape != (n,) or np.any(x < 0) or np.any(y < 0):
        raise ValueError(f"initial states must be nonnegative vectors of length {n}")
    a_d = np.maximum(pair.a - d, 0.0)
    b_d = np.maximum(pair.b - d, 0.0)
    states = [np.concatenate([x, y])]
    diverged = False
    for _ in range(t_max):
        x, y = a_d @ x + d @ y, d @ x + b_d @ y
        state = np.concatenate([x, y])
        if not np.isfinite(state).all() or _norms(state[None])[0] > 1e300:
            diverged = True
            break
        states.append(state)
    states = np.array(states)
    return Trajectory(states, _growth(states), diverged)


def _norms(states: np.ndarray) -> np.ndarray:
    # scale before squaring so states near the overflow cap stay finite
    top = np.max(np.abs(states), axis=1)
    safe = np.where(top > 0, top, 1.0)
    return top * np.linalg.norm(states / safe[:, None], axis=1)


def _growth(states: np.ndarray) -> float:
    norms = _norms(states)
    # subnormal or zero norms carry no slope information
    live = np.flatnonzero(norms > 1e-290)
    if live.size == 0:
        return 0.0
    if live.size < 2:
        return -math.inf if live[-1] < norms.size - 1 else 0.0
    tail = live[live.size - max(live.size // 2, 2):]
    slope = np.polyfit(tail.astype(float), np.log(norms[tail]), 1)[0]
    return float(slope)
