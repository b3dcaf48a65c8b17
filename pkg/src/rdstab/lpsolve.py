"""Small dense LP engine for strict-feasibility questions.

A two-phase, bounded-variable primal simplex using Bland's rule. Every
optimal solution is re-substituted into the original constraints, and every
infeasibility verdict carries a Farkas ray that is checked before it is
reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

FEASTOL = 1e-9
_PIVTOL = 1e-11
_DTOL = 1e-11

RELATIONS = ("<=", ">=", "=")


class LpError(RuntimeError):
    """The simplex could not reach a verified conclusion."""


@dataclass
class LinearProgram:
    """``sense`` of ``objective . x`` subject to ``constraints`` and bounds.

    ``constraints`` is a sequence of ``(coeffs, relation, rhs)`` with
    ``relation`` one of ``"<="``, ``">="``, ``"="``. Variables default to
    ``0 <= x < inf``; ``lower`` may contain ``-inf``.
    """

    num_vars: int
    constraints: Sequence[tuple]
    objective: Sequence[float]
    sense: str = "maximize"
    lower: Optional[Sequence[float]] = None
    upper: Optional[Sequence[float]] = None

    def __post_init__(self):
        if self.sense not in ("maximize", "minimize"):
            raise ValueError(f"unknown sense {self.sense!r}")
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.num_vars,):
            raise ValueError("objective length must equal num_vars")
        rows = []
        for k, (coeffs, rel, rhs) in enumerate(self.constraints):
            coeffs = np.asarray(coeffs, dtype=float)
            if coeffs.shape != (self.num_vars,):
                raise ValueError(f"constraint {k}: expected {self.num_vars} coefficients")
            if rel not in RELATIONS:
                raise ValueError(f"constraint {k}: unknown relation {rel!r}")
            if not (np.all(np.isfinite(coeffs)) and math.isfinite(rhs)):
                raise ValueError(f"constraint {k}: non-finite coefficient")
            rows.append((coeffs, rel, float(rhs)))
        self.constraints = rows
        lo = np.zeros(self.num_vars) if self.lower is None else np.asarray(self.lower, dtype=float)
        hi = np.full(self.num_vars, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if lo.shape != (self.num_vars,) or hi.shape != (self.num_vars,):
            raise ValueError("bounds must have length num_vars")
        if np.any(lo > hi) or np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise ValueError("inconsistent variable bounds")
        self.lower, self.upper = lo, hi


@dataclass
class LpOutcome:
    status: str  # optimal | infeasible | unbounded
    solution: Optional[np.ndarray] = None
    objective_value: Optional[float] = None
    farkas: Optional[np.ndarray] = field(default=None, repr=False)
    iterations: int = 0


class _Tableau:
    """Bounded simplex on ``A z = b``, ``0 <= z <= u``, minimising ``c . z``.

    The last ``m`` columns are artificials forming the initial basis.
    """

    def __init__(self, a: np.ndarray, b: np.ndarray, u: np.ndarray, max_iter: int):
        m, ncols = a.shape
        self.m = m
        self.a0 = a
        self.b0 = b
        self.u = u.copy()
        self.t = a.copy()
        self.basis = np.arange(ncols - m, ncols)
        self.at_upper = np.zeros(ncols, dtype=bool)
        self.max_iter = max_iter
        self.iterations = 0
        self.art = np.arange(ncols - m, ncols)

    def binv(self) -> np.ndarray:
        return self.t[:, self.art]

    def refactor(self) -> None:
        # rebuild the tableau from the original columns to shed pivot drift
        try:
            self.t = np.linalg.solve(self.a0[:, self.basis], self.a0)
        except np.linalg.LinAlgError as exc:
            raise LpError("singular basis during refactorisation") from exc

    def basic_values(self) -> np.ndarray:
        zn = np.where(self.at_upper, self.u, 0.0)
        zn[self.basis] = 0.0
        return self.binv() @ (self.b0 - self.a0 @ np.where(np.isfinite(zn), zn, 0.0))

    def values(self) -> np.ndarray:
        z = np.where(self.at_upper, self.u, 0.0)
        z[self.basis] = self.basic_values()
        return z

    def duals(self, c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        pi = c[self.basis] @ self.binv()
        d = c - pi @ self.a0
        return pi, d

    def run(self, c: np.ndarray) -> str:
        m = self.m
        ncols = self.t.shape[1]
        in_basis = np.zeros(ncols, dtype=bool)
        in_basis[self.basis] = True
        while True:
            if self.iterations >= self.max_iter:
                raise LpError(f"simplex iteration guard ({self.max_iter}) exceeded")
            if self.iterations and self.iterations % 25 == 0:
                self.refactor()
            _, d = self.duals(c)
            cand = (~in_basis) & (self.u > 0) & (
                ((~self.at_upper) & (d < -_DTOL)) | (self.at_upper & (d > _DTOL))
            )
            if not cand.any():
                self.refactor()
                _, d = self.duals(c)
                cand = (~in_basis) & (self.u > 0) & (
                    ((~self.at_upper) & (d < -_DTOL)) | (self.at_upper & (d > _DTOL))
                )
                if not cand.any():
                    return "optimal"
            j = int(np.flatnonzero(cand)[0])  # Bland: lowest index
            sgn = -1.0 if self.at_upper[j] else 1.0
            xb = self.basic_values()
            col = self.t[:, j] * sgn
            ub = self.u[self.basis]
            ratio = np.full(m, np.inf)
            dec = col > _PIVTOL
            inc = (col < -_PIVTOL) & np.isfinite(ub)
            ratio[dec] = np.maximum(xb[dec], 0.0) / col[dec]
            ratio[inc] = np.maximum(ub[inc] - xb[inc], 0.0) / -col[inc]
            theta = float(ratio.min()) if m else np.inf
            self.iterations += 1
            if self.u[j] <= theta:
                if not np.isfinite(self.u[j]):
                    return "unbounded"
                self.at_upper[j] = not self.at_upper[j]
                continue
            # Bland: among tied rows, the lowest-index basic variable leaves
            tied = np.flatnonzero(ratio <= theta + 1e-12 * max(1.0, theta))
            leave = int(tied[np.argmin(self.basis[tied])])
            leave_to_upper = bool(inc[leave])
            old = self.basis[leave]
            self.at_upper[old] = leave_to_upper
            in_basis[old] = False
            self.at_upper[j] = False
            piv = self.t[leave, j]
            self.t[leave] /= piv
            others = self.t[:, j].copy()
            others[leave] = 0.0
            self.t -= np.outer(others, self.t[leave])
            self.basis[leave] = j
            in_basis[j] = True


def _canonical(lp: LinearProgram):
    """Map ``lp`` to ``A z = b``, ``0 <= z <= u`` plus the back-substitution."""
    n = lp.num_vars
    cols = []  # (orig var, sign) per structural z column
    shift = np.where(np.isfinite(lp.lower), lp.lower, 0.0)
    extra_rows = []
    ub = []
    for k in range(n):
        if np.isfinite(lp.lower[k]):
            cols.append((k, 1.0))
            ub.append(lp.upper[k] - lp.lower[k])
        else:
            cols.append((k, 1.0))
            cols.append((k, -1.0))
            ub += [np.inf, np.inf]
            if np.isfinite(lp.upper[k]):
                e = np.zeros(n)
                e[k] = 1.0
                extra_rows.append((e, "<=", lp.upper[k]))
    rows = list(lp.constraints) + extra_rows
    m = len(rows)
    nz = len(cols)
    nslack = sum(1 for _, rel, _ in rows if rel != "=")
    a = np.zeros((m, nz + nslack + m))
    b = np.zeros(m)
    s = nz
    for i, (coeffs, rel, rhs) in enumerate(rows):
        for c_idx, (k, sg) in enumerate(cols):
            a[i, c_idx] = sg * coeffs[k]
        b[i] = rhs - coeffs @ shift
        if rel == "<=":
            a[i, s] = 1.0
            s += 1
        elif rel == ">=":
            a[i, s] = -1.0
            s += 1
    u = np.concatenate([np.array(ub, dtype=float), np.full(nslack, np.inf), np.full(m, np.inf)])
    # orient rows so that artificials start nonnegative
    flip = np.where(b < 0, -1.0, 1.0)
    a[:, :nz + nslack] *= flip[:, None]
    b = b * flip
    a[:, nz + nslack:] = np.eye(m)
    cost = np.zeros(nz + nslack + m)
    for c_idx, (k, sg) in enumerate(cols):
        cost[c_idx] = sg * lp.objective[k]
    if lp.sense == "maximize":
        cost = -cost
    return a, b, u, cost, cols, shift, nz + nslack, rows


def _farkas(tab: _Tableau, c1: np.ndarray, nreal: int, feastol: float) -> np.ndarray:
    """Farkas ray for ``{A z = b, 0 <= z <= u}`` in ``G z <= h`` form.

    Rows of ``G`` are ``A``, ``-A``, ``-I`` and ``I`` (finite ``u`` only).
    Returns ``y >= 0`` normalised to unit max-norm; raises unless
    ``y G = 0`` and ``y h < -feastol`` hold numerically.
    """
    a = tab.a0[:, :nreal]
    b = tab.b0
    u = tab.u[:nreal]
    pi, d = tab.duals(c1)
    mu = -pi
    d = d[:nreal].copy()
    d[np.abs(d) < _DTOL] = 0.0
    lower_mult = np.maximum(d, 0.0)
    upper_mult = np.where(np.isfinite(u), np.maximum(-d, 0.0), 0.0)
    y = np.concatenate([np.maximum(mu, 0.0), np.maximum(-mu, 0.0), lower_mult, upper_mult])
    scale = float(np.max(y)) if y.size else 0.0
    if scale <= 0:
        raise LpError("phase one ended infeasible but produced a zero dual ray")
    y /= scale
    m = a.shape[0]
    y_pos, y_neg = y[:m], y[m:2 * m]
    y_lo, y_up = y[2 * m:2 * m + nreal], y[2 * m + nreal:]
    g_res = (y_pos - y_neg) @ a - y_lo + y_up
    h = (y_pos - y_neg) @ b + float(np.sum(y_up * np.where(np.isfinite(u), u, 0.0)))
    if np.max(np.abs(g_res), initial=0.0) > feastol or not h < -feastol:
        raise LpError(f"unverified infeasibility ray (|yG|={np.max(np.abs(g_res)):.2e}, yh={h:.2e})")
    return y


def _check_solution(lp: LinearProgram, x: np.ndarray, feastol: float) -> None:
    for k, (coeffs, rel, rhs) in enumerate(lp.constraints):
        lhs = math.fsum(float(c) * float(v) for c, v in zip(coeffs, x))
        # rounding grows with the magnitude of the terms, not of the sum
        scale = 1.0 + math.fsum(abs(float(c) * float(v)) for c, v in zip(coeffs, x)) + abs(rhs)
        viol = {"<=": lhs - rhs, ">=": rhs - lhs, "=": abs(lhs - rhs)}[rel]
        if viol > feastol * scale:
            raise LpError(f"solution violates constraint {k} by {viol:.3e}")
    if np.any(x < lp.lower - feastol * (1 + np.abs(lp.lower))) or np.any(
        x > lp.upper + feastol * (1 + np.abs(lp.upper))
    ):
        raise LpError("solution violates variable bounds")


def solve(lp: LinearProgram, feastol: float = FEASTOL, max_iter: Optional[int] = None) -> LpOutcome:
    """Solve ``lp`` with the two-phase bounded simplex."""
    if feastol <= 0:
        raise ValueError("feastol must be positive")
    a, b, u, cost, cols, shift, nreal, rows = _canonical(lp)
    m, ncols = a.shape
    if max_iter is None:
        max_iter = 50 * (m + ncols) + 1000
    tab = _Tableau(a, b, u, max_iter)

    c1 = np.zeros(ncols)
    c1[nreal:] = 1.0
    if m:
        tab.run(c1)
        infeas = float(np.sum(tab.basic_values()[tab.basis >= nreal]))
        if infeas > feastol * (1.0 + float(np.max(np.abs(b), initial=0.0))):
            y = _farkas(tab, c1, nreal, feastol)
            return LpOutcome("infeasible", farkas=y, iterations=tab.iterations)
    # artificials are pinned at zero from here on
    tab.u[nreal:] = 0.0
    tab.at_upper[nreal:] = False
    status = tab.run(cost)
    if status == "unbounded":
        return LpOutcome("unbounded", iterations=tab.iterations)
    z = tab.values()
    x = shift.copy()
    for c_idx, (k, sg) in enumerate(cols):
        x[k] += sg * z[c_idx]
    x = np.clip(x, lp.lower, lp.upper)
    _check_solution(lp, x, feastol)
    return LpOutcome("optimal", solution=x, objective_value=float(lp.objective @ x),
                     iterations=tab.iterations)


def strict_feasibility(
    rows: Sequence[tuple],
    lower_bounds: Sequence[float],
    upper_bound: float = 1e6,
    nonstrict_slack: float = 0.0,
    feastol: float = FEASTOL,
    eps_cap: float = 1.0,
) -> tuple[bool, Optional[np.ndarray], float]:
    """Maximise a common margin over strict rows.

    ``rows`` holds ``(coeffs, strict)``. Strict rows become
    ``c . x <= -eps``, the others ``c . x <= nonstrict_slack``. Variables are
    boxed by ``lower_bounds <= x <= upper_bound`` with
    ``sum(x) <= n * upper_bound``, and ``eps`` is boxed in
    ``[-eps_cap, eps_cap]``.

    Returns ``(feasible, witness, margin)`` where feasible means the optimal
    margin exceeds ``feastol``. The witness is returned only when feasible
    and is checked to satisfy every strict row with slack ``margin / 2``.
    """
    if not rows:
        raise ValueError("empty system")
    lo = np.asarray(lower_bounds, dtype=float)
    n = lo.size
    cons = []
    for coeffs, strict in rows:
        coeffs = np.asarray(coeffs, dtype=float)
        if strict:
            cons.append((np.append(coeffs, 1.0), "<=", 0.0))
        else:
            cons.append((np.append(coeffs, 0.0), "<=", nonstrict_slack))
    cons.append((np.append(np.ones(n), 0.0), "<=", n * upper_bound))
    obj = np.zeros(n + 1)
    obj[-1] = 1.0
    lp = LinearProgram(
        num_vars=n + 1,
        constraints=cons,
        objective=obj,
        sense="maximize",
        lower=np.append(lo, -eps_cap),
        upper=np.append(np.full(n, upper_bound), eps_cap),
    )
    out = solve(lp, feastol)
    if out.status != "optimal":
        return False, None, -math.inf
    eps = float(out.solution[-1])
    if eps <= feastol:
        return False, None, eps
    x = out.solution[:-1]
    for coeffs, strict in rows:
        lhs = math.fsum(float(c) * float(v) for c, v in zip(coeffs, x))
        limit = -eps / 2 if strict else nonstrict_slack + feastol
        if lhs > limit:
            raise LpError("witness fails re-substitution")
    return True, x, eps
