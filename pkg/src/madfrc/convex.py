"""Small dense convex QCQP solver.

Problems have the form::

    maximize    x^T P0 x + q0^T x + c0          (P0 negative semidefinite)
    subject to  x^T Pi x + qi^T x + ri <= 0     (Pi positive semidefinite)
                lower <= x <= upper

and are solved with a primal-dual interior-point method. A phase-I search
finds a strictly feasible start when the supplied one is not. Returned
optimal points are strictly interior, so every constraint holds exactly.

Complex design variables are handled by :class:`VariableMap`, which
interleaves real and imaginary parts of each complex coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

__all__ = [
    "ConvexQCQP",
    "SolveReport",
    "solve",
    "lift",
    "unlift",
    "lift_hermitian",
    "lift_linear",
    "VariableMap",
]

PSD_FLOOR = 1e-9
# Starting points closer than this to a (normalized) constraint boundary are
# pushed inward first; the interior-point iterations crawl otherwise.
INTERIOR = 1e-3


def lift(z) -> np.ndarray:
    """Complex vector to interleaved ``[re_0, im_0, re_1, im_1, ...]``."""
    z = np.asarray(z, dtype=complex).ravel()
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def unlift(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[0::2] + 1j * x[1::2]


def lift_hermitian(M) -> np.ndarray:
    """Real symmetric ``R`` with ``z^H M z = lift(z)^T R lift(z)``."""
    M = np.asarray(M, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if M.shape[0] != M.shape[1] or not np.allclose(M, M.conj().T, rtol=0, atol=1e-12 * scale):
        raise ValueError("quadratic form matrix must be Hermitian")
    n = M.shape[0]
    R = np.empty((2 * n, 2 * n))
    R[0::2, 0::2] = M.real
    R[1::2, 1::2] = M.real
    R[0::2, 1::2] = -M.imag
    R[1::2, 0::2] = M.imag
    return 0.5 * (R + R.T)


def lift_linear(a) -> np.ndarray:
    """Real ``c`` with ``Re{a^H z} = c^T lift(z)``."""
    return lift(a)


class VariableMap:
    """Named blocks of real and complex variables inside one real vector."""

    def __init__(self):
        self._blocks: dict[str, tuple[slice, bool]] = {}
        self.n = 0

    def add_complex(self, name: str, size: int) -> "VariableMap":
        return self._add(name, 2 * size, True)

    def add_real(self, name: str, size: int) -> "VariableMap":
        return self._add(name, size, False)

    def _add(self, name, width, is_complex):
        if name in self._blocks:
            raise ValueError(f"duplicate block {name!r}")
        self._blocks[name] = (slice(self.n, self.n + width), is_complex)
        self.n += width
        return self

    def slice(self, name: str) -> slice:
        return self._blocks[name][0]

    def quad(self, name: str, M) -> np.ndarray:
        """Full ``n x n`` real matrix for the quadratic form of one block."""
        sl, is_complex = self._blocks[name]
        out = np.zeros((self.n, self.n))
        out[sl, sl] = lift_hermitian(M) if is_complex else np.asarray(M, dtype=float)
        return out

    def linear(self, name: str, a) -> np.ndarray:
        """Full length-``n`` vector for ``Re{a^H z}`` (complex) or ``a^T x`` (real)."""
        sl, is_complex = self._blocks[name]
        out = np.zeros(self.n)
        out[sl] = lift_linear(a) if is_complex else np.asarray(a, dtype=float)
        return out

    def pack(self, **values) -> np.ndarray:
        x = np.zeros(self.n)
        for name, val in values.items():
            sl, is_complex = self._blocks[name]
            x[sl] = lift(val) if is_complex else np.asarray(val, dtype=float).ravel()
        return x

    def unpack(self, x) -> dict[str, np.ndarray]:
        x = np.asarray(x, dtype=float)
        return {
            name: (unlift(x[sl]) if is_complex else x[sl].copy())
            for name, (sl, is_complex) in self._blocks.items()
        }


def _certify(P, sign: int, what: str) -> np.ndarray:
    """Symmetrize and clip tiny eigenvalues of the wrong sign; raise on real violations."""
    P = np.asarray(P, dtype=float)
    P = 0.5 * (P + P.T)
    if not np.any(P):
        return P
    w, V = np.linalg.eigh(sign * P)
    floor = -PSD_FLOOR * max(1.0, float(np.max(np.abs(w))))
    if w[0] < floor:
        raise ValueError(f"{what} is not {'positive' if sign > 0 else 'negative'} semidefinite "
                         f"(eigenvalue {sign * w[0]:.3e})")
    if w[0] < 0:
        P = sign * (V * np.clip(w, 0.0, None)) @ V.T
        P = 0.5 * (P + P.T)
    return P


@dataclass
class ConvexQCQP:
    """Concave quadratic objective under convex quadratic and box constraints."""

    n: int
    obj_quad: np.ndarray | None = None
    obj_lin: np.ndarray | None = None
    obj_const: float = 0.0
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    _quad: list = field(default_factory=list, repr=False)
    _lin: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.obj_quad = (np.zeros((self.n, self.n)) if self.obj_quad is None
                         else _certify(self.obj_quad, -1, "objective quadratic"))
        self.obj_lin = np.zeros(self.n) if self.obj_lin is None else np.asarray(self.obj_lin, float)

    def add_constraint(self, P=None, q=None, r: float = 0.0) -> "ConvexQCQP":
        """Append ``x^T P x + q^T x + r <= 0``."""
        q = np.zeros(self.n) if q is None else np.asarray(q, dtype=float)
        if P is None or not np.any(P):
            self._lin.append((q, float(r)))
        else:
            self._quad.append((_certify(P, 1, "constraint quadratic"), q, float(r)))
        return self

    def add_linear(self, q, r: float = 0.0) -> "ConvexQCQP":
        return self.add_constraint(None, q, r)

    @property
    def num_constraints(self) -> int:
        box = sum(int(np.sum(np.isfinite(b))) for b in (self.lower, self.upper) if b is not None)
        return len(self._quad) + len(self._lin) + box

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.obj_quad @ x + self.obj_lin @ x + self.obj_const)

    def constraint_values(self, x) -> np.ndarray:
        """Unnormalized left-hand sides, box bounds last."""
        x = np.asarray(x, dtype=float)
        vals = [x @ P @ x + q @ x + r for P, q, r in self._quad]
        vals += [q @ x + r for q, r in self._lin]
        if self.upper is not None:
            m = np.isfinite(self.upper)
            vals += list(x[m] - self.upper[m])
        if self.lower is not None:
            m = np.isfinite(self.lower)
            vals += list(self.lower[m] - x[m])
        return np.asarray(vals, dtype=float)


@dataclass
class SolveReport:
    status: str  # "optimal" | "infeasible" | "max_iter"
    x: np.ndarray
    value: float
    max_violation: float
    iterations: int = 0


class _Stacked:
    """Normalized constraint data: ``x^T P x + q^T x + r <= 0`` row by row."""

    def __init__(self, p: ConvexQCQP):
        n = p.n
        Ps, qs, rs = [], [], []
        for P, q, r in p._quad:
            s = max(np.max(np.abs(P)), np.max(np.abs(q), initial=0.0), abs(r))
            Ps.append(P / s), qs.append(q / s), rs.append(r / s)
        self.P = np.array(Ps).reshape(-1, n, n)
        self.qq = np.array(qs).reshape(-1, n)
        self.rq = np.array(rs)
        A, b = [], []
        for q, r in p._lin:
            s = max(np.max(np.abs(q), initial=0.0), abs(r))
            if s == 0:
                continue
            A.append(q / s), b.append(r / s)
        eye = np.eye(n)
        for bound, sign in ((p.upper, 1.0), (p.lower, -1.0)):
            if bound is None:
                continue
            for i in np.flatnonzero(np.isfinite(bound)):
                s = max(1.0, abs(bound[i]))
                A.append(sign * eye[i] / s), b.append(-sign * bound[i] / s)
        self.A = np.array(A).reshape(-1, n)
        self.b = np.array(b)
        self.m = self.P.shape[0] + self.A.shape[0]

    def values(self, x):
        Px = np.einsum("ijk,k->ij", self.P, x)
        gq = Px @ x + self.qq @ x + self.rq
        return np.concatenate([gq, self.A @ x + self.b]), Px

    def derivatives(self, x):
        g, Px = self.values(x)
        grads = np.vstack([2 * Px + self.qq, self.A])
        return g, grads

    def max_step(self, x, g, grads, dx) -> float:
        """Largest step keeping every constraint strictly negative."""
        d1 = grads @ dx
        d2 = np.concatenate([np.einsum("j,ijk,k->i", dx, self.P, dx), np.zeros(self.A.shape[0])])
        neg = -g
        steps = np.full(self.m, np.inf)
        quad = d2 > 0
        disc = np.sqrt(np.maximum(d1 * d1 + 4 * d2 * neg, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            pos = quad & (d1 >= 0)
            steps[pos] = 2 * neg[pos] / (d1[pos] + disc[pos])
            negd = quad & (d1 < 0)
            steps[negd] = (-d1[negd] + disc[negd]) / (2 * d2[negd])
            lin = ~quad & (d1 > 0)
            steps[lin] = neg[lin] / d1[lin]
        return float(np.min(steps, initial=np.inf))


def _newton_dir(H, rhs):
    ridge = 0.0
    scale = max(float(np.max(np.abs(np.diag(H)))), 1e-300)
    for _ in range(12):
        try:
            c = cho_factor(H + ridge * np.eye(H.shape[0]), lower=True, check_finite=False)
            return cho_solve(c, rhs, check_finite=False)
        except LinAlgError:
            ridge = scale * 1e-14 if ridge == 0 else ridge * 100
    raise LinAlgError("KKT system could not be factored")


def _primal_dual(x, f_quad, f_lin, cons: _Stacked, tol, dual_tol=1e-9, early_exit=None,
                 max_iter=200, mu=10.0):
    """Primal-dual interior-point iterations from a strictly feasible ``x``.

    Maximizes the normalized objective ``x^T f_quad x + f_lin^T x``. Returns
    ``(x, converged, iterations)``.
    """
    m = cons.P.shape[0]
    g, grads = cons.derivatives(x)
    # start well inside the central path; a small initial multiplier stalls
    # the first steps against the nearest constraint
    lam = 10.0 / np.maximum(-g, 1e-12)

    def residual(x, lam, g, grads, t):
        r_dual = -(2 * f_quad @ x + f_lin) + grads.T @ lam
        r_cent = -lam * g - 1.0 / t
        return r_dual, r_cent

    for it in range(max_iter):
        gap = float(-g @ lam)
        r_dual, _ = residual(x, lam, g, grads, 1.0)
        if gap <= tol * max(1.0, abs(x @ f_quad @ x + f_lin @ x)) and np.linalg.norm(r_dual) <= dual_tol:
            return x, True, it
        t = mu * cons.m / gap
        r_dual, r_cent = residual(x, lam, g, grads, t)
        w = lam / (-g)
        H = -2 * f_quad + (grads.T * w) @ grads
        if m:
            H += 2 * np.einsum("i,ijk->jk", lam[:m], cons.P)
        rhs = (2 * f_quad @ x + f_lin) - grads.T @ (1.0 / (t * (-g)))
        dx = _newton_dir(H, rhs)
        dlam = (r_cent - lam * (grads @ dx)) / g

        neg = dlam < 0
        s = min(1.0, 0.99 * float(np.min(-lam[neg] / dlam[neg], initial=np.inf)))
        s = min(s, 0.99 * cons.max_step(x, g, grads, dx))
        res0 = np.sqrt(r_dual @ r_dual + r_cent @ r_cent)
        while s > 1e-14:
            xn, ln = x + s * dx, lam + s * dlam
            gn, gradn = cons.derivatives(xn)
            if np.all(gn < 0):
                rd, rc = residual(xn, ln, gn, gradn, t)
                if np.sqrt(rd @ rd + rc @ rc) <= (1 - 0.01 * s) * res0:
                    break
            s *= 0.5
        else:
            return x, False, it
        x, lam, g, grads = xn, ln, gn, gradn
        if early_exit is not None and early_exit(x):
            return x, True, it + 1
    return x, False, max_iter


def _phase1(x0, cons: _Stacked):
    """Strictly feasible point near ``x0``, or ``None`` if none exists."""
    g, _ = cons.values(x0)
    if np.all(g < -INTERIOR):
        return x0, 0
    n = x0.size
    # variables (x, s): constraints g_i(x) - s <= 0 and -s - 1 <= 0
    ext = _Stacked.__new__(_Stacked)
    ext.P = np.zeros((cons.P.shape[0], n + 1, n + 1))
    ext.P[:, :n, :n] = cons.P
    ext.qq = np.hstack([cons.qq, -np.ones((cons.P.shape[0], 1))])
    ext.rq = cons.rq
    A = np.hstack([cons.A, -np.ones((cons.A.shape[0], 1))])
    bottom = np.zeros((1, n + 1))
    bottom[0, n] = -1.0
    ext.A = np.vstack([A, bottom])
    ext.b = np.concatenate([cons.b, [-1.0]])
    ext.m = cons.m + 1

    s0 = max(float(np.max(g)), 0.0) + 1.0
    y = np.concatenate([x0, [s0]])
    f_lin = np.zeros(n + 1)
    f_lin[n] = -1.0
    y, _, iters = _primal_dual(y, np.zeros((n + 1, n + 1)), f_lin, ext, tol=1e-13,
                               early_exit=lambda yy: yy[-1] < -INTERIOR)
    if y[-1] < 0:
        return y[:n], iters
    return None, iters


def solve(p: ConvexQCQP, tol: float = 1e-9, x0=None, feas_tol: float = 1e-7,
          ) -> SolveReport:
    """Solve ``p`` to relative duality gap ``tol``.

    Deterministic for identical inputs. An infeasible problem returns status
    ``"infeasible"`` with ``x0`` as the solution vector so the caller can keep
    its previous iterate.
    """
    n = p.n
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    cons = _Stacked(p)

    if cons.m == 0:
        try:
            x = np.linalg.solve(-2 * p.obj_quad, p.obj_lin)
        except np.linalg.LinAlgError:
            return SolveReport("max_iter", x0, p.objective(x0), 0.0)
        if not np.allclose(-2 * p.obj_quad @ x, p.obj_lin, atol=1e-12 * max(1.0, np.abs(p.obj_lin).max())):
            return SolveReport("max_iter", x0, p.objective(x0), 0.0)
        return SolveReport("optimal", x, p.objective(x), 0.0)

    x, iters = _phase1(x0, cons)
    if x is None:
        g, _ = cons.values(x0)
        return SolveReport("infeasible", x0, p.objective(x0), float(max(np.max(g), 0.0)), iters)

    fx = p.objective(x)
    grad = 2 * p.obj_quad @ x + p.obj_lin
    scale = max(abs(fx), float(np.linalg.norm(grad)) * (1.0 + float(np.linalg.norm(x))))
    scale = scale if scale > 0 else 1.0
    f_quad, f_lin = p.obj_quad / scale, p.obj_lin / scale

    x, ok, steps = _primal_dual(x, f_quad, f_lin, cons, tol)
    iters += steps
    status = "optimal" if ok else "max_iter"
    g, _ = cons.values(x)
    viol = float(max(np.max(g), 0.0))
    if status == "optimal" and viol > feas_tol:
        status = "max_iter"
    return SolveReport(status, x, p.objective(x), viol, iters)
