"""Second-order and descriptor system containers, realizations and frequency-domain tools."""
import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla
from scipy.optimize import minimize_scalar

from .config import DEFAULTS
from .errors import (DimensionMismatch, NonConvergence, NotColocated, NotPD,
                     SingularAtS)


def _mat(X, rows=None, cols=None):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if rows is not None and cols is not None and X.size == 0:
        X = X.reshape(rows, cols)
    return X


def _rel_sym_err(X):
    nrm = np.linalg.norm(X)
    return 0.0 if nrm == 0 else np.linalg.norm(X - X.T) / nrm


@dataclass
class SecondOrderSystem:
    """``M q'' + D q' + K q = B u``, ``y = Cp q + Cv q'``.

    ``B`` is the input matrix (often written ``B_u``). Output matrices default
    to zero when omitted.
    """
    M: np.ndarray
    D: np.ndarray
    K: np.ndarray
    B: np.ndarray
    Cp: np.ndarray = None
    Cv: np.ndarray = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.M, self.D, self.K = _mat(self.M), _mat(self.D), _mat(self.K)
        n = self.M.shape[0]
        self.B = _mat(self.B).reshape(n, -1) if np.size(self.B) else np.zeros((n, 0))
        p = None
        for nm in ('Cp', 'Cv'):
            if getattr(self, nm) is not None:
                p = np.atleast_2d(np.asarray(getattr(self, nm))).shape[0]
        p = p if p is not None else 0
        self.Cp = np.zeros((p, n)) if self.Cp is None else _mat(self.Cp).reshape(-1, n)
        self.Cv = np.zeros((p, n)) if self.Cv is None else _mat(self.Cv).reshape(-1, n)
        for nm in ('M', 'D', 'K'):
            if getattr(self, nm).shape != (n, n):
                raise DimensionMismatch(f'{nm} has shape {getattr(self, nm).shape}, expected {(n, n)}')
        if self.Cp.shape != self.Cv.shape:
            raise DimensionMismatch('Cp and Cv must have equal shapes')

    @property
    def n(self):
        return self.M.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.Cp.shape[0]

    @property
    def symmetric_MDK(self):
        tol = DEFAULTS.symmetry
        return all(_rel_sym_err(X) <= tol for X in (self.M, self.D, self.K))

    @property
    def colocated(self):
        return (self.Cv.shape == self.B.T.shape and np.array_equal(self.Cv, self.B.T)
                and not np.any(self.Cp))

    @property
    def positions_only(self):
        return not np.any(self.Cv)

    def pencil(self, s):
        return s * s * self.M + s * self.D + self.K

    def copy(self, **changes):
        kw = dict(M=self.M, D=self.D, K=self.K, B=self.B, Cp=self.Cp, Cv=self.Cv,
                  meta=dict(self.meta))
        kw.update(changes)
        return SecondOrderSystem(**kw)


@dataclass
class DescriptorSystem:
    """``E x' = A x + B u``, ``y = C x``.

    ``blocks`` optionally lists ``(offset, SecondOrderSystem)`` pairs when the
    realization is a block diagonal of first companion forms; resolvent solves
    then reduce to ``n x n`` quadratic-pencil solves.
    """
    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    blocks: list = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A))
        N = self.A.shape[0]
        self.E = np.eye(N) if self.E is None else np.atleast_2d(np.asarray(self.E))
        self.B = np.asarray(self.B).reshape(N, -1)
        self.C = np.asarray(self.C).reshape(-1, N)
        if self.E.shape != (N, N) or self.A.shape != (N, N):
            raise DimensionMismatch('E and A must be square of equal size')

    @property
    def order(self):
        return self.A.shape[0]

    def solve(self, s, rhs):
        """``(sE - A)^{-1} rhs``."""
        if self.blocks is None:
            return _lu_solve(s * self.E - self.A, rhs, s)
        out = np.zeros(rhs.shape, dtype=complex)
        for off, so in self.blocks:
            n = so.n
            r1, r2 = rhs[off:off + n], rhs[off + n:off + 2 * n]
            x1 = _lu_solve(so.pencil(s), r2 + (s * so.M + so.D) @ r1, s)
            out[off:off + n] = x1
            out[off + n:off + 2 * n] = s * x1 - r1
        return out

    def solve_adjoint(self, s, rhs):
        """``(sE - A)^{-H} rhs``."""
        if self.blocks is None:
            return _lu_solve((s * self.E - self.A).conj().T, rhs, s)
        z = np.conj(s)
        out = np.zeros(rhs.shape, dtype=complex)
        for off, so in self.blocks:
            n = so.n
            r1, r2 = rhs[off:off + n], rhs[off + n:off + 2 * n]
            y2 = _lu_solve(z * z * so.M.T + z * so.D.T + so.K.T, r1 + z * r2, s)
            out[off + n:off + 2 * n] = y2
            out[off:off + n] = (z * so.M.T + so.D.T) @ y2 - r2
        return out


def _lu_solve(Q, rhs, s):
    try:
        lu = spla.lu_factor(Q, check_finite=False)
    except (ValueError, spla.LinAlgError) as exc:
        raise SingularAtS(f'pencil solve failed at s={s}') from exc
    d = np.abs(np.diag(lu[0]))
    if d.size and (d.min() == 0 or d.min() <= 1e-15 * d.max()):
        raise SingularAtS(f'pencil is singular at s={s}')
    return spla.lu_solve(lu, rhs, check_finite=False)


@dataclass
class FrequencyResponse:
    grid: np.ndarray
    values: np.ndarray
    gains: np.ndarray = None


def companion_form(sos):
    """First companion realization with ``E = diag(I, M)``."""
    n = sos.n
    I, Z = np.eye(n), np.zeros((n, n))
    E = np.block([[I, Z], [Z, sos.M]])
    A = np.block([[Z, I], [-sos.K, -sos.D]])
    B = np.vstack([np.zeros((n, sos.m)), sos.B])
    C = np.hstack([sos.Cp, sos.Cv])
    return DescriptorSystem(E, A, B, C, blocks=[(0, sos)])


def symmetric_form(sos):
    """Sign-symmetric first-order form of a co-located velocity-output system.

    With ``K = G G^T`` and ``M = L L^T`` the realization is
    ``A = [[0, G^T L^-T], [-L^-1 G, -L^-1 D L^-T]]``, ``B = [0; L^-1 B_u]``,
    ``C = B^T``; it satisfies ``A S = S A^T`` for ``S = diag(-I, I)``.
    """
    if not sos.colocated:
        raise NotColocated('symmetric form requires Cv = B^T and Cp = 0')
    try:
        L = np.linalg.cholesky(sos.M)
        G = np.linalg.cholesky(sos.K)
    except np.linalg.LinAlgError as exc:
        raise NotPD('M and K must be positive definite') from exc
    n = sos.n
    LiG = spla.solve_triangular(L, G, lower=True)
    LiD = spla.solve_triangular(L, sos.D, lower=True)
    LiDLt = spla.solve_triangular(L, LiD.T, lower=True).T
    LiB = spla.solve_triangular(L, sos.B, lower=True)
    A = np.block([[np.zeros((n, n)), LiG.T], [-LiG, -(LiDLt + LiDLt.T) / 2]])
    B = np.vstack([np.zeros((n, sos.m)), LiB])
    return DescriptorSystem(np.eye(2 * n), A, B, B.T.copy())


def signature(n):
    """Diagonal of ``S_n = diag(-I_n, I_n)``."""
    return np.r_[-np.ones(n), np.ones(n)]


def eval_transfer(sys, s):
    """Transfer matrix at the complex point `s`."""
    if isinstance(sys, SecondOrderSystem):
        X = _lu_solve(sys.pencil(s), sys.B.astype(complex), s)
        return (sys.Cp + s * sys.Cv) @ X
    return sys.C @ sys.solve(s, sys.B.astype(complex))


def eval_transfer_derivative(sys, s):
    """``dH/ds`` at `s`."""
    if isinstance(sys, SecondOrderSystem):
        Q = sys.pencil(s)
        X = _lu_solve(Q, sys.B.astype(complex), s)
        Y = _lu_solve(Q, (2 * s * sys.M + sys.D) @ X, s)
        return sys.Cv @ X - (sys.Cp + s * sys.Cv) @ Y
    X = sys.solve(s, sys.B.astype(complex))
    return -sys.C @ sys.solve(s, sys.E @ X)


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float).ravel()
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValueError('frequency grid must be nonnegative and strictly ascending')
    return grid


def sigma_sweep(sys, grid):
    """Largest singular value of ``H(i w)`` on `grid`."""
    grid = _check_grid(grid)
    gains = np.array([eval_transfer(sys, 1j * w) for w in grid])
    values = np.array([np.linalg.norm(G, 2) if G.size else 0.0 for G in gains])
    return FrequencyResponse(grid, values, gains)


def error_sweep(full, rom, grid):
    """Pointwise absolute and relative spectral-norm errors.

    `full` and `rom` are systems or precomputed :class:`FrequencyResponse`
    objects on the same grid.
    """
    grid = _check_grid(grid)
    fr = full if isinstance(full, FrequencyResponse) else sigma_sweep(full, grid)
    rr = rom if isinstance(rom, FrequencyResponse) else sigma_sweep(rom, grid)
    diff = np.array([np.linalg.norm(a - b, 2) for a, b in zip(fr.gains, rr.gains)])
    with np.errstate(divide='ignore', invalid='ignore'):
        rel = np.where(fr.values > 0, diff / fr.values, np.where(diff > 0, np.inf, 0.0))
    return FrequencyResponse(grid, diff), FrequencyResponse(grid, rel)


def write_response_csv(path, grid, sigma, abs_err=None, rel_err=None):
    """CSV with columns ``omega,sigma_max[,abs_err,rel_err]`` at 17 significant digits."""
    cols = [('omega', grid), ('sigma_max', sigma)]
    if abs_err is not None:
        cols.append(('abs_err', abs_err))
    if rel_err is not None:
        cols.append(('rel_err', rel_err))
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow([c[0] for c in cols])
        for row in zip(*(c[1] for c in cols)):
            w.writerow(['%.17g' % v for v in row])


def read_response_csv(path):
    with open(path, newline='') as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return {h: data[:, i] for i, h in enumerate(header)}


def _standard_form(sys):
    if isinstance(sys, SecondOrderSystem):
        sys = companion_form(sys)
    E, A, B, C = (np.asarray(X) for X in (sys.E, sys.A, sys.B, sys.C))
    if A.shape[0] == 0:
        return A, B, C
    if not np.allclose(E, np.eye(E.shape[0]), rtol=0, atol=0):
        lu = spla.lu_factor(E)
        A, B = spla.lu_solve(lu, A), spla.lu_solve(lu, B)
    return A, B, C


def _sigma(A, B, C, w):
    G = C @ np.linalg.solve(1j * w * np.eye(A.shape[0]) - A, B)
    return np.linalg.norm(G, 2)


def linf_norm_dense(sys, tol=DEFAULTS):
    """L-infinity norm over the extended imaginary axis by level-set bisection.

    Implements the Boyd-Balakrishnan / Bruinsma-Steinbuch iteration: the
    Hamiltonian ``[[A, B B^T / g], [-C^T C / g, -A^T]]`` has imaginary
    eigenvalues exactly at frequencies where some singular value equals ``g``.

    Returns
    -------
    norm
        The L-infinity norm (``inf`` for poles on the imaginary axis).
    omega
        A frequency where it is attained.
    """
    A, B, C = _standard_form(sys)
    N = A.shape[0]
    if N > tol.dense_linf_max_order:
        raise ValueError(f'order {N} exceeds the dense threshold {tol.dense_linf_max_order}')
    if N == 0 or not np.any(B) or not np.any(C):
        return 0.0, 0.0
    cplx = np.iscomplexobj(A) or np.iscomplexobj(B) or np.iscomplexobj(C)
    poles = np.linalg.eigvals(A)
    axis = np.abs(poles.real) <= 1e-13 * np.maximum(1.0, np.abs(poles))
    if np.any(axis):
        return np.inf, float(abs(poles[axis][0].imag))

    def sig(w):
        try:
            return _sigma(A, B, C, w)
        except np.linalg.LinAlgError:
            return np.inf

    # starting lower bound: DC gain plus the most resonant poles
    ratio = np.abs(poles.imag) / np.abs(poles.real)
    order = np.argsort(-ratio, kind='stable')[:20]
    cands = [0.0] + [abs(poles[i]) for i in order] + [abs(poles[i].imag) for i in order]
    if cplx:
        cands += [-c for c in cands[1:]]
    vals = [sig(w) for w in cands]
    k = int(np.argmax(vals))
    g_lb, w_best = vals[k], cands[k]
    BBt, CtC = B @ B.conj().T, C.conj().T @ C
    for _ in range(tol.linf_max_iter):
        g = (1 + 2 * tol.linf_rel_tol) * g_lb
        H = np.block([[A, BBt / g], [-CtC / g, -A.conj().T]])
        ev = np.linalg.eigvals(H)
        on = np.abs(ev.real) <= 1e-8 * np.maximum(1.0, np.abs(ev))
        ws = np.sort(ev[on].imag)
        if not cplx:
            ws = ws[ws >= 0]
        if ws.size == 0:
            break
        ws = np.unique(np.r_[0.0, ws] if not cplx else ws)
        mids = (ws[:-1] + ws[1:]) / 2 if ws.size > 1 else ws
        mv = [sig(w) for w in mids]
        j = int(np.argmax(mv))
        if mv[j] <= g_lb:
            break
        g_lb, w_best = mv[j], mids[j]
    else:
        raise NonConvergence('level-set iteration did not converge')
    # local polish of the peak location
    lo, hi = w_best * (1 - 1e-3) - 1e-12, w_best * (1 + 1e-3) + 1e-12
    if not cplx:
        lo = max(lo, 0.0)
    res = minimize_scalar(lambda w: -sig(w), bounds=(lo, hi), method='bounded',
                          options={'xatol': 1e-14 * max(1.0, abs(w_best))})
    if res.success and -res.fun > g_lb:
        g_lb, w_best = -res.fun, float(res.x)
    return float(g_lb), float(abs(w_best) if not cplx else w_best)


def passivity_margin(sys, grid):
    """Minimum over `grid` of the smallest eigenvalue of ``H(iw) + H(iw)^H``.

    Returns ``(margin, worst_frequency)``.
    """
    grid = _check_grid(grid)
    mins = []
    for w in grid:
        G = eval_transfer(sys, 1j * w)
        if G.shape[0] != G.shape[1]:
            raise DimensionMismatch('passivity requires a square transfer function')
        mins.append(np.linalg.eigvalsh(G + G.conj().T)[0])
    k = int(np.argmin(mins))
    return float(mins[k]), float(grid[k])


def is_stable_sos(sos, tol=0.0):
    """All quadratic-pencil eigenvalues strictly in the open left half-plane."""
    return spectral_abscissa(sos) < -tol


def spectral_abscissa(sos):
    ds = companion_form(sos)
    ev = spla.eigvals(ds.A, ds.E)
    ev = ev[np.isfinite(ev)]
    return float(ev.real.max()) if ev.size else -np.inf
