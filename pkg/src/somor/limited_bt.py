"""Frequency- and time-limited balanced truncation for second-order systems.

Limited Gramians are computed for the first companion realization
``E = diag(I, M)``; their position and velocity blocks are then combined
according to a balancing formula and the square-root method yields a
Petrov-Galerkin projection that is applied to ``M``, ``D`` and ``K``.
"""
import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla
from scipy.linalg import lapack

from .config import DEFAULTS
from .errors import (BranchCut, DimensionMismatch, InvalidParams, Overflow, RankDeficient,
                     UnstablePencil)
from .linalg import _check_separation, _factor_E, logm_triangular, schur_eigenvalues
from .systems import SecondOrderSystem, companion_form, spectral_abscissa


@dataclass(frozen=True)
class Limit:
    """``kind`` is ``'unlimited'``, ``'frequency'`` (rad/s) or ``'time'`` (s)."""
    kind: str = 'unlimited'
    lo: float = None
    hi: float = None

    def __post_init__(self):
        if self.kind == 'unlimited':
            return
        if self.kind not in ('frequency', 'time'):
            raise InvalidParams(f'unknown limit kind {self.kind!r}')
        lo, hi = self.lo, self.hi
        if lo is None or hi is None or not np.isfinite(hi) or not lo < hi:
            raise InvalidParams(f'{self.kind} interval needs finite lo < hi, got [{lo}, {hi}]')
        if self.kind == 'frequency' and not lo > 0:
            raise InvalidParams('frequency interval needs lo > 0 (principal logarithm)')
        if self.kind == 'time' and lo < 0:
            raise InvalidParams('time interval needs lo >= 0')

    def as_dict(self):
        return {'kind': self.kind, 'lo': self.lo, 'hi': self.hi}


@dataclass
class GramianFactor:
    """Low-rank factor with ``Gramian ~ L L^T``."""
    L: np.ndarray
    side: str
    limit: Limit = field(default_factory=Limit)
    clamped_mass: float = 0.0
    residual: float = 0.0

    @property
    def gramian(self):
        return self.L @ self.L.T


@dataclass(frozen=True)
class BalancingFormula:
    """Gramian blocks used on the right (controllability) and left (observability).

    Selectors: ``'p'`` position block, ``'v'`` velocity block, ``'vm'``
    velocity block weighted as ``M X M^T``, ``'pv'`` sum of both blocks.
    """
    name: str
    right: str
    left: str


FORMULAS = {f.name: f for f in (
    BalancingFormula('p', 'p', 'p'),
    BalancingFormula('pm', 'p', 'vm'),
    BalancingFormula('pv', 'p', 'v'),
    BalancingFormula('vp', 'v', 'p'),
    BalancingFormula('v', 'v', 'v'),
    BalancingFormula('vpm', 'v', 'vm'),
    BalancingFormula('fv', 'vm', 'p'),
    BalancingFormula('so', 'pv', 'pv'),
)}


def get_formula(name):
    if isinstance(name, BalancingFormula):
        return name
    try:
        return FORMULAS[name]
    except KeyError:
        raise InvalidParams(f'unknown balancing formula {name!r}; choose from {sorted(FORMULAS)}') from None


# Gramians --------------------------------------------------------------------

class _PencilSchur:
    """Real Schur form of ``F = A E^{-1}`` shared by all Gramian computations."""

    def __init__(self, ds, tol):
        A, E = np.asarray(ds.A, float), np.asarray(ds.E, float)
        self.A, self.E, self.tol = A, E, tol
        self.lu = _factor_E(E, tol)
        F = spla.lu_solve(self.lu, A.T, trans=1).T
        T, Q = spla.schur(F, output='real')
        self.T, self.Q = T, Q
        ev = schur_eigenvalues(T)
        if ev.size and ev.real.max() >= -tol.unstable_pencil:
            raise UnstablePencil(f'pencil eigenvalue with real part {ev.real.max():.3e}')
        _check_separation(ev, tol.lyap_separation)
        self._cs = None

    @property
    def complex_schur(self):
        if self._cs is None:
            T, Q = spla.rsf2csf(self.T, self.Q)
            self._cs = (Q, T)
        return self._cs

    def func(self, ftri):
        """``f(F)`` for a function evaluated on the complex triangular factor."""
        U, T = self.complex_schur
        return U @ ftri(T) @ U.conj().T

    def solve_P(self, W):
        # A P E^T + E P A^T + W = 0  <=>  F Y + Y F^T + W = 0, Y = E P E^T
        Q, T = self.Q, self.T
        Y, scale, info = lapack.dtrsyl(T, T, -(Q.T @ W @ Q), trana='N', tranb='T')
        Y = Q @ (Y / scale) @ Q.T
        Z = spla.lu_solve(self.lu, Y)
        P = spla.lu_solve(self.lu, Z.T).T
        return (P + P.T) / 2

    def solve_Q(self, W):
        # A^T X E + E^T X A + W = 0  <=>  F^T X + X F + E^-T W E^-1 = 0
        Q, T = self.Q, self.T
        Wt = spla.lu_solve(self.lu, W, trans=1)
        Wt = spla.lu_solve(self.lu, Wt.T, trans=1).T
        Y, scale, info = lapack.dtrsyl(T, T, -(Q.T @ Wt @ Q), trana='T', tranb='N')
        X = Q @ (Y / scale) @ Q.T
        return (X + X.T) / 2

    def E_inv(self, X):
        return spla.lu_solve(self.lu, X)


def _relative_residual(A, E, X, W, dual):
    if dual:
        R = A.T @ X @ E
    else:
        R = A @ X @ E.T
    R = R + R.T + W
    scale = 2 * np.linalg.norm(A) * np.linalg.norm(X) * np.linalg.norm(E) + np.linalg.norm(W)
    return float(np.linalg.norm(R) / scale) if scale > 0 else 0.0


def psd_factor(X, tol=DEFAULTS):
    """Clamp the symmetric matrix `X` to PSD and return ``(L, clamped_mass)`` with ``X ~ L L^T``.

    Eigenvalues below zero are discarded; their total magnitude is returned.
    """
    w, U = np.linalg.eigh((X + X.T) / 2)
    neg = w < 0
    mass = float(-w[neg].sum())
    keep = w > 0
    L = U[:, keep] * np.sqrt(w[keep])
    return L, mass


def _finish(ps, X, W, side, limit, dual, tol):
    res = _relative_residual(ps.A, ps.E, X, W, dual)
    L, mass = psd_factor(X, tol)
    return GramianFactor(L, side, limit, mass, res)


def _rhs_pair(ps, limit, B, C):
    """Right-hand sides ``(W_P, W_Q)`` of the two Lyapunov equations."""
    if limit.kind == 'unlimited':
        return B @ B.T, C.T @ C
    if limit.kind == 'frequency':
        w1, w2 = limit.lo, limit.hi

        def f(T):
            I = np.eye(T.shape[0])
            R = spla.solve_triangular(T + 1j * w1 * I, (T + 1j * w2 * I).T, trans=1).T
            # (T + i w2)(T + i w1)^{-1}; the factors commute
            R = np.triu(R)
            dg = np.diag(R)
            scale = max(1.0, np.abs(dg).max(initial=0.0))
            if np.any((np.abs(dg.imag) <= ps.tol.log_branch_cut * scale) & (dg.real <= 0)):
                raise BranchCut('logarithm argument has an eigenvalue on the negative real axis')
            return (1j / np.pi) * logm_triangular(R)

        LF = ps.func(f)                              # L(F), F = A E^-1
        BO = (LF @ B).real
        # C L(G) with G = E^-1 A = E^-1 F E
        CO = (C @ ps.E_inv(LF) @ ps.E).real
        return BO @ B.T + B @ BO.T, CO.T @ C + C.T @ CO

    t0, tf = limit.lo, limit.hi

    def expF(t):
        if t == 0:
            return None
        with np.errstate(over='ignore', invalid='ignore'):
            X = ps.func(lambda T: spla.expm(T * t))
        if not np.all(np.isfinite(X)):
            raise Overflow('matrix exponential overflowed')
        return X.real

    X0, X1 = expF(t0), expF(tf)
    B0 = B if X0 is None else X0 @ B
    B1 = X1 @ B
    C0 = C if X0 is None else C @ ps.E_inv(X0) @ ps.E
    C1 = C @ ps.E_inv(X1) @ ps.E
    return B0 @ B0.T - B1 @ B1.T, C0.T @ C0 - C1.T @ C1


def limited_gramians(ds, limit=Limit(), tol=DEFAULTS):
    """Controllability and observability Gramian factors of the descriptor system `ds`."""
    ps = _PencilSchur(ds, tol)
    B, C = np.asarray(ds.B, float), np.asarray(ds.C, float)
    WP, WQ = _rhs_pair(ps, limit, B, C)
    P = ps.solve_P(WP)
    Q = ps.solve_Q(WQ)
    return (_finish(ps, P, WP, 'controllability', limit, False, tol),
            _finish(ps, Q, WQ, 'observability', limit, True, tol))


def freq_limited_gramians(ds, w1, w2, tol=DEFAULTS):
    """Frequency-limited Gramian factors on ``[w1, w2]`` (rad/s)."""
    return limited_gramians(ds, Limit('frequency', w1, w2), tol)


def time_limited_gramians(ds, t0, tf, tol=DEFAULTS):
    """Time-limited Gramian factors on ``[t0, tf]``."""
    return limited_gramians(ds, Limit('time', t0, tf), tol)


def so_gramian_blocks(P_factor, Q_factor, n):
    """Factors of the position and velocity diagonal blocks.

    Returns a dict with keys ``P_p, P_v, Q_p, Q_v``, each an ``n x k`` factor.
    """
    out = {}
    for nm, fac in (('P', P_factor), ('Q', Q_factor)):
        L = fac.L if isinstance(fac, GramianFactor) else np.asarray(fac)
        if L.shape[0] != 2 * n:
            raise DimensionMismatch(f'{nm} factor has {L.shape[0]} rows, expected {2 * n}')
        out[nm + '_p'], out[nm + '_v'] = L[:n], L[n:]
    return out


def _select(blocks, side, sel, M):
    p, v = blocks[side + '_p'], blocks[side + '_v']
    if sel == 'p':
        return p
    if sel == 'v':
        return v
    if sel == 'vm':
        return M @ v
    if sel == 'pv':
        return np.hstack([p, v])
    raise InvalidParams(f'unknown block selector {sel!r}')


def balanced_projection(left_factor, right_factor, r, tol=DEFAULTS):
    """Square-root balancing.

    With ``L_q^T L_p = Y S Z^T`` returns ``V = L_p Z_r S_r^{-1/2}``,
    ``W = L_q Y_r S_r^{-1/2}`` and all singular values ``S``.

    Raises
    ------
    RankDeficient
        If ``S_r / S_1 < 1e-14`` or fewer than `r` singular values exist.
    """
    Lq, Lp = np.atleast_2d(left_factor), np.atleast_2d(right_factor)
    Y, s, Zt = np.linalg.svd(Lq.T @ Lp, full_matrices=False)
    if r > s.size or s.size == 0 or s[0] == 0 or s[r - 1] / s[0] < tol.rank_deficient:
        raise RankDeficient(f'cannot balance to order {r}: too few nonzero characteristic values')
    sr = 1.0 / np.sqrt(s[:r])
    V = Lp @ Zt[:r].T * sr
    W = Lq @ Y[:, :r] * sr
    return V, W, s


def reduce_from_blocks(sos, blocks, formula, r, tol=DEFAULTS):
    """Projected ROM for one formula given precomputed Gramian block factors."""
    f = get_formula(formula)
    Lp = _select(blocks, 'P', f.right, sos.M)
    Lq = _select(blocks, 'Q', f.left, sos.M)
    V, W, s = balanced_projection(Lq, Lp, r, tol)
    rom = SecondOrderSystem(W.T @ sos.M @ V, W.T @ sos.D @ V, W.T @ sos.K @ V, W.T @ sos.B,
                            Cp=sos.Cp @ V, Cv=sos.Cv @ V)
    abscissa = spectral_abscissa(rom)
    rom.meta = {'method': 'limited-bt', 'formula': f.name, 'r': int(r),
                'stable': bool(abscissa < 0), 'spectral_abscissa': abscissa}
    return rom, s


def limited_bt_reduce(sos, limit, formula, r, tol=DEFAULTS):
    """Second-order limited balanced truncation.

    Returns ``(rom, charvals)``. ROM stability is reported in
    ``rom.meta['stable']``, never raised.
    """
    limit = limit if isinstance(limit, Limit) else Limit(**limit)
    P, Q = limited_gramians(companion_form(sos), limit, tol)
    blocks = so_gramian_blocks(P, Q, sos.n)
    rom, s = reduce_from_blocks(sos, blocks, formula, r, tol)
    rom.meta['limit'] = limit.as_dict()
    rom.meta['clamped_mass'] = [P.clamped_mass, Q.clamped_mass]
    return rom, s


def limited_bt_all(sos, limit, r, formulas=tuple(FORMULAS), tol=DEFAULTS):
    """Run several formulas on shared Gramians; returns ``{name: (rom, charvals)}``."""
    limit = limit if isinstance(limit, Limit) else Limit(**limit)
    P, Q = limited_gramians(companion_form(sos), limit, tol)
    blocks = so_gramian_blocks(P, Q, sos.n)
    out = {}
    for name in formulas:
        rom, s = reduce_from_blocks(sos, blocks, name, r, tol)
        rom.meta['limit'] = limit.as_dict()
        out[get_formula(name).name] = (rom, s)
    return out


def write_charvals_csv(path, results):
    """``results`` maps formula name to characteristic values."""
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(['index', 'sigma', 'formula'])
        for name, s in results.items():
            for i, v in enumerate(s, start=1):
                w.writerow([i, '%.17g' % v, name])
