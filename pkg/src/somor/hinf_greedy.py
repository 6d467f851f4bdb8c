"""Greedy H-infinity interpolation for symmetric co-located second-order systems.

The reduced model is a one-sided Galerkin projection with a real basis
collected from pencil solves ``(s^2 M + s D + K)^{-1} B_u`` at interpolation
points on the imaginary axis. Each new point is the frequency where the
current error ``H - H_j`` peaks, found with a subspace-accelerated
L-infinity norm method whose inner problems are solved densely.
"""
import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla
from scipy.optimize import nnls

from .config import DEFAULTS
from .errors import (InvalidParams, NotColocated, RankDeficientBasis, SingularAtPoint,
                     SingularAtS, StagnationWithoutConvergence, ToleranceNotReached)
from .systems import (DescriptorSystem, SecondOrderSystem, companion_form, eval_transfer,
                      linf_norm_dense, spectral_abscissa)


@dataclass
class InterpolationData:
    """Interpolation points, optional tangential directions and the orthonormal basis."""
    points: list
    directions: list = None
    V: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def to_json(self):
        out = {'points': [[float(np.real(s)), float(np.imag(s))] for s in self.points],
               'directions': None}
        if self.directions is not None:
            out['directions'] = [[[float(z.real), float(z.imag)] for z in np.atleast_1d(b)]
                                 for b in self.directions]
        return out

    @classmethod
    def from_json(cls, obj):
        pts = [complex(re, im) for re, im in obj['points']]
        dirs = obj.get('directions')
        if dirs is not None:
            dirs = [np.array([complex(re, im) for re, im in b]) for b in dirs]
        return cls(pts, dirs)


@dataclass
class GreedyTrace:
    """One record per greedy step: new point, resulting error and ROM order."""
    records: list = field(default_factory=list)
    reached: bool = False

    def append(self, **rec):
        self.records.append(rec)


@dataclass
class LinfResult:
    """L-infinity norm estimate; unpacks as ``(norm, omega, iterations)``."""
    norm: float
    omega: float
    iterations: int
    converged: bool = True

    def __iter__(self):
        return iter((self.norm, self.omega, self.iterations))

    def __getitem__(self, k):
        return (self.norm, self.omega, self.iterations)[k]


# bases and projection ----------------------------------------------------------

def extend_basis(Q, Z, rtol=1e-10):
    """Append the part of ``span(Z)`` not yet in ``span(Q)`` as orthonormal columns.

    Columns of `Z` are normalized first; directions whose residual after two
    rounds of Gram-Schmidt is below `rtol` are dropped.
    """
    Z = np.asarray(Z, dtype=float).reshape(Q.shape[0], -1)
    nrm = np.linalg.norm(Z, axis=0)
    Z = Z[:, nrm > 0] / nrm[nrm > 0]
    if Z.shape[1] == 0:
        return Q
    for _ in range(2):
        Z = Z - Q @ (Q.T @ Z)
    U, s, _ = np.linalg.svd(Z, full_matrices=False)
    return np.hstack([Q, U[:, s > rtol]])


def _real_split(X, s):
    X = np.atleast_2d(X)
    if np.isreal(s) and not np.iscomplexobj(X):
        return [X]
    if np.isreal(s) and not np.any(X.imag):
        return [X.real]
    return [X.real, X.imag]


def galerkin_rom(sos, V):
    """One-sided projection ``(V^T M V, V^T D V, V^T K V, V^T B, C_p V, C_v V)``.

    Symmetric positive definite ``M, D, K`` stay so for any full-rank real
    `V`, hence the ROM is asymptotically stable.

    Raises
    ------
    RankDeficientBasis
    """
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or V.shape[0] != sos.n or V.shape[1] == 0:
        raise RankDeficientBasis(f'basis must be {sos.n} x r with r >= 1')
    s = spla.svdvals(V)
    if s[-1] <= 1e-12 * s[0]:
        raise RankDeficientBasis(f'basis is rank deficient (sigma_min / sigma_max = {s[-1] / s[0]:.1e})')

    def cong(X):
        Y = V.T @ X @ V
        return (Y + Y.T) / 2

    return SecondOrderSystem(cong(sos.M), cong(sos.D), cong(sos.K), V.T @ sos.B,
                             Cp=sos.Cp @ V, Cv=sos.Cv @ V, meta={'method': 'galerkin', 'r': V.shape[1]})


def _pencil_solve(sos, s, rhs):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter('error', spla.LinAlgWarning)
            return spla.solve(sos.pencil(s), rhs.astype(complex))
    except (spla.LinAlgError, spla.LinAlgWarning, ValueError) as exc:
        raise SingularAtPoint(f'{s} is (numerically) an eigenvalue of the quadratic pencil') from exc


def _is_real_up_to_phase(b):
    b = np.atleast_1d(np.asarray(b, dtype=complex))
    k = int(np.argmax(np.abs(b)))
    if b[k] == 0:
        return True
    c = b * np.exp(-1j * np.angle(b[k]))
    return bool(np.abs(c.imag).max() <= 1e-12 * np.abs(c).max())


def _point_blocks(sos, s, b=None):
    """Complex solution blocks whose real and imaginary parts span the point's columns.

    Without a direction the block is ``Q(s)^{-1} B``. With a direction ``b``
    it is ``Q(s)^{-1} B b`` and, unless ``b`` is real up to a phase, also
    ``Q(conj(s))^{-1} B b``, the left tangential vector of a symmetric system.
    """
    rhs = sos.B if b is None else sos.B @ np.atleast_1d(b)[:, None]
    blocks = [(s, _pencil_solve(sos, s, rhs))]
    if b is not None and not _is_real_up_to_phase(b) and np.iscomplex(s):
        blocks.append((np.conj(s), _pencil_solve(sos, np.conj(s), rhs)))
    return blocks


def tangential_basis(sos, points, directions=None, rtol=1e-10):
    """Real orthonormal basis for (tangential) Hermite interpolation at `points`.

    The basis spans the real and imaginary parts of
    ``(s_k^2 M + s_k D + K)^{-1} B_u b_k`` (all of ``B_u`` when `directions`
    is None). For a direction that is not real up to a phase the left
    vector ``(conj(s_k)^2 M + conj(s_k) D + K)^{-1} B_u b_k`` is added, which
    the two-sided tangential conditions require of a one-sided projection.

    Raises
    ------
    SingularAtPoint
    """
    V = np.zeros((sos.n, 0))
    for k, s in enumerate(points):
        b = None if directions is None else directions[k]
        for z, X in _point_blocks(sos, s, b):
            V = extend_basis(V, np.hstack(_real_split(X, z)), rtol)
    return V


# error system and norms -------------------------------------------------------

def error_system(sos, rom):
    """Realization of ``H - H_rom`` as a block diagonal of two companion forms."""
    f, g = companion_form(sos), companion_form(rom)
    E = spla.block_diag(f.E, g.E)
    A = spla.block_diag(f.A, g.A)
    B = np.vstack([f.B, g.B])
    C = np.hstack([f.C, -g.C])
    return DescriptorSystem(E, A, B, C, blocks=[(0, sos), (2 * sos.n, rom)])


def linf_norm_subspace(ds, tol=DEFAULTS, omegas=None, raise_on_stagnation=False):
    """L-infinity norm by subspace-projected level-set iterations.

    Each outer iteration adds, for every new frequency ``w``, the real and
    imaginary parts of ``(i w E - A)^{-1} B`` and ``(i w E - A)^{-H} C^H`` to
    a single orthonormal basis ``V`` and takes the dense L-infinity norm of
    the Galerkin pencil ``(V^T E V, V^T A V, V^T B, C V)``. Putting right and
    left vectors in one basis gives Hermite interpolation of ``H`` at every
    frequency for any numbers of inputs and outputs and keeps the reduced
    pencil square. The argmax of the reduced problem is the next frequency.

    Parameters
    ----------
    omegas
        Starting frequencies. The default is ``0`` plus nine logarithmically
        spaced frequencies on ``[1e-4 rho, rho]`` with
        ``rho = ||A||_1 / ||E||_1``; a single start tends to lock onto the
        first local maximum.
    raise_on_stagnation
        Raise :class:`StagnationWithoutConvergence` instead of returning an
        unconverged estimate.

    Returns
    -------
    LinfResult
        Best lower bound found, its frequency, the number of outer iterations.
    """
    B, C = np.asarray(ds.B), np.asarray(ds.C)
    E, A = np.asarray(ds.E), np.asarray(ds.A)
    if not np.any(B) or not np.any(C):
        return LinfResult(0.0, 0.0, 0, True)
    if omegas is None:
        rho = np.linalg.norm(A, 1) / max(np.linalg.norm(E, 1), 1e-300)
        omegas = np.r_[0.0, rho * np.logspace(-4, 0, 9)]
    pts = sorted({float(abs(w)) for w in omegas})
    Q = np.zeros((ds.order, 0))
    used, best, prev = [], (-1.0, 0.0), None
    converged = False
    it = 0
    for it in range(1, tol.subspace_max_iter + 1):
        cols = []
        for w in pts:
            if not np.isfinite(w) or any(abs(w - u) <= 1e-13 * max(1.0, u) for u in used):
                continue
            s = 1j * w
            X = ds.solve(s, B.astype(complex))
            Y = ds.solve_adjoint(s, C.conj().T.astype(complex))
            val = np.linalg.norm(C @ X, 2)
            if val > best[0]:
                best = (val, w)
            cols += _real_split(X, w if w else 0.0) + _real_split(Y, w if w else 0.0)
            used.append(w)
        if not cols:
            converged = True
            break
        Q = extend_basis(Q, np.hstack(cols), rtol=1e-12)
        red = DescriptorSystem(Q.T @ E @ Q, Q.T @ A @ Q, Q.T @ B, C @ Q)
        g, w = linf_norm_dense(red, tol)
        if prev is not None and abs(g - prev) <= tol.subspace_tol * max(abs(g), 1e-300):
            pts = [w]
            converged = True
            break
        prev, pts = g, [w]
    # the final candidate is checked against the full transfer function
    for w in pts:
        if np.isfinite(w) and not any(abs(w - u) <= 1e-13 * max(1.0, u) for u in used):
            val = np.linalg.norm(C @ ds.solve(1j * w, B.astype(complex)), 2)
            if val > best[0]:
                best = (val, w)
    if not converged:
        if raise_on_stagnation:
            raise StagnationWithoutConvergence(
                f'no convergence after {it} iterations (best lower bound {best[0]:.6e})')
        warnings.warn(f'subspace L-infinity iteration stopped after {it} iterations', stacklevel=2)
    return LinfResult(float(best[0]), float(best[1]), it, converged)


def _local_maxima(values, k):
    v = np.asarray(values)
    idx = [i for i in range(v.size)
           if (i == 0 or v[i] >= v[i - 1]) and (i == v.size - 1 or v[i] >= v[i + 1])]
    idx.sort(key=lambda i: -v[i])
    return idx[:k]


class _ErrorEngine:
    """H-infinity error ``||H - H_rom||`` with a cached sweep of the full model."""

    def __init__(self, sos, grid, tol):
        self.sos, self.grid, self.tol = sos, np.asarray(grid, float), tol
        self.H = np.array([eval_transfer(sos, 1j * w) for w in self.grid])
        self.peaks = []

    def sweep_error(self, rom):
        return np.array([np.linalg.norm(h - eval_transfer(rom, 1j * w), 2)
                         for h, w in zip(self.H, self.grid)])

    def __call__(self, rom, extra=()):
        es = error_system(self.sos, rom)
        if es.order <= self.tol.dense_linf_max_order:
            val, w = linf_norm_dense(es, self.tol)
            return val, w
        sweep = self.sweep_error(rom)
        hints = [self.grid[i] for i in _local_maxima(sweep, 3)] + list(extra) + self.peaks[-3:]
        res = linf_norm_subspace(es, self.tol, omegas=hints)
        return res.norm, res.omega


def _default_grid(sos, num):
    w2 = spla.eigvalsh(sos.K, sos.M)
    w2 = w2[w2 > 0]
    lo = np.sqrt(w2.min()) / 10 if w2.size else 1e-3
    hi = np.sqrt(w2.max()) * 10 if w2.size else 1e3
    return np.logspace(np.log10(lo), np.log10(hi), num)


def _check_greedy_system(sos):
    if not sos.symmetric_MDK:
        raise InvalidParams('greedy interpolation needs symmetric M, D, K')
    if np.any(sos.Cv) or sos.Cp.shape != sos.B.T.shape or not np.allclose(sos.Cp, sos.B.T, rtol=0,
                                                                        atol=1e-14 * max(1.0, np.abs(sos.B).max())):
        raise NotColocated('greedy interpolation needs position outputs C_p = B_u^T and C_v = 0')


def hermite_residuals(sos, rom, points):
    """Relative value mismatch ``||H(s) - H_rom(s)|| / ||H(s)||`` at each point."""
    out = []
    for s in points:
        H = eval_transfer(sos, s)
        out.append(float(np.linalg.norm(H - eval_transfer(rom, s), 2) / max(np.linalg.norm(H, 2), 1e-300)))
    return out


def greedy_reduce(sos, error_tol, r_max=None, omega0=None, grid=None, refine=False,
                  refine_budget=None, strict=False, tol=DEFAULTS):
    """Greedy interpolation until ``||H - H_j||_Hinf <= error_tol``.

    Parameters
    ----------
    error_tol
        Absolute H-infinity error target.
    r_max
        Largest admissible ROM order (default ``n``).
    omega0
        First point; default is the argmax of a 50-point logarithmic sweep of
        ``||H(i w)||`` over the range of undamped eigenfrequencies (widened
        by a decade on each side).
    grid
        Frequencies of the cached full-model sweep used to seed the error
        norm computations (default 400 logarithmic points on the same range).
    refine
        Call :func:`refine_interpolation` after every new point.
    strict
        Raise :class:`ToleranceNotReached` instead of warning.

    Returns
    -------
    rom : SecondOrderSystem
    data : InterpolationData
    trace : GreedyTrace
    """
    _check_greedy_system(sos)
    r_max = sos.n if r_max is None else int(r_max)
    if omega0 is None:
        pre = _default_grid(sos, 50)
        omega0 = float(pre[int(np.argmax([np.linalg.norm(eval_transfer(sos, 1j * w), 2) for w in pre]))])
    grid = _default_grid(sos, 400) if grid is None else grid
    engine = _ErrorEngine(sos, grid, tol)
    V = np.zeros((sos.n, 0))
    points, trace = [], GreedyTrace()
    w = float(omega0)
    rom, err = None, np.inf
    for it in range(1, r_max + 1):
        s = 1j * w
        X = _pencil_solve(sos, s, sos.B)
        Vn = extend_basis(V, np.hstack(_real_split(X, s if w else 0.0)))
        if Vn.shape[1] > r_max:
            Vn = Vn[:, :r_max]
        if Vn.shape[1] == V.shape[1]:
            break
        V = Vn
        points.append(s)
        rom = galerkin_rom(sos, V)
        data = InterpolationData(list(points), None, V)
        if refine:
            data = refine_interpolation(sos, data, refine_budget or tol.refine_budget, tol=tol,
                                        engine=engine)
            V, points = data.V, list(data.points)
            rom = galerkin_rom(sos, V)
        err, wmax = engine(rom)
        engine.peaks.append(wmax)
        herm = hermite_residuals(sos, rom, points)
        trace.append(iter=it, omega=w, error=err, order=V.shape[1], next_omega=wmax,
                     stable=bool(spectral_abscissa(rom) < 0), hermite=max(herm))
        if err <= error_tol:
            trace.reached = True
            break
        if V.shape[1] >= r_max:
            break
        w = float(wmax)
    if rom is None:
        raise RankDeficientBasis('no interpolation data could be generated')
    rom.meta.update({'method': 'hinf-greedy', 'error': err, 'error_tol': error_tol,
                     'reached': trace.reached})
    if not trace.reached:
        msg = f'error {err:.3e} above tolerance {error_tol:.1e} at order {V.shape[1]}'
        if strict:
            raise ToleranceNotReached(msg)
        warnings.warn(msg, stacklevel=2)
    return rom, InterpolationData(list(points), None, V), trace


# refinement -----------------------------------------------------------------

class _Parametrization:
    """Maps real parameters (log frequencies, direction coordinates) to a raw basis.

    Points with ``omega = 0`` stay fixed. Directions are only optimized when
    present and ``m > 1``; they are normalized to unit length.
    """

    def __init__(self, sos, data, optimize_directions):
        self.sos = sos
        self.omegas = np.array([float(np.imag(s)) for s in data.points])
        if np.any(np.abs(np.real(data.points)) > 0):
            raise InvalidParams('refinement works with points on the imaginary axis')
        self.dirs = None if data.directions is None else [np.atleast_1d(np.asarray(b, complex)) / np.linalg.norm(b)
                                                          for b in data.directions]
        self.free = np.flatnonzero(self.omegas != 0)
        self.opt_dirs = bool(optimize_directions and self.dirs is not None and sos.m > 1)

    def theta(self):
        th = [np.log(np.abs(self.omegas[self.free]))]
        if self.opt_dirs:
            th += [np.r_[b.real, b.imag] for b in self.dirs]
        return np.concatenate(th)

    def unpack(self, theta):
        k = self.free.size
        om = self.omegas.copy()
        om[self.free] = np.sign(self.omegas[self.free]) * np.exp(theta[:k])
        dirs = self.dirs
        if self.opt_dirs:
            m = self.sos.m
            dirs = []
            for j in range(len(self.dirs)):
                c = theta[k + 2 * m * j: k + 2 * m * (j + 1)]
                b = c[:m] + 1j * c[m:]
                dirs.append(b / np.linalg.norm(b))
        return om, dirs

    def raw_basis(self, theta, with_derivatives=False):
        """Raw real basis ``R`` and, per parameter, a list of ``(column, d column)`` pairs."""
        sos = self.sos
        om, dirs = self.unpack(theta)
        cols, derivs = [], [[] for _ in range(theta.size)]
        k = self.free.size
        m = sos.m
        for idx, w in enumerate(om):
            b = None if dirs is None else dirs[idx]
            s = 1j * w
            rhs = sos.B if b is None else sos.B @ b[:, None]
            signs = [1.0]
            if b is not None and not _is_real_up_to_phase(b) and w != 0:
                signs.append(-1.0)
            for sg in signs:
                z = sg * s
                Qz = sos.pencil(z)
                try:
                    lu = spla.lu_factor(Qz)
                except (spla.LinAlgError, ValueError) as exc:
                    raise SingularAtPoint(f'pencil singular at {z}') from exc
                X = spla.lu_solve(lu, rhs.astype(complex))
                parts = _real_split(X, z if w else 0.0)
                start = sum(c.shape[1] for c in cols)
                cols += parts
                if not with_derivatives:
                    continue
                imag = len(parts) == 2

                def emit(p, dX):
                    dp = [dX.real] + ([dX.imag] if imag else [])
                    for t, d in enumerate(dp):
                        for c in range(d.shape[1]):
                            derivs[p].append((start + t * X.shape[1] + c, d[:, c]))

                if w != 0:
                    p = int(np.searchsorted(self.free, idx))
                    # d/dtheta with theta = log|w|:  dQ/dw = -2 w M + i sg D
                    dQ = -2 * w * sos.M + 1j * sg * sos.D
                    emit(p, -spla.lu_solve(lu, dQ @ X) * w)
                if self.opt_dirs:
                    for q in range(2 * m):
                        e = np.zeros(m, complex)
                        e[q % m] = 1.0 if q < m else 1j
                        db = e - b * np.real(np.vdot(b, e))
                        emit(k + 2 * m * idx + q, spla.lu_solve(lu, (sos.B @ db)[:, None]))
        R = np.hstack(cols)
        return R, derivs


def _rom_from_raw(sos, R):
    Q, Rt = np.linalg.qr(R)
    d = np.abs(np.diag(Rt))
    if d.min() <= 1e-10 * d.max():
        # coalescing columns: the parameters leave the admissible set
        raise SingularAtPoint('interpolation columns are numerically dependent')
    return galerkin_rom(sos, Q), Q


def _danskin_gradient(sos, R, derivs, w, H=None, k=1):
    """Gradients of the top `k` singular values of ``H(iw) - H_R(iw)`` with respect to the parameters."""
    s = 1j * w
    Qs = sos.pencil(s)
    Cs = sos.Cp + s * sos.Cv
    if H is None:
        H = eval_transfer(sos, s)
    Kh = R.T @ Qs @ R
    y = np.linalg.solve(Kh, R.T @ sos.B)
    z = np.linalg.solve(Kh.T, (Cs @ R).T).T
    Hr = Cs @ R @ y
    U, sv, Vh = np.linalg.svd(H - Hr)
    grads = []
    for j in range(min(k, sv.size)):
        u, v = U[:, j], Vh[j].conj()
        a = y @ v
        lvec = u.conj() @ z
        ga = u.conj() @ Cs - Qs.T @ (R @ lvec)
        gl = sos.B @ v - Qs @ (R @ a)
        g = np.zeros(len(derivs))
        for p, items in enumerate(derivs):
            acc = 0j
            for col, d in items:
                acc += a[col] * (ga @ d) + lvec[col] * (gl @ d)
            g[p] = -acc.real
        grads.append(g)
    return sv, grads


def _min_norm_combination(G):
    G = np.atleast_2d(G)
    if G.shape[0] == 1:
        return G[0]
    rho = 1e3 * max(1.0, np.abs(G).max())
    Aug = np.vstack([G.T, rho * np.ones((1, G.shape[0]))])
    lam, _ = nnls(Aug, np.r_[np.zeros(G.shape[1]), rho])
    lam = lam / lam.sum()
    return lam @ G


def refine_interpolation(sos, data, budget=DEFAULTS.refine_budget, optimize_directions=True,
                         tol=DEFAULTS, engine=None, grid=None):
    """Locally minimize the H-infinity error over the interpolation data.

    Gradient descent with Armijo backtracking on ``log omega_k`` (and the
    tangential directions when ``m > 1``), using the analytic gradient of the
    largest error singular value at its peak frequency. When several peaks
    or singular values are nearly active, the minimum-norm element of the
    convex hull of their gradients is used. Only decreasing steps are
    accepted, so the returned error never exceeds the incoming one.

    At the start the analytic gradient is compared with central finite
    differences (step ``1e-5``); the relative mismatch is stored in
    ``meta['gradient_check']``.

    Parameters
    ----------
    budget
        Maximum number of H-infinity error evaluations.

    Returns
    -------
    InterpolationData
        With ``meta`` keys ``error_in``, ``error_out``, ``accepted_steps``,
        ``evaluations``, ``gradient_check``.
    """
    _check_greedy_system(sos)
    if engine is None:
        engine = _ErrorEngine(sos, _default_grid(sos, 200) if grid is None else grid, tol)
    par = _Parametrization(sos, data, optimize_directions)
    theta = par.theta()

    def evaluate(th):
        R, _ = par.raw_basis(th)
        rom, Q = _rom_from_raw(sos, R)
        val, w = engine(rom, extra=peaks[-2:])
        return val, w, Q

    peaks = []
    f, w, Q = evaluate(theta)
    peaks.append(w)
    evals = 1
    f_in, accepted, gcheck = f, 0, None
    best = (f, theta.copy(), Q)
    if theta.size == 0:
        budget = 0
    while evals < budget:
        R, derivs = par.raw_basis(theta, with_derivatives=True)
        # active peaks: current argmax plus recent ones that are nearly as large
        Hcache = {}
        G = []
        for pk in dict.fromkeys([w] + peaks[-3:]):
            Hcache[pk] = eval_transfer(sos, 1j * pk)
            try:
                sv, grads = _danskin_gradient(sos, R, derivs, pk, Hcache[pk], k=2)
            except np.linalg.LinAlgError:
                continue
            if sv[0] >= (1 - 1e-3) * f:
                G.append(grads[0])
                if sv.size > 1 and sv[1] >= (1 - 1e-3) * sv[0]:
                    G.append(grads[1])
        if not G:
            try:
                _, grads = _danskin_gradient(sos, R, derivs, w, Hcache[w], k=1)
            except np.linalg.LinAlgError:
                break
            G = [grads[0]]
        if gcheck is None:
            gcheck = _gradient_check(sos, par, theta, w, G[0], Hcache[w])
        g = _min_norm_combination(np.array(G))
        gn = np.linalg.norm(g)
        if gn == 0 or not np.isfinite(gn):
            break
        step = 0.05 / np.abs(g).max()
        moved = False
        while evals < budget and step * np.abs(g).max() > 1e-10:
            trial = theta - step * g
            try:
                ft, wt, Qt = evaluate(trial)
            except SingularAtPoint:
                ft = np.inf
            evals += 1
            if ft < f - 1e-4 * step * gn * gn:
                theta, f, w, Q = trial, ft, wt, Qt
                peaks.append(w)
                accepted += 1
                moved = True
                break
            step /= 2
        if not moved:
            break
        if f < best[0]:
            best = (f, theta.copy(), Q)
    f, theta, Q = best
    om, dirs = par.unpack(theta)
    pts = [1j * x for x in om]
    if accepted == 0:
        pts, dirs, Q = list(data.points), data.directions, data.V if data.V is not None else Q
    meta = {'error_in': f_in, 'error_out': f, 'accepted_steps': accepted, 'evaluations': evals,
            'gradient_check': gcheck}
    return InterpolationData(pts, dirs, Q, meta)


def _gradient_check(sos, par, theta, w, g, H, h=1e-5):
    """Relative mismatch of the analytic gradient against central differences at fixed ``w``.

    The default step is about ``eps**(1/3)``, which balances truncation and
    rounding error of a central difference in ``log omega``.
    """
    fd = np.zeros_like(theta)
    for p in range(theta.size):
        vals = []
        for sg in (1, -1):
            th = theta.copy()
            th[p] += sg * h
            R, _ = par.raw_basis(th)
            rom, _ = _rom_from_raw(sos, R)
            vals.append(np.linalg.norm(H - eval_transfer(rom, 1j * w), 2))
        fd[p] = (vals[0] - vals[1]) / (2 * h)
    nrm = np.linalg.norm(fd)
    return float(np.linalg.norm(g - fd) / nrm) if nrm > 0 else float(np.linalg.norm(g))


# files ------------------------------------------------------------------------

def write_greedy_trace_csv(path, trace):
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(['iter', 'omega', 'error', 'order'])
        for rec in trace.records:
            w.writerow([rec['iter'], '%.17g' % rec['omega'], '%.17g' % rec['error'], rec['order']])


def write_interp_json(path, data):
    with open(path, 'w') as fh:
        json.dump(data.to_json(), fh, indent=2, sort_keys=True)
        fh.write('\n')
