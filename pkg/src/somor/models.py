"""Benchmark mass-spring-damper generators and Matrix Market / bundle I/O."""
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidParams, ParseError
from .systems import SecondOrderSystem


@dataclass
class TripleChainParams:
    """Three damped chains of ``g`` masses coupled through a common mass ``m0``.

    Defaults are the stiffness, mass and damping values of the published
    triple-chain benchmark.
    """
    g: int = 500
    k0: float = 50.0
    k1: float = 10.0
    k2: float = 20.0
    k3: float = 1.0
    m0: float = 1.0
    m1: float = 1.0
    m2: float = 2.0
    m3: float = 3.0
    alpha: float = 0.002
    beta: float = 0.002
    nu1: float = 5.0
    nu_g1: float = 5.0
    nu_2g1: float = 5.0

    def validate(self):
        if not isinstance(self.g, (int, np.integer)) or self.g < 1:
            raise InvalidParams(f'g must be a positive integer, got {self.g!r}')
        for name in ('k0', 'k1', 'k2', 'k3', 'm0', 'm1', 'm2', 'm3'):
            if not getattr(self, name) > 0:
                raise InvalidParams(f'{name} must be positive, got {getattr(self, name)!r}')
        for name in ('alpha', 'beta', 'nu1', 'nu_g1', 'nu_2g1'):
            if not getattr(self, name) >= 0:
                raise InvalidParams(f'{name} must be nonnegative, got {getattr(self, name)!r}')


@dataclass
class SingleChainParams:
    """A single chain of ``n`` masses, wall spring at mass 1 plus an anchor spring.

    Defaults are stand-ins (unit masses and springs, light Rayleigh damping,
    one wall damper on the first mass); outputs are the positions of the first
    and the last mass.
    """
    n: int = 1200
    mass: float = 1.0
    stiffness: float = 1.0
    anchor: float = 1.0
    alpha: float = 0.002
    beta: float = 0.002
    nu: float = 5.0

    def validate(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise InvalidParams(f'n must be a positive integer, got {self.n!r}')
        for name in ('mass', 'stiffness', 'anchor'):
            if not getattr(self, name) > 0:
                raise InvalidParams(f'{name} must be positive, got {getattr(self, name)!r}')
        for name in ('alpha', 'beta', 'nu'):
            if not getattr(self, name) >= 0:
                raise InvalidParams(f'{name} must be nonnegative, got {getattr(self, name)!r}')


def _spring_chain(g, k):
    return k * (2 * np.eye(g) - np.eye(g, k=1) - np.eye(g, k=-1))


def gen_triple_chain(params=None, **kw):
    """Triple chain oscillator with ``n = 3 g + 1`` masses and co-located velocity output."""
    params = params or TripleChainParams(**kw)
    params.validate()
    g = params.g
    n = 3 * g + 1
    K = np.zeros((n, n))
    for i, ki in enumerate((params.k1, params.k2, params.k3)):
        s = slice(i * g, (i + 1) * g)
        K[s, s] = _spring_chain(g, ki)
        K[(i + 1) * g - 1, n - 1] = K[n - 1, (i + 1) * g - 1] = -ki
    K[n - 1, n - 1] = params.k1 + params.k2 + params.k3 + params.k0
    M = np.diag(np.r_[np.full(g, params.m1), np.full(g, params.m2), np.full(g, params.m3),
                      params.m0])
    D = params.alpha * M + params.beta * K
    for idx, nu in ((0, params.nu1), (g, params.nu_g1), (2 * g, params.nu_2g1)):
        D[idx, idx] += nu
    B = np.ones((n, 1))
    meta = {'generator': 'triple-chain', 'params': asdict(params), 'n': n}
    return SecondOrderSystem(M, D, K, B, Cp=np.zeros((1, n)), Cv=B.T.copy(), meta=meta)


def gen_single_chain(params=None, **kw):
    """Single chain oscillator, force on mass 1, positions of the first and last mass measured."""
    params = params or SingleChainParams(**kw)
    params.validate()
    n = params.n
    K = _spring_chain(n, params.stiffness)
    K[n - 1, n - 1] = params.stiffness
    K[0, 0] += params.anchor
    M = params.mass * np.eye(n)
    D = params.alpha * M + params.beta * K
    D[0, 0] += params.nu
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    Cp = np.zeros((2, n))
    Cp[0, 0] = Cp[1, n - 1] = 1.0
    meta = {'generator': 'single-chain', 'params': asdict(params), 'n': n}
    return SecondOrderSystem(M, D, K, B, Cp=Cp, Cv=np.zeros((2, n)), meta=meta)


# Matrix Market ---------------------------------------------------------------

def _fmt(v):
    return repr(float(v))


def write_matrix_market(A, path, symmetric=False):
    """Write a real dense matrix; ``symmetric=True`` stores the lower triangle in coordinate form."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    rows, cols = A.shape
    with open(path, 'w') as fh:
        if symmetric:
            if rows != cols or not np.array_equal(A, A.T):
                raise DimensionMismatch('symmetric storage needs a symmetric matrix')
            ii, jj = np.nonzero(np.tril(A))
            fh.write('%%MatrixMarket matrix coordinate real symmetric\n')
            fh.write(f'{rows} {cols} {ii.size}\n')
            for i, j in zip(ii, jj):
                fh.write(f'{i + 1} {j + 1} {_fmt(A[i, j])}\n')
        else:
            fh.write('%%MatrixMarket matrix array real general\n')
            fh.write(f'{rows} {cols}\n')
            for v in A.ravel(order='F'):
                fh.write(_fmt(v) + '\n')


def read_matrix_market(path):
    """Read a real ``array`` or ``coordinate`` Matrix Market file into a dense array."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError('empty file', 1)
    head = lines[0].split()
    if len(head) < 5 or head[0].lower() != '%%matrixmarket' or head[1].lower() != 'matrix':
        # bare file without banner: whitespace-separated values, one column
        try:
            vals = [float(x) for ln in lines for x in ln.split()]
        except ValueError as exc:
            raise ParseError(f'invalid header: {lines[0]!r}', 1) from exc
        return np.array(vals).reshape(-1, 1)
    fmt, field_, sym = (h.lower() for h in head[2:5])
    if fmt not in ('array', 'coordinate'):
        raise ParseError(f'unsupported format {fmt!r}', 1)
    if field_ not in ('real', 'integer', 'double'):
        raise ParseError(f'unsupported field {field_!r}', 1)
    if sym not in ('general', 'symmetric'):
        raise ParseError(f'unsupported symmetry {sym!r}', 1)
    body = [(k + 1, ln) for k, ln in enumerate(lines) if k > 0 and ln.strip() and not ln.lstrip().startswith('%')]
    if not body:
        raise ParseError('missing size line', len(lines))
    lineno, size = body[0]
    try:
        dims = [int(x) for x in size.split()]
    except ValueError as exc:
        raise ParseError(f'invalid size line {size!r}', lineno) from exc
    entries = body[1:]
    if fmt == 'array':
        if len(dims) != 2:
            raise ParseError('array size line needs two integers', lineno)
        rows, cols = dims
        A = np.zeros((rows, cols))
        if sym == 'symmetric':
            pos = [(i, j) for j in range(cols) for i in range(j, rows)]
        else:
            pos = [(i, j) for j in range(cols) for i in range(rows)]
        if len(entries) != len(pos):
            raise DimensionMismatch(f'expected {len(pos)} entries, found {len(entries)}')
        for (ln, txt), (i, j) in zip(entries, pos):
            try:
                A[i, j] = float(txt)
            except ValueError as exc:
                raise ParseError(f'invalid value {txt!r}', ln) from exc
            if sym == 'symmetric':
                A[j, i] = A[i, j]
        return A
    if len(dims) != 3:
        raise ParseError('coordinate size line needs three integers', lineno)
    rows, cols, nnz = dims
    if len(entries) != nnz:
        raise DimensionMismatch(f'expected {nnz} entries, found {len(entries)}')
    A = np.zeros((rows, cols))
    for ln, txt in entries:
        parts = txt.split()
        try:
            i, j, v = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
        except (ValueError, IndexError) as exc:
            raise ParseError(f'invalid entry {txt!r}', ln) from exc
        if not (0 <= i < rows and 0 <= j < cols):
            raise DimensionMismatch(f'line {ln}: index ({i + 1}, {j + 1}) outside {rows}x{cols}')
        A[i, j] = v
        if sym == 'symmetric':
            A[j, i] = v
    return A


# model bundles ---------------------------------------------------------------

_BUNDLE_FILES = (('M', 'M'), ('D', 'D'), ('K', 'K'), ('B', 'B'), ('Cp', 'Cp'), ('Cv', 'Cv'))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_bundle(sos, directory, meta=None):
    """Write ``M.mtx ... Cv.mtx`` and ``meta.json`` into `directory`."""
    os.makedirs(directory, exist_ok=True)
    for attr, name in _BUNDLE_FILES:
        write_matrix_market(getattr(sos, attr), os.path.join(directory, name + '.mtx'))
    info = dict(sos.meta)
    info.update(meta or {})
    info.update({'n': sos.n, 'm': sos.m, 'p': sos.p})
    with open(os.path.join(directory, 'meta.json'), 'w') as fh:
        json.dump(_jsonable(info), fh, indent=2, sort_keys=True)
        fh.write('\n')


def read_bundle(directory):
    """Load a model bundle; a missing ``D.mtx`` is replaced by ``1e-6 K``."""
    mats = {}
    for attr, name in _BUNDLE_FILES:
        path = os.path.join(directory, name + '.mtx')
        if os.path.exists(path):
            mats[attr] = read_matrix_market(path)
    meta = {}
    mpath = os.path.join(directory, 'meta.json')
    if os.path.exists(mpath):
        with open(mpath) as fh:
            meta = json.load(fh)
    for req in ('M', 'K', 'B'):
        if req not in mats:
            raise FileNotFoundError(os.path.join(directory, req + '.mtx'))
    if 'D' not in mats:
        mats['D'] = 1e-6 * mats['K']
        meta['damping'] = 'rayleigh 1e-6*K'
    n = mats['M'].shape[0]
    mats['B'] = mats['B'].reshape(n, -1)
    return SecondOrderSystem(mats['M'], mats['D'], mats['K'], mats['B'],
                             Cp=mats.get('Cp'), Cv=mats.get('Cv'), meta=meta)


def load_butterfly_gyro(directory):
    """Butterfly gyroscope from user-supplied Matrix Market files (``D = 1e-6 K`` if absent)."""
    sos = read_bundle(directory)
    sos.meta.setdefault('generator', 'butterfly-gyro')
    return sos
