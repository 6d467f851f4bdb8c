"""Command-line harness: ``somor generate | reduce | evaluate | norm | compare``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 method failure.
Human-readable messages go to stderr; results are written to files.
"""
import os
import sys


def _apply_threads():
    # must run before numpy loads its BLAS
    val = os.environ.get('SOMOR_THREADS')
    if not val:
        return
    if not val.isdigit() or int(val) < 1:
        print(f'somor: ignoring invalid SOMOR_THREADS={val!r}', file=sys.stderr)
        return
    for var in ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS'):
        os.environ[var] = val


_apply_threads()

import argparse  # noqa: E402
import dataclasses  # noqa: E402
import json  # noqa: E402
import time  # noqa: E402
import warnings  # noqa: E402

import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from .config import DEFAULTS, Tolerances  # noqa: E402
from .errors import ConfigError, DimensionMismatch, InvalidParams, ParseError, SomorError  # noqa: E402
from .models import (SingleChainParams, TripleChainParams, gen_single_chain, gen_triple_chain,  # noqa: E402
                     read_bundle, write_bundle)
from .systems import (DescriptorSystem, companion_form, error_sweep, linf_norm_dense,  # noqa: E402
                      sigma_sweep, spectral_abscissa, write_response_csv)

EXIT_CONFIG, EXIT_IO, EXIT_METHOD = 2, 3, 4

METHODS = ('somddpa', 'flbt', 'tlbt', 'prbt', 'prbt-dilated', 'hinf-greedy')
GENERATORS = {'triple-chain': (TripleChainParams, gen_triple_chain),
              'single-chain': (SingleChainParams, gen_single_chain)}

# flat (dotted) config keys and their types; nested JSON objects are flattened first
_KEYS = {
    'model.generator': str, 'model.bundle': str,
    'method': str, 'order': int, 'formula': str,
    'limit.kind': str, 'limit.lo': float, 'limit.hi': float,
    'error_tol': float, 'r_max': int, 'refine': bool, 'refine_budget': int,
    'eps': float, 'fallback': bool,
    'threshold': float, 'force': bool,
    'grid.lo': float, 'grid.hi': float, 'grid.num': int,
    'output': str, 'seed': int,
}
_DEFAULTS = {'grid.lo': -4.0, 'grid.hi': 4.0, 'grid.num': 500, 'seed': 0, 'output': 'out'}


class IOFailure(Exception):
    pass


# configuration ------------------------------------------------------------------

def _flatten(obj, prefix=''):
    out = {}
    for k, v in obj.items():
        key = f'{prefix}{k}'
        if isinstance(v, dict) and key not in ('model.params',):
            out.update(_flatten(v, key + '.'))
        else:
            out[key] = v
    return out


def _coerce(key, val):
    if key == 'model.params':
        if not isinstance(val, dict):
            raise ConfigError('model.params must be an object')
        return val
    if key.startswith('tol.'):
        name = key[4:]
        fields = {f.name: f.type for f in dataclasses.fields(Tolerances)}
        if name not in fields:
            raise ConfigError(f'unknown config key {key!r}')
        typ = int if fields[name] in (int, 'int') else float
    elif key.startswith('model.params.'):
        return val
    elif key in _KEYS:
        typ = _KEYS[key]
    else:
        raise ConfigError(f'unknown config key {key!r}')
    try:
        if typ is bool:
            if isinstance(val, bool):
                return val
            if str(val).lower() in ('1', 'true', 'yes'):
                return True
            if str(val).lower() in ('0', 'false', 'no'):
                return False
            raise ValueError(val)
        if typ is int and isinstance(val, float) and not val.is_integer():
            raise ValueError(val)
        return typ(val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f'{key}: cannot interpret {val!r} as {typ.__name__}') from exc


def load_config(path=None, overrides=None):
    """Merge defaults, a JSON config file and ``key=value`` overrides (in that precedence order)."""
    cfg = dict(_DEFAULTS)
    if path:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise IOFailure(f'cannot read config {path}: {exc}') from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f'{path}: invalid JSON ({exc})') from exc
        if not isinstance(raw, dict):
            raise ConfigError(f'{path}: top level must be an object')
        for k, v in _flatten(raw).items():
            cfg[k] = _coerce(k, v)
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = _coerce(k, v)
    if 'method' in cfg and cfg['method'] not in METHODS:
        raise ConfigError(f'method: unknown {cfg["method"]!r} (choose from {", ".join(METHODS)})')
    if cfg['grid.num'] < 2 or cfg['grid.lo'] >= cfg['grid.hi']:
        raise ConfigError('grid: need lo < hi and num >= 2')
    return cfg


def _tolerances(cfg):
    tol = {k[4:]: v for k, v in cfg.items() if k.startswith('tol.')}
    return dataclasses.replace(DEFAULTS, **tol)


def _grid(cfg):
    return np.logspace(cfg['grid.lo'], cfg['grid.hi'], cfg['grid.num'])


def _model_params(cfg):
    params = dict(cfg.get('model.params', {}))
    params.update({k[len('model.params.'):]: v for k, v in cfg.items() if k.startswith('model.params.')})
    return params


def build_model(cfg):
    if 'model.bundle' in cfg:
        return _read(cfg['model.bundle'])
    name = cfg.get('model.generator')
    if name is None:
        raise ConfigError('model: give model.generator or model.bundle')
    if name not in GENERATORS:
        raise ConfigError(f'model.generator: unknown {name!r} (choose from {", ".join(GENERATORS)})')
    cls, gen = GENERATORS[name]
    params = _model_params(cfg)
    fields = {f.name: f.type for f in dataclasses.fields(cls)}
    for k in params:
        if k not in fields:
            raise ConfigError(f'model.params: unknown parameter {k!r} for {name}')
    try:
        kw = {k: (int(v) if fields[k] in (int, 'int') and float(v).is_integer() else float(v))
              for k, v in params.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f'model.params: {exc}') from exc
    try:
        return gen(cls(**kw))
    except InvalidParams as exc:
        raise ConfigError(str(exc)) from exc


def _read(path):
    try:
        return read_bundle(path)
    except (OSError, ParseError, DimensionMismatch) as exc:
        raise IOFailure(f'cannot read bundle {path}: {exc}') from exc


def _write_json(path, obj):
    with open(path, 'w') as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True)
        fh.write('\n')


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


# methods --------------------------------------------------------------------------

def _need(cfg, key):
    if key not in cfg:
        raise ConfigError(f'{key}: required for method {cfg.get("method")!r}')
    return cfg[key]


def _limit(cfg):
    from .limited_bt import Limit
    kind = cfg.get('limit.kind', 'frequency' if cfg.get('method', 'flbt') == 'flbt' else 'time')
    lo, hi = _need(cfg, 'limit.lo'), _need(cfg, 'limit.hi')
    if kind == 'frequency' and lo == 0:
        # the matrix logarithm needs w1 > 0
        lo = 1e-8 * hi
        cfg['limit.lo'] = lo
        print(f'somor: limit.lo = 0 replaced by {lo:.3g}', file=sys.stderr)
    try:
        return Limit(kind, lo, hi)
    except InvalidParams as exc:
        raise ConfigError(f'limit: {exc}') from exc


def run_method(sos, cfg, outdir):
    """Dispatch to the reduction modules; returns ``(rom, report)`` and writes side files."""
    method, tol = cfg['method'], _tolerances(cfg)
    report = {'method': method}
    interp = None
    if method == 'somddpa':
        from .somddpa import somddpa_reduce, write_dominance_csv
        rom, _, modal, order = somddpa_reduce(sos, _need(cfg, 'order'),
                                              cfg.get('threshold', tol.modal_damping),
                                              cfg.get('force', False))
        write_dominance_csv(os.path.join(outdir, 'dominance.csv'), modal, order)
        report['modes'] = rom.meta['modes']
    elif method in ('flbt', 'tlbt'):
        from .limited_bt import limited_bt_reduce, write_charvals_csv
        formula = cfg.get('formula', 'fv')
        rom, s = limited_bt_reduce(sos, _limit(cfg), formula, _need(cfg, 'order'), tol=tol)
        write_charvals_csv(os.path.join(outdir, 'charvals.csv'), {formula: s})
        report.update(formula=formula, limit=[cfg.get('limit.kind'), cfg['limit.lo'], cfg['limit.hi']],
                      stable=rom.meta.get('stable'), spectral_abscissa=rom.meta.get('spectral_abscissa'))
    elif method in ('prbt', 'prbt-dilated'):
        from .prbt import dilate_and_reduce, prbt_reduce, write_prbt_report
        kw = dict(eps=cfg.get('eps', tol.lure_eps), fallback=cfg.get('fallback', False), tol=tol)
        if method == 'prbt':
            rom, bound = prbt_reduce(sos, _need(cfg, 'order'), **kw)
        else:
            rom, bound, _ = dilate_and_reduce(sos, _need(cfg, 'order'), **kw)
        write_prbt_report(os.path.join(outdir, 'prbt_report.json'), rom)
        report.update(rom.meta.get('report', {}))
        report['bound'] = bound
    elif method == 'hinf-greedy':
        from .hinf_greedy import greedy_reduce, write_greedy_trace_csv
        rom, interp, trace = greedy_reduce(sos, _need(cfg, 'error_tol'), r_max=cfg.get('r_max'),
                                           refine=cfg.get('refine', False),
                                           refine_budget=cfg.get('refine_budget'), tol=tol)
        write_greedy_trace_csv(os.path.join(outdir, 'greedy_trace.csv'), trace)
        report.update(error=trace.records[-1]['error'] if trace.records else None,
                      reached=trace.reached, trace=trace.records)
    else:  # pragma: no cover - rejected by load_config
        raise ConfigError(f'unknown method {method!r}')
    report['order'] = rom.n
    report['stable'] = bool(spectral_abscissa(rom) < 0)
    return rom, report, interp


def _response_csv(sos, rom, grid, path):
    fr = sigma_sweep(sos, grid)
    rr = sigma_sweep(rom, grid)
    ab, rel = error_sweep(fr, rr, grid)
    write_response_csv(path, grid, rr.values, ab.values, rel.values)
    return float(rel.values.max())


# commands -------------------------------------------------------------------------

def cmd_generate(args):
    cfg = load_config(args.config, {'model.generator': args.model})
    for item in args.param or []:
        k, _, v = item.partition('=')
        cfg[f'model.params.{k}'] = v
    if args.g is not None:
        cfg['model.params.g'] = args.g
    if args.n is not None:
        cfg['model.params.n'] = args.n
    sos = build_model(cfg)
    try:
        write_bundle(sos, args.output)
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    print(f'wrote {sos.meta.get("generator")} bundle with n={sos.n} to {args.output}', file=sys.stderr)
    return 0


def _reduce_overrides(args):
    return {'model.bundle': args.model, 'method': args.method, 'order': args.order,
            'formula': args.formula, 'error_tol': args.error_tol, 'output': args.output,
            **dict(kv.partition('=')[::2] for kv in args.set or [])}


def cmd_reduce(args):
    cfg = load_config(args.config, _reduce_overrides(args))
    _need(cfg, 'method')
    np.random.seed(cfg['seed'])
    sos = build_model(cfg)
    outdir = cfg['output']
    try:
        os.makedirs(outdir, exist_ok=True)
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            rom, report, interp = run_method(sos, cfg, outdir)
    except ConfigError:
        raise
    except (SomorError, np.linalg.LinAlgError) as exc:
        _write_json(os.path.join(outdir, 'report.json'),
                    {'method': cfg['method'], 'status': 'failed', 'error': type(exc).__name__,
                     'message': str(exc), 'wall_time': time.perf_counter() - t0})
        print(f'somor: {cfg["method"]} failed: {type(exc).__name__}: {exc}', file=sys.stderr)
        return EXIT_METHOD
    report.update(status='ok', wall_time=time.perf_counter() - t0, n=sos.n,
                  warnings=[str(w.message) for w in caught])
    report['max_rel_err'] = _response_csv(sos, rom, _grid(cfg), os.path.join(outdir, 'response.csv'))
    rom_dir = os.path.join(outdir, 'rom')
    write_bundle(rom, rom_dir, meta={'method': cfg['method']})
    if interp is not None:
        from .hinf_greedy import write_interp_json
        write_interp_json(os.path.join(rom_dir, 'interp.json'), interp)
    _write_json(os.path.join(outdir, 'report.json'), report)
    print(f'{cfg["method"]}: order {rom.n}, stable {report["stable"]}, report in {outdir}', file=sys.stderr)
    return 0


def cmd_evaluate(args):
    cfg = load_config(args.config, {'grid.lo': args.lo, 'grid.hi': args.hi, 'grid.num': args.num})
    sos, rom = _read(args.model), _read(args.rom)
    if (sos.m, sos.p) != (rom.m, rom.p):
        raise ConfigError(f'model is {sos.p}x{sos.m} but ROM is {rom.p}x{rom.m}')
    grid = _grid(cfg)
    try:
        os.makedirs(args.output, exist_ok=True)
        fr = sigma_sweep(sos, grid)
        rr = sigma_sweep(rom, grid)
        ab, rel = error_sweep(fr, rr, grid)
        write_response_csv(os.path.join(args.output, 'sigma_model.csv'), grid, fr.values)
        write_response_csv(os.path.join(args.output, 'error.csv'), grid, rr.values, ab.values, rel.values)
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    return 0


def first_order(sos):
    """Descriptor realization used for norms; ``M = 0`` bundles give ``(D, -K, B, Cp)``."""
    if not np.any(sos.M) and not np.any(sos.Cv):
        return DescriptorSystem(sos.D, -sos.K, sos.B, sos.Cp)
    return companion_form(sos)


def system_norm(sos, tol=DEFAULTS):
    ds = first_order(sos)
    if ds.order <= tol.dense_linf_max_order:
        return linf_norm_dense(ds, tol)
    from .hinf_greedy import linf_norm_subspace
    res = linf_norm_subspace(ds, tol)
    return res.norm, res.omega


def cmd_norm(args):
    sos = _read(args.bundle)
    try:
        val, w = system_norm(sos)
    except SomorError as exc:
        print(f'somor: norm failed: {type(exc).__name__}: {exc}', file=sys.stderr)
        return EXIT_METHOD
    print(f'{val:.17g} {w:.17g}')
    path = args.json or os.path.join(args.bundle, 'norm.json')
    if path:
        try:
            _write_json(path, {'norm': val, 'omega': w})
        except OSError as exc:
            raise IOFailure(str(exc)) from exc
    return 0


def cmd_compare(args):
    """Run every balancing formula (or every method) and tabulate stability and in-band error."""
    cfg = load_config(args.config, _reduce_overrides(args))
    sos = build_model(cfg)
    outdir = cfg['output']
    os.makedirs(outdir, exist_ok=True)
    rows = []
    if args.all_methods:
        for method in METHODS:
            sub = dict(cfg, method=method)
            t0 = time.perf_counter()
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter('ignore')
                    rom, rep, _ = run_method(sos, sub, outdir)
                rel = _response_csv(sos, rom, _grid(cfg), os.path.join(outdir, f'response_{method}.csv'))
                rows.append([method, rom.n, rep['stable'], rel, 'ok'])
            except (SomorError, ConfigError, np.linalg.LinAlgError) as exc:
                rows.append([method, '', '', '', type(exc).__name__])
            print(f'{method}: {time.perf_counter() - t0:.1f} s', file=sys.stderr)
    else:
        from .limited_bt import (FORMULAS, limited_gramians, reduce_from_blocks, so_gramian_blocks,
                                 write_charvals_csv)
        cfg.setdefault('method', 'flbt')
        tol, r = _tolerances(cfg), _need(cfg, 'order')
        limit = _limit(cfg)
        P, Q = limited_gramians(companion_form(sos), limit, tol)
        blocks = so_gramian_blocks(P, Q, sos.n)
        band = _grid(cfg)
        if limit.kind == 'frequency':
            band = np.logspace(np.log10(limit.lo), np.log10(limit.hi), cfg['grid.num'])
        fr = sigma_sweep(sos, band)
        charvals = {}
        for name in FORMULAS:
            try:
                rom, s = reduce_from_blocks(sos, blocks, name, r, tol)
            except SomorError as exc:
                rows.append([name, '', '', '', type(exc).__name__])
                continue
            charvals[name] = s
            _, rel = error_sweep(fr, sigma_sweep(rom, band), band)
            rows.append([name, rom.n, bool(rom.meta['stable']), float(rel.values.max()), 'ok'])
        write_charvals_csv(os.path.join(outdir, 'charvals.csv'), charvals)
    with open(os.path.join(outdir, 'compare.csv'), 'w') as fh:
        fh.write('name,order,stable,max_rel_err,status\n')
        for r in rows:
            fh.write(','.join('%.17g' % v if isinstance(v, float) else str(v) for v in r) + '\n')
    for r in rows:
        print(' '.join(str(v) for v in r), file=sys.stderr)
    return 0


# entry point ----------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(prog='somor', description='Structure-preserving reduction of second-order systems.')
    ap.add_argument('--version', action='version', version=f'somor {__version__}')
    sub = ap.add_subparsers(dest='command', required=True)

    g = sub.add_parser('generate', help='write a benchmark model bundle')
    g.add_argument('--model', choices=sorted(GENERATORS), default=None)
    g.add_argument('--g', type=int, help='chain length of the triple chain')
    g.add_argument('--n', type=int, help='number of masses of the single chain')
    g.add_argument('--param', action='append', metavar='KEY=VALUE', help='other generator parameters')
    g.add_argument('--config')
    g.add_argument('-o', '--output', required=True)
    g.set_defaults(func=cmd_generate)

    def reduce_args(p):
        p.add_argument('--config')
        p.add_argument('--model', help='model bundle directory (overrides the config model)')
        p.add_argument('--method', choices=METHODS)
        p.add_argument('--order', type=int)
        p.add_argument('--formula')
        p.add_argument('--error-tol', type=float)
        p.add_argument('--set', action='append', metavar='KEY=VALUE', help='any config key, e.g. limit.lo=5e-3')
        p.add_argument('-o', '--output')

    r = sub.add_parser('reduce', help='reduce a model as described by a config file')
    reduce_args(r)
    r.set_defaults(func=cmd_reduce)

    c = sub.add_parser('compare', help='tabulate all balancing formulas or all methods')
    reduce_args(c)
    c.add_argument('--all-methods', action='store_true')
    c.set_defaults(func=cmd_compare)

    e = sub.add_parser('evaluate', help='sigma and error curves of a ROM against its model')
    e.add_argument('--model', required=True)
    e.add_argument('--rom', required=True)
    e.add_argument('--config')
    e.add_argument('--lo', type=float, help='log10 of the lowest frequency')
    e.add_argument('--hi', type=float, help='log10 of the highest frequency')
    e.add_argument('--num', type=int)
    e.add_argument('-o', '--output', required=True)
    e.set_defaults(func=cmd_evaluate)

    n = sub.add_parser('norm', help='L-infinity norm of a bundle')
    n.add_argument('bundle')
    n.add_argument('--json', help='where to write {norm, omega} (default BUNDLE/norm.json)')
    n.set_defaults(func=cmd_norm)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidParams) as exc:
        print(f'somor: configuration error: {exc}', file=sys.stderr)
        return EXIT_CONFIG
    except (IOFailure, OSError) as exc:
        print(f'somor: I/O error: {exc}', file=sys.stderr)
        return EXIT_IO
    except SomorError as exc:
        print(f'somor: {type(exc).__name__}: {exc}', file=sys.stderr)
        return EXIT_METHOD


if __name__ == '__main__':
    sys.exit(main())
