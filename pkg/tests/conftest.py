import numpy as np
import pytest

from somor.systems import SecondOrderSystem


def random_spd(rng, n, shift=0.1):
    X = rng.standard_normal((n, n))
    return X @ X.T / n + shift * np.eye(n)


def random_sos(rng, n, m=1, p=None, kind='colocated', modal=False):
    """Random SPD second-order system; `kind` is colocated, position or general."""
    M, K = random_spd(rng, n), random_spd(rng, n)
    if modal:
        a, b = rng.uniform(0.01, 0.2, 2)
        D = a * M + b * K
    else:
        D = random_spd(rng, n, 0.05)
    B = rng.standard_normal((n, m))
    p = m if p is None else p
    if kind == 'colocated':
        return SecondOrderSystem(M, D, K, B, Cp=np.zeros((m, n)), Cv=B.T.copy())
    if kind == 'position':
        return SecondOrderSystem(M, D, K, B, Cp=B.T.copy(), Cv=np.zeros((m, n)))
    return SecondOrderSystem(M, D, K, B, Cp=rng.standard_normal((p, n)),
                             Cv=rng.standard_normal((p, n)))


def oscillator(m=1.0, d=1.0, k=1.0, b=1.0, cp=0.0, cv=1.0):
    return SecondOrderSystem([[m]], [[d]], [[k]], [[b]], Cp=[[cp]], Cv=[[cv]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section('acceptance criteria')
    for rec in sorted(ACCEPTANCE, key=lambda r: r['key']):
        status = 'PASS' if rec['ok'] else 'FAIL'
        terminalreporter.write_line(f"criterion {rec['label']:<4} {status}  {rec['title']}"
                                    + (f"  [{rec['detail']}]" if rec['detail'] else ''))
