import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import simpson
from scipy.linalg import expm

from somor.errors import DimensionMismatch, InvalidParams, RankDeficient, UnstablePencil
from somor.limited_bt import (FORMULAS, Limit, balanced_projection, freq_limited_gramians,
                              get_formula, limited_bt_all, limited_bt_reduce, limited_gramians,
                              psd_factor, so_gramian_blocks, time_limited_gramians,
                              write_charvals_csv)
from somor.systems import DescriptorSystem, companion_form, eval_transfer
from tests.conftest import random_sos


def scalar(a=-1.0):
    return DescriptorSystem(np.eye(1), [[a]], [[1.0]], [[1.0]])


def random_stable(rng, n, m=2, p=2, E=False):
    A = rng.standard_normal((n, n))
    A = A - (np.linalg.eigvals(A).real.max() + 0.3) * np.eye(n)
    Em = np.eye(n) + (0.2 * rng.standard_normal((n, n)) if E else 0)
    return DescriptorSystem(Em, Em @ A, rng.standard_normal((n, m)), rng.standard_normal((p, n)))


def freq_oracle(ds, w1, w2, num=20001):
    # (1/pi) Re int_{w1}^{w2} (iwE - A)^{-1} B B^T (iwE - A)^{-H} dw on a log-spaced Simpson grid
    t = np.linspace(np.log(w1), np.log(w2), num)
    vals = []
    for w in np.exp(t):
        X = np.linalg.solve(1j * w * ds.E - ds.A, ds.B)
        vals.append((X @ X.conj().T).real * w)
    return simpson(np.array(vals), x=t, axis=0) / np.pi


def time_oracle(ds, t0, tf, num=4001):
    F = np.linalg.solve(ds.E, ds.A)
    Bt = np.linalg.solve(ds.E, ds.B)
    t = np.linspace(t0, tf, num)
    vals = [(expm(F * s) @ Bt) @ (expm(F * s) @ Bt).T for s in t]
    return simpson(np.array(vals), x=t, axis=0)


class TestLimit:
    def test_validation(self):
        with pytest.raises(InvalidParams):
            Limit('frequency', 0.0, 1.0)
        with pytest.raises(InvalidParams):
            Limit('time', 2.0, 1.0)
        with pytest.raises(InvalidParams):
            Limit('band', 0.1, 1.0)


class TestFrequencyGramians:
    def test_unlimited_limit(self):
        P, Q = freq_limited_gramians(scalar(), 1e-8, 1e8)
        assert P.gramian[0, 0] == pytest.approx(0.5, abs=1e-7)

    def test_arctan(self):
        P, _ = freq_limited_gramians(scalar(), 1e-8, 1.0)
        assert P.gramian[0, 0] == pytest.approx(np.arctan(1.0) / np.pi, abs=1e-8)

    def test_scalar_closed_form(self):
        P, _ = freq_limited_gramians(scalar(), 1e-8, 3.0)
        assert P.gramian[0, 0] == pytest.approx(np.arctan(3.0) / np.pi, abs=1e-8)

    def test_self_dual(self, rng):
        X = rng.standard_normal((5, 5))
        A = -(X @ X.T) - 0.5 * np.eye(5)
        B = rng.standard_normal((5, 1))
        P, Q = freq_limited_gramians(DescriptorSystem(np.eye(5), A, B, B.T), 0.1, 2.0)
        assert np.allclose(P.gramian, Q.gramian, atol=1e-12 * np.abs(P.gramian).max())

    def test_quadrature_oracle(self, rng):
        ds = random_stable(rng, 6, E=True)
        P, Q = freq_limited_gramians(ds, 0.2, 3.0)
        ref = freq_oracle(ds, 0.2, 3.0)
        assert np.abs(P.gramian - ref).max() <= 1e-6 * max(1.0, np.abs(ref).max())
        # observability side solves A^T Q E + E^T Q A + C^T C = 0, which is the
        # controllability Gramian of the dual pencil (E^T, A^T, C^T)
        Qe = freq_oracle(DescriptorSystem(ds.E.T, ds.A.T, ds.C.T, ds.B.T), 0.2, 3.0)
        assert np.abs(Q.gramian - Qe).max() <= 1e-6 * max(1.0, np.abs(Qe).max())

    def test_unlimited_consistency(self, rng):
        ds = random_stable(rng, 6)
        ev = np.abs(np.linalg.eigvals(ds.A))
        assert 1e-3 < ev.min() and ev.max() < 1e3
        P, _ = freq_limited_gramians(ds, 1e-8, 1e8)
        Pu, _ = limited_gramians(ds, Limit())
        assert np.abs(P.gramian - Pu.gramian).max() <= 1e-6 * np.abs(Pu.gramian).max()

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_nested_monotonicity(self, seed):
        rng = np.random.default_rng(seed)
        ds = random_stable(rng, 5)
        lo, hi = np.sort(10 ** rng.uniform(-2, 2, 2))
        P1, _ = freq_limited_gramians(ds, lo * 1.5, hi / 1.5) if hi / lo > 2.5 else freq_limited_gramians(ds, lo, hi)
        P2, _ = freq_limited_gramians(ds, lo, hi)
        assert np.trace(P1.gramian) <= np.trace(P2.gramian) + 1e-8

    def test_unstable(self):
        with pytest.raises(UnstablePencil):
            freq_limited_gramians(scalar(1.0), 0.1, 1.0)


class TestTimeGramians:
    def test_scalar(self):
        P, _ = time_limited_gramians(scalar(), 0.0, 1.0)
        assert P.gramian[0, 0] == pytest.approx((1 - np.exp(-2)) / 2, rel=1e-12)
        assert P.gramian[0, 0] == pytest.approx(0.432332, abs=1e-6)

    def test_long_horizon(self):
        P, _ = time_limited_gramians(scalar(), 0.0, 40.0)
        assert P.gramian[0, 0] == pytest.approx(0.5, abs=1e-10)

    def test_quadrature_oracle(self, rng):
        ds = random_stable(rng, 6, E=True)
        P, _ = time_limited_gramians(ds, 0.5, 3.0)
        ref = time_oracle(ds, 0.5, 3.0)
        assert np.abs(P.gramian - ref).max() <= 1e-6 * max(1.0, np.abs(ref).max())

    def test_clamp_recorded(self, rng):
        ds = random_stable(rng, 6)
        P, Q = time_limited_gramians(ds, 1.0, 2.0)
        assert P.clamped_mass >= 0 and np.linalg.eigvalsh(P.gramian).min() >= -1e-12


class TestBlocks:
    def test_block_diagonal(self):
        P = np.diag([1.0, 2.0, 3.0, 4.0])
        L, _ = psd_factor(P)
        b = so_gramian_blocks(L, L, 2)
        assert np.allclose(b['P_p'] @ b['P_p'].T, np.diag([1.0, 2.0]))
        assert np.allclose(b['P_v'] @ b['P_v'].T, np.diag([3.0, 4.0]))

    def test_rank_one(self):
        u, v = np.array([1.0, 2.0]), np.array([3.0, 4.0])
        b = so_gramian_blocks(np.r_[u, v][:, None], np.r_[u, v][:, None], 2)
        assert np.allclose(b['P_p'] @ b['P_p'].T, np.outer(u, u))
        assert np.allclose(b['Q_v'] @ b['Q_v'].T, np.outer(v, v))

    def test_scalar_oscillator(self):
        from tests.conftest import oscillator
        from somor.linalg import solve_lyapunov
        ds = companion_form(oscillator(cp=1.0, cv=0.0))
        P, _ = limited_gramians(ds, Limit())
        ref = solve_lyapunov(ds.A, ds.B @ ds.B.T)
        b = so_gramian_blocks(P, P, 1)
        assert (b['P_p'] @ b['P_p'].T)[0, 0] == pytest.approx(ref[0, 0])
        assert (b['P_v'] @ b['P_v'].T)[0, 0] == pytest.approx(ref[1, 1])

    def test_dimension(self):
        with pytest.raises(DimensionMismatch):
            so_gramian_blocks(np.ones((3, 1)), np.ones((4, 1)), 2)


class TestBalancedProjection:
    def test_identity(self):
        V, W, s = balanced_projection(np.eye(4), np.eye(4), 2)
        assert np.allclose(s, 1) and np.allclose(W.T @ V, np.eye(2))

    def test_scalar(self):
        V, W, s = balanced_projection([[3.0]], [[2.0]], 1)
        assert s[0] == pytest.approx(6.0)
        assert abs(V[0, 0]) == pytest.approx(2 / np.sqrt(6)) and abs(W[0, 0]) == pytest.approx(3 / np.sqrt(6))
        assert (W.T @ V)[0, 0] == pytest.approx(1.0)

    def test_projector(self, rng):
        Lp, Lq = rng.standard_normal((5, 5)), rng.standard_normal((5, 5))
        V, W, _ = balanced_projection(Lq, Lp, 5)
        Pi = V @ W.T
        assert np.allclose(Pi @ Pi, Pi, atol=1e-10 * np.abs(Pi).max())

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            balanced_projection(np.eye(3)[:, :1], np.eye(3)[:, :1], 2)


class TestReduce:
    def test_formula_table(self):
        assert set(FORMULAS) == {'p', 'pm', 'pv', 'vp', 'v', 'vpm', 'fv', 'so'}
        assert get_formula('fv').right == 'vm'
        with pytest.raises(InvalidParams):
            get_formula('xx')

    def test_full_order(self, rng):
        sos = random_sos(rng, 2, kind='position')
        rom, s = limited_bt_reduce(sos, Limit(), 'p', 2)
        for w in (0.1, 1.0, 10.0):
            assert np.allclose(eval_transfer(rom, 1j * w), eval_transfer(sos, 1j * w), rtol=1e-8)
        assert rom.meta['formula'] == 'p' and rom.meta['limit']['kind'] == 'unlimited'

    def test_biorthogonality_all_formulas(self, rng):
        sos = random_sos(rng, 6, kind='general', m=2, p=2)
        res = limited_bt_all(sos, Limit('frequency', 0.1, 5.0), 3)
        assert set(res) == set(FORMULAS)
        for name, (rom, s) in res.items():
            assert rom.n == 3 and np.all(np.diff(s) <= 0)
            assert isinstance(rom.meta['stable'], bool)

    def test_charvals_csv(self, tmp_path):
        write_charvals_csv(tmp_path / 'c.csv', {'fv': np.array([2.0, 1.0])})
        lines = (tmp_path / 'c.csv').read_text().splitlines()
        assert lines[0] == 'index,sigma,formula' and lines[1] == '1,2,fv'
