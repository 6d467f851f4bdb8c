import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar
from scipy.stats import ortho_group

from somor.errors import NotColocated, RankDeficientBasis, SingularAtPoint, ToleranceNotReached
from somor.hinf_greedy import (GreedyTrace, InterpolationData, error_system, extend_basis,
                               galerkin_rom, greedy_reduce, hermite_residuals, linf_norm_subspace,
                               refine_interpolation, tangential_basis, write_greedy_trace_csv,
                               write_interp_json)
from somor.systems import (DescriptorSystem, SecondOrderSystem, eval_transfer,
                           eval_transfer_derivative, linf_norm_dense, spectral_abscissa)
from tests.conftest import random_sos, random_spd


def chain(n, d=0.05):
    K = 2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    K[-1, -1] = 1.0
    M = np.eye(n)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    return SecondOrderSystem(M, d * (M + K), K, B, Cp=B.T.copy(), Cv=np.zeros((1, n)))


def random_descriptor(rng, n, m, p):
    A = rng.standard_normal((n, n))
    A = A - (np.linalg.eigvals(A).real.max() + 0.2) * np.eye(n)
    return DescriptorSystem(np.eye(n), A, rng.standard_normal((n, m)), rng.standard_normal((p, n)))


def point_error(sos, w):
    rom = galerkin_rom(sos, tangential_basis(sos, [1j * w]))
    return linf_norm_dense(error_system(sos, rom))[0]


class TestGalerkin:
    def test_identity(self, rng):
        sos = random_sos(rng, 4, kind='position')
        rom = galerkin_rom(sos, np.eye(4))
        for X, Y in ((rom.M, sos.M), (rom.D, sos.D), (rom.K, sos.K), (rom.B, sos.B)):
            assert np.allclose(X, Y, rtol=0, atol=1e-15 * np.abs(Y).max())

    def test_ritz_vector(self, rng):
        sos = random_sos(rng, 2, kind='position')
        v = np.linalg.eigh(sos.K)[1][:, :1]
        rom = galerkin_rom(sos, v)
        assert rom.n == 1
        assert rom.M[0, 0] == pytest.approx((v.T @ sos.M @ v)[0, 0])
        assert min(rom.M[0, 0], rom.D[0, 0], rom.K[0, 0]) > 0

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 8))
    def test_spd_preserved(self, seed, n):
        rng = np.random.default_rng(seed)
        sos = random_sos(rng, n, kind='position')
        r = int(rng.integers(1, n + 1))
        V = ortho_group.rvs(n, random_state=rng)[:, :r] if n > 1 else np.ones((1, 1))
        rom = galerkin_rom(sos, V)
        for X in (rom.M, rom.D, rom.K):
            assert np.array_equal(X, X.T)
            np.linalg.cholesky(X)
        assert spectral_abscissa(rom) < 0

    def test_rank_deficient(self, rng):
        sos = random_sos(rng, 4, kind='position')
        with pytest.raises(RankDeficientBasis):
            galerkin_rom(sos, np.ones((4, 2)))

    def test_extend_basis(self, rng):
        Q = extend_basis(np.zeros((5, 0)), rng.standard_normal((5, 2)))
        Q = extend_basis(Q, np.hstack([Q[:, :1] * 3, rng.standard_normal((5, 1))]))
        assert Q.shape == (5, 3) and np.allclose(Q.T @ Q, np.eye(3), atol=1e-12)


class TestSubspaceNorm:
    def test_first_order_lag(self):
        res = linf_norm_subspace(DescriptorSystem([[1.0]], [[-1.0]], [[1.0]], [[1.0]]))
        norm, w, it = res
        assert norm == pytest.approx(1.0, rel=1e-12) and w == pytest.approx(0.0, abs=1e-8)
        assert it <= 3 and res.converged

    def test_resonant_chain(self):
        from somor.systems import companion_form
        ds = companion_form(chain(2, d=0.01))
        n_s, w_s, _ = linf_norm_subspace(ds)
        n_d, w_d = linf_norm_dense(ds)
        assert n_s == pytest.approx(n_d, rel=1e-10)

    def test_rectangular(self, rng):
        ds = random_descriptor(rng, 50, 2, 1)
        n_s, _, _ = linf_norm_subspace(ds)
        assert n_s == pytest.approx(linf_norm_dense(ds)[0], rel=1e-8)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_agrees_with_dense(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 200))
        ds = random_descriptor(rng, n, int(rng.integers(1, 3)), int(rng.integers(1, 3)))
        assert linf_norm_subspace(ds)[0] == pytest.approx(linf_norm_dense(ds)[0], rel=1e-8)

    def test_stationary(self):
        from somor.systems import companion_form
        ds = companion_form(chain(6, d=0.02))
        norm, w, _ = linf_norm_subspace(ds)
        n_d, w_d = linf_norm_dense(ds)
        assert w == pytest.approx(w_d, rel=1e-6)
        sig = lambda x: np.linalg.norm(eval_transfer(ds, 1j * x), 2)
        h = 1e-4 * w
        # the peak is a maximum of the full response, not only of the reduced one
        assert sig(w) >= max(sig(w + h), sig(w - h))


class TestTangential:
    def test_full_interpolation(self):
        sos = chain(6)
        pts = [0.7j, 1.5j]
        Vt = tangential_basis(sos, pts, [np.array([1.0])] * 2)
        Vf = tangential_basis(sos, pts)
        assert Vt.shape == Vf.shape
        assert np.allclose(Vt @ Vt.T, Vf @ Vf.T, atol=1e-10)

    def test_direction(self, rng):
        sos = random_sos(rng, 8, m=2, kind='position')
        s = 0.9j
        b = np.array([1.0, 0.0])
        rom = galerkin_rom(sos, tangential_basis(sos, [s], [b]))
        H, Hr = eval_transfer(sos, s), eval_transfer(rom, s)
        assert np.linalg.norm((H - Hr) @ b) <= 1e-8 * np.linalg.norm(H)
        assert np.linalg.norm((H - Hr) @ np.array([0.0, 1.0])) > 1e-6 * np.linalg.norm(H)

    def test_hermite_derivative(self, rng):
        sos = random_sos(rng, 8, m=2, kind='position')
        s = 1.3j
        b = np.array([0.6, 0.8j])
        rom = galerkin_rom(sos, tangential_basis(sos, [s], [b]))
        h = 1e-6 * abs(s)
        fd = (eval_transfer(sos, s + h) - eval_transfer(sos, s - h)) / (2 * h)
        d_full = eval_transfer_derivative(sos, s)
        d_rom = eval_transfer_derivative(rom, s)
        bh = b.conj()
        assert abs(bh @ d_full @ b - bh @ fd @ b) <= 1e-6 * max(1.0, np.abs(fd).max())
        assert abs(bh @ (d_full - d_rom) @ b) <= 1e-8 * np.abs(d_full).max()
        H, Hr = eval_transfer(sos, s), eval_transfer(rom, s)
        assert np.linalg.norm((H - Hr) @ b) <= 1e-8 * np.linalg.norm(H)
        assert np.linalg.norm(b.conj() @ (H - Hr)) <= 1e-8 * np.linalg.norm(H)

    def test_singular_point(self):
        sos = chain(3, d=0.0)
        w = np.sqrt(np.linalg.eigvalsh(sos.K)[0])
        with pytest.raises(SingularAtPoint):
            tangential_basis(sos, [1j * w])


class TestGreedy:
    def test_exact_recovery(self):
        sos = chain(5)
        rom, data, trace = greedy_reduce(sos, 1e-12)
        assert trace.reached and rom.n <= 5
        assert rom.meta['error'] <= 1e-10 * np.linalg.norm(eval_transfer(sos, 0j))

    def test_hermite_and_trace(self):
        sos = chain(30, d=0.02)
        rom, data, trace = greedy_reduce(sos, 1e-4, r_max=20)
        orders = [r['order'] for r in trace.records]
        assert all(b > a for a, b in zip(orders, orders[1:]))
        assert max(hermite_residuals(sos, rom, data.points)) <= 1e-8
        assert all(r['stable'] for r in trace.records)
        for s in data.points:
            h = 1e-6 * abs(s)
            fd = (eval_transfer(rom, s + h) - eval_transfer(rom, s - h)) / (2 * h)
            d = eval_transfer_derivative(sos, s)
            assert np.abs(fd - d).max() <= 1e-5 * max(1.0, np.abs(d).max())
        V = data.V
        assert np.allclose(V.T @ V, np.eye(V.shape[1]), atol=1e-12)

    def test_symmetric_transfer(self, rng):
        sos = random_sos(rng, 12, m=2, kind='position')
        rom, _, _ = greedy_reduce(sos, 1e-3, r_max=8)
        H = eval_transfer(rom, 0.8j)
        assert np.allclose(H, H.T, atol=1e-12 * np.abs(H).max())

    def test_tolerance_not_reached(self):
        sos = chain(20)
        with pytest.warns(UserWarning):
            greedy_reduce(sos, 1e-14, r_max=2)
        with pytest.raises(ToleranceNotReached):
            greedy_reduce(sos, 1e-14, r_max=2, strict=True)

    def test_needs_position_outputs(self, rng):
        with pytest.raises(NotColocated):
            greedy_reduce(random_sos(rng, 4), 1e-3)

    def test_files(self, tmp_path):
        sos = chain(8)
        rom, data, trace = greedy_reduce(sos, 1e-6)
        write_greedy_trace_csv(tmp_path / 't.csv', trace)
        lines = (tmp_path / 't.csv').read_text().splitlines()
        assert lines[0] == 'iter,omega,error,order' and len(lines) == len(trace.records) + 1
        write_interp_json(tmp_path / 'i.json', data)
        back = InterpolationData.from_json(json.loads((tmp_path / 'i.json').read_text()))
        assert np.allclose(back.points, data.points)


class TestRefine:
    def test_golden_section_oracle(self):
        # three masses: a single point gives order 2, so the model is not recovered exactly
        sos = chain(3, d=0.1)
        data = InterpolationData([0.2j], None, tangential_basis(sos, [0.2j]))
        out = refine_interpolation(sos, data, budget=100)
        assert out.meta['error_out'] < out.meta['error_in']
        assert out.meta['gradient_check'] <= 1e-5
        t = np.log(out.points[0].imag)
        res = minimize_scalar(lambda x: point_error(sos, np.exp(x)), bracket=(t - 0.3, t, t + 0.3),
                              method='golden', tol=1e-10)
        assert out.meta['error_out'] == pytest.approx(res.fun, rel=1e-4)
        assert abs(out.meta['error_out'] - point_error(sos, out.points[0].imag)) <= 1e-10

    def test_optimal_unchanged(self):
        sos = chain(3, d=0.1)
        data = InterpolationData([0.2j], None, tangential_basis(sos, [0.2j]))
        first = refine_interpolation(sos, data, budget=100)
        again = refine_interpolation(sos, first, budget=100)
        assert again.meta['error_out'] <= first.meta['error_out'] * (1 + 1e-12)
        if again.meta['accepted_steps'] == 0:
            assert again.points == first.points

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_monotone(self, seed):
        rng = np.random.default_rng(seed)
        sos = random_sos(rng, 6, m=2, kind='position')
        k = int(rng.integers(1, 3))
        pts = list(1j * 10 ** rng.uniform(-1, 0.5, k))
        dirs = [b / np.linalg.norm(b) for b in rng.standard_normal((k, 2)) + 1j * rng.standard_normal((k, 2))]
        data = InterpolationData(pts, dirs, tangential_basis(sos, pts, dirs))
        out = refine_interpolation(sos, data, budget=20)
        assert out.meta['error_out'] <= out.meta['error_in']
