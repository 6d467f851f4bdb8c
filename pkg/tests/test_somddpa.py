import numpy as np
import pytest
import warnings
from hypothesis import given, settings, strategies as st

from somor.errors import InvalidParams, NotModallyDamped, UndampedMode
from somor.somddpa import (check_modal_damping, dominance_rank, modal_decompose, pole_pair,
                           somddpa_reduce, write_dominance_csv)
from somor.systems import SecondOrderSystem, eval_transfer
from tests.conftest import random_sos


def two_mode(B=(1.0, 1.0)):
    K = np.diag([1.0, 4.0])
    B = np.array(B, float)[:, None]
    return SecondOrderSystem(np.eye(2), 0.1 * np.eye(2) + 0.2 * K, K, B, Cp=B.T, Cv=np.zeros((1, 2)))


class TestModalDamping:
    def test_rayleigh(self, rng):
        sos = random_sos(rng, 6, modal=True)
        assert check_modal_damping(sos) <= 1e-14

    def test_generic(self, rng):
        D = rng.standard_normal((2, 2))
        sos = SecondOrderSystem(np.eye(2), D + D.T, np.diag([1.0, 4.0]), np.ones((2, 1)))
        assert check_modal_damping(sos) > 1e-3

    def test_zero_damping(self):
        sos = SecondOrderSystem(np.eye(2), np.zeros((2, 2)), np.diag([1.0, 4.0]), np.ones((2, 1)))
        assert check_modal_damping(sos) == 0

    def test_rejects(self, rng):
        sos = random_sos(rng, 4)
        with pytest.raises(NotModallyDamped):
            modal_decompose(sos)
        assert modal_decompose(sos, force=True).off_diagonal > 0


class TestModalDecompose:
    def test_two_mode(self):
        md = modal_decompose(two_mode())
        assert md.omega == pytest.approx([1, 2])
        assert md.xi == pytest.approx([0.15, 0.225])
        lp = md.lambda_plus[0]
        assert lp.real == pytest.approx(-0.15) and abs(lp.imag) == pytest.approx(np.sqrt(1 - 0.15 ** 2))

    def test_pole_pairs(self):
        lp, lm = pole_pair(1.0, 0.0)
        assert {lp, lm} == {1j, -1j}
        lp, lm = pole_pair(1.0, 2.0)
        assert sorted([lp.real, lm.real]) == pytest.approx([-2 - np.sqrt(3), -2 + np.sqrt(3)])
        assert lp.imag == 0 and lm.imag == 0

    def test_invariants(self, rng):
        sos = random_sos(rng, 12, modal=True, kind='position')
        md = modal_decompose(sos)
        X = md.X
        assert np.allclose(X.T @ sos.M @ X, np.diag(1 / md.omega), atol=1e-9 / md.omega.min())
        assert np.allclose(X.T @ sos.K @ X, np.diag(md.omega), atol=1e-9 * md.omega.max())
        assert np.allclose(X.T @ sos.D @ X, np.diag(2 * md.xi), atol=1e-9 * md.xi.max())
        for lam in (md.lambda_plus, md.lambda_minus):
            assert np.abs(lam ** 2 + 2 * md.omega * md.xi * lam + md.omega ** 2).max() <= 1e-10 * md.omega.max() ** 2

    def test_poles_match_companion(self, rng):
        sos = random_sos(rng, 15, modal=True)
        md = modal_decompose(sos)
        n = sos.n
        A = np.block([[np.zeros((n, n)), np.eye(n)], [-np.linalg.solve(sos.M, sos.K), -np.linalg.solve(sos.M, sos.D)]])
        ref = np.sort_complex(np.linalg.eigvals(A))
        got = np.sort_complex(np.r_[md.lambda_plus, md.lambda_minus])
        for z in got:
            assert np.min(np.abs(ref - z)) <= 1e-8 * abs(z)


class TestDominance:
    def test_hand_values(self):
        sos = two_mode()
        md = modal_decompose(sos)
        perm = dominance_rank(md, sos.B, sos.Cp)
        assert list(perm) == [0, 1]
        assert md.dominance == pytest.approx([1 / 0.15 ** 2, 1 / 0.45 ** 2])

    def test_single_mode(self):
        sos = SecondOrderSystem([[1.0]], [[0.3]], [[1.0]], [[1.0]], Cp=[[1.0]])
        md = modal_decompose(sos)
        assert list(dominance_rank(md, sos.B, sos.Cp)) == [0]

    def test_zero_residue_last(self):
        sos = two_mode(B=(1.0, 0.0))
        md = modal_decompose(sos)
        perm = dominance_rank(md, sos.B, sos.Cp)
        assert md.dominance[1] == 0 and perm[-1] == 1

    def test_undamped_warns(self):
        K = np.diag([1.0, 4.0])
        B = np.ones((2, 1))
        sos = SecondOrderSystem(np.eye(2), np.diag([0.0, 0.4]), K, B, Cp=B.T)
        md = modal_decompose(sos)
        with pytest.warns(UndampedMode):
            perm = dominance_rank(md, sos.B, sos.Cp)
        assert perm[-1] == 0

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 100))
    def test_scaling_invariance(self, seed, c):
        rng = np.random.default_rng(seed)
        sos = random_sos(rng, 8, modal=True, kind='position')
        md = modal_decompose(sos)
        a = dominance_rank(md, sos.B, sos.Cp)
        b = dominance_rank(md, c * sos.B, sos.Cp)
        assert np.array_equal(a, b)


class TestReduce:
    def test_full_order_exact(self, rng):
        sos = random_sos(rng, 6, modal=True, kind='position')
        rom, prm, _, _ = somddpa_reduce(sos, 6)
        for s in (0.5j, 2 + 1j):
            H = eval_transfer(sos, s)
            assert np.allclose(eval_transfer(rom, s), H, rtol=1e-9)
            assert np.allclose(prm(s), H, rtol=1e-9)

    def test_first_mode(self):
        rom, _, _, _ = somddpa_reduce(two_mode(), 1)
        assert rom.M[0, 0] == pytest.approx(1.0) and rom.D[0, 0] == pytest.approx(0.3)
        assert rom.K[0, 0] == pytest.approx(1.0) and abs(rom.B[0, 0]) == pytest.approx(1.0)

    def test_rom_matches_pole_residue(self, rng):
        sos = random_sos(rng, 20, modal=True, kind='position')
        rom, prm, _, _ = somddpa_reduce(sos, 7)
        for s in 1j * 10 ** rng.uniform(-1, 1, 10):
            assert np.allclose(eval_transfer(rom, s), prm(s), rtol=1e-9)
        assert np.allclose(rom.K, np.diag(np.diag(rom.K)), atol=1e-10 * np.abs(rom.K).max())

    def test_velocity_outputs_rejected(self, rng):
        with pytest.raises(InvalidParams):
            somddpa_reduce(random_sos(rng, 3, modal=True), 1)

    def test_csv(self, tmp_path):
        sos = two_mode()
        _, _, md, order = somddpa_reduce(sos, 1)
        write_dominance_csv(tmp_path / 'd.csv', md, order)
        lines = (tmp_path / 'd.csv').read_text().splitlines()
        assert lines[0].startswith('rank,mode,omega,xi') and lines[1].startswith('1,1,1,')
