import numpy as np
import pytest

from somor.errors import DimensionMismatch, InvalidParams, ParseError
from somor.models import (SingleChainParams, TripleChainParams, gen_single_chain, gen_triple_chain,
                          load_butterfly_gyro, read_bundle, read_matrix_market, write_bundle,
                          write_matrix_market)
from somor.systems import companion_form


class TestTripleChain:
    def test_small(self):
        sos = gen_triple_chain(g=1)
        assert sos.n == 4 and sos.K[3, 3] == 81

    def test_paper_size(self):
        assert 3 * TripleChainParams().g + 1 == 1501

    def test_hand_assembly(self):
        sos = gen_triple_chain(g=2, k0=1, k1=1, k2=1, k3=1, m0=1, m1=1, m2=1, m3=1,
                               alpha=0, beta=0, nu1=0, nu_g1=0, nu_2g1=0)
        K = np.array([
            [2, -1, 0, 0, 0, 0, 0],
            [-1, 2, 0, 0, 0, 0, -1],
            [0, 0, 2, -1, 0, 0, 0],
            [0, 0, -1, 2, 0, 0, -1],
            [0, 0, 0, 0, 2, -1, 0],
            [0, 0, 0, 0, -1, 2, -1],
            [0, -1, 0, -1, 0, -1, 4],
        ], dtype=float)
        assert np.array_equal(sos.K, K)
        assert np.array_equal(sos.M, np.eye(7)) and not np.any(sos.D)

    def test_invariants(self):
        sos = gen_triple_chain(g=10)
        np.linalg.cholesky(sos.M)
        np.linalg.cholesky(sos.K)
        assert np.array_equal(sos.D, sos.D.T)
        assert np.linalg.eigvalsh(sos.D).min() >= -1e-12 * np.linalg.norm(sos.D)
        assert np.array_equal(sos.Cv, sos.B.T) and sos.colocated
        assert sos.D[0, 0] == pytest.approx(0.002 + 0.002 * 20 + 5)

    def test_lossless_marginal(self):
        sos = gen_triple_chain(g=3, alpha=0, beta=0, nu1=0, nu_g1=0, nu_2g1=0)
        ds = companion_form(sos)
        ev = np.linalg.eigvals(np.linalg.solve(ds.E, ds.A))
        assert np.abs(ev.real).max() <= 1e-8

    @pytest.mark.parametrize('field,value', [('g', 0), ('k1', 0.0), ('m0', -1.0), ('alpha', -1e-3)])
    def test_invalid(self, field, value):
        with pytest.raises(InvalidParams, match=field):
            gen_triple_chain(**{field: value})


class TestSingleChain:
    def test_single_mass(self):
        sos = gen_single_chain(n=1)
        assert sos.M[0, 0] == 1 and sos.K[0, 0] == 2

    def test_three_masses(self):
        sos = gen_single_chain(n=3, alpha=0, beta=0, nu=0)
        assert np.array_equal(sos.K, [[3, -1, 0], [-1, 2, -1], [0, -1, 1]])
        assert sos.positions_only and sos.p == 2 and sos.B[0, 0] == 1

    def test_default_scale(self):
        assert SingleChainParams().n == 1200

    def test_invalid(self):
        with pytest.raises(InvalidParams, match='n'):
            gen_single_chain(n=0)


class TestMatrixMarket:
    def test_bare_scalar(self, tmp_path):
        f = tmp_path / 'a.mtx'
        f.write_text('1.5\n')
        assert np.array_equal(read_matrix_market(f), [[1.5]])

    def test_symmetric_coordinate(self, tmp_path):
        f = tmp_path / 's.mtx'
        f.write_text('%%MatrixMarket matrix coordinate real symmetric\n% lower\n2 2 3\n1 1 4\n2 1 -1\n2 2 3\n')
        assert np.array_equal(read_matrix_market(f), [[4, -1], [-1, 3]])

    def test_round_trip_text(self, tmp_path):
        K = gen_triple_chain(g=2).K
        a, b = tmp_path / 'a.mtx', tmp_path / 'b.mtx'
        write_matrix_market(K, a)
        write_matrix_market(read_matrix_market(a), b)
        assert a.read_text() == b.read_text()
        assert np.array_equal(read_matrix_market(a), K)

    def test_round_trip_symmetric(self, tmp_path, rng):
        X = rng.standard_normal((5, 5))
        X = X + X.T
        write_matrix_market(X, tmp_path / 'x.mtx', symmetric=True)
        assert np.array_equal(read_matrix_market(tmp_path / 'x.mtx'), X)

    def test_parse_error_line(self, tmp_path):
        f = tmp_path / 'bad.mtx'
        f.write_text('%%MatrixMarket matrix array real general\n2 1\n1.0\nabc\n')
        with pytest.raises(ParseError) as exc:
            read_matrix_market(f)
        assert exc.value.line == 4

    def test_count_mismatch(self, tmp_path):
        f = tmp_path / 'short.mtx'
        f.write_text('%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n')
        with pytest.raises(DimensionMismatch):
            read_matrix_market(f)


class TestBundle:
    def test_round_trip(self, tmp_path):
        sos = gen_triple_chain(g=2)
        write_bundle(sos, tmp_path / 'b')
        back = read_bundle(tmp_path / 'b')
        for nm in ('M', 'D', 'K', 'B', 'Cp', 'Cv'):
            assert np.array_equal(getattr(back, nm), getattr(sos, nm))
        assert back.meta['generator'] == 'triple-chain' and back.meta['n'] == 7

    def test_missing_damping(self, tmp_path):
        sos = gen_triple_chain(g=1)
        write_bundle(sos, tmp_path / 'g')
        (tmp_path / 'g' / 'D.mtx').unlink()
        gyro = load_butterfly_gyro(tmp_path / 'g')
        assert np.array_equal(gyro.D, 1e-6 * sos.K)
