import numpy as np
import pytest
from scipy import stats

from asyncvr.errors import ParseError
from asyncvr.problems import (L_FLOOR, SIGMOID_CURVATURE, gen_lasso, gen_lasso_ratio,
                              gen_pl_quadratic, gen_sigmoid_data, gen_sigmoid_ls, lipschitz_blocks,
                              load_libsvm, sigmoid_curvature_bound)
from asyncvr.solver import reference_optimum
from helpers import lasso, quadratic


def test_lasso_sparsity():
    p = gen_lasso(100, 400, rng=0)
    assert np.count_nonzero(p.x_true) == 40


def test_lasso_table3_shape():
    p = gen_lasso(2000, 200, 10, lam=0.1, rng=1)
    assert p.A.shape == (2000, 200) and p.n_blocks == 10
    assert all(r.weight == 0.1 for r in p.regs)


def test_interpolation_recovery():
    p = gen_lasso(60, 10, n_blocks=2, noise_sd=0.0, lam=0.0, rng=2)
    opt = reference_optimum(p, tol=1e-12)
    assert np.abs(opt.x - p.x_true).max() <= 1e-6


def test_invalid_lasso():
    for kw in (dict(N=0, d=3), dict(N=3, d=3, density=0.0), dict(N=3, d=3, noise_sd=-1)):
        with pytest.raises(ValueError):
            gen_lasso(**kw)


def test_sigmoid_two_points(tmp_path):
    f = tmp_path / "two.svm"
    f.write_text("+1 1:1\n-1 1:-1\n")
    X, y = load_libsvm(f)
    assert y.tolist() == [1.0, 0.0]
    p = gen_sigmoid_ls(X, y, n_blocks=1)
    assert p.objective(np.zeros(p.dim)) == pytest.approx(0.125)


def test_sigmoid_finite_differences():
    X, y = gen_sigmoid_data(40, 6, 3)
    p = gen_sigmoid_ls(X, y, n_blocks=2)
    for x in (np.zeros(p.dim), np.random.default_rng(4).standard_normal(p.dim) * 0.5):
        g = p.full_gradient(x)
        h = 1e-5
        fd = np.array([(p.smooth_value(x + h * e) - p.smooth_value(x - h * e)) / (2 * h)
                       for e in np.eye(p.dim)])
        assert np.linalg.norm(fd - g) / np.linalg.norm(g) <= 1e-6


def test_libsvm_errors(tmp_path):
    empty = tmp_path / "empty.svm"
    empty.write_text("")
    with pytest.raises(ParseError):
        load_libsvm(empty)
    bad = tmp_path / "bad.svm"
    bad.write_text("1 1:0.5\n0 2:x\n")
    with pytest.raises(ParseError) as e:
        load_libsvm(bad)
    assert e.value.lineno == 2


def test_libsvm_sparse_layout(tmp_path):
    f = tmp_path / "d.svm"
    f.write_text("1 3:2.5\n0 1:1 2:-1  # comment\n")
    X, y = load_libsvm(f)
    assert X.tolist() == [[0, 0, 2.5], [1, -1, 0]] and y.tolist() == [1, 0]


def test_bias_joins_last_block():
    X, y = gen_sigmoid_data(20, 10, 0)
    p = gen_sigmoid_ls(X, y, n_blocks=3)
    assert p.dim == 11 and list(p.partition.dims) == [4, 3, 4]


def test_quadratic_examples():
    p = gen_pl_quadratic(2, 1, mu=1.0, curvature=[1.0, 4.0], center=[0.0, 0.0])
    x, F = p.exact_optimum()
    assert F == 0 and x.tolist() == [0, 0] and p.pl_mu == 1.0
    p = gen_pl_quadratic(1, 1, mu=1.0, lam=0.3, curvature=[1.0], center=[1.0])
    assert p.exact_optimum()[1] == pytest.approx(0.255)
    assert reference_optimum(p, tol=1e-12).F == pytest.approx(0.255, abs=1e-12)
    p = gen_pl_quadratic(6, 3, mu=2.0, L_spread=1.0, rng=0)
    assert np.all(p.L == 2.0)


def test_quadratic_endpoints_attained():
    p = gen_pl_quadratic(20, 4, mu=1.0, L_spread=4.0, rng=5)
    assert p.c.min() == 1.0 and p.c.max() == 4.0


def test_lipschitz_single_column():
    a = np.random.default_rng(0).standard_normal(30)
    p = lasso(a[:, None], np.zeros(30))
    assert lipschitz_blocks(p)[0] == pytest.approx(a @ a / 30, rel=1e-9)


def test_lipschitz_quadratic_and_floor():
    assert lipschitz_blocks(quadratic([1.0, 4.0])).tolist() == [4.0]
    A = np.zeros((5, 2))
    A[:, 1] = 1.0
    assert lipschitz_blocks(lasso(A, np.ones(5), dims=[1, 1]))[0] == L_FLOOR


def test_sigmoid_curvature_constant_is_a_bound():
    assert sigmoid_curvature_bound() <= SIGMOID_CURVATURE


@pytest.mark.parametrize("make", [
    lambda s: gen_lasso(40, 9, n_blocks=3, rng=s),
    lambda s: gen_sigmoid_ls(*gen_sigmoid_data(40, 8, s), n_blocks=3),
    lambda s: gen_pl_quadratic(9, 3, lam=0.1, rng=s),
])
def test_block_descent_admissible(make):
    for seed in range(5):
        p = make(seed)
        rng = np.random.default_rng(100 + seed)
        x = rng.standard_normal(p.dim)
        for i, sl in enumerate(p.slices):
            y = x.copy()
            y[sl] -= p.full_gradient_block(x, i) / p.L[i]
            assert p.smooth_value(y) <= p.smooth_value(x) + 1e-12


def test_block_variances_order_lipschitz():
    v = [0.5, 1.0, 2.0, 4.0, 8.0]
    hits = sum(stats.spearmanr(v, gen_lasso(200, 25, 5, block_variances=v, rng=s).L)[0] > 1 - 1e-12
               for s in range(20))
    assert hits >= 19


@pytest.mark.parametrize("ratio", [1.3, 1.45, 2.5])
def test_ratio_search(ratio):
    p = gen_lasso_ratio(300, 50, 10, ratio, rng=4)
    assert p.L.max() / p.L.mean() == pytest.approx(ratio, abs=1e-9)
