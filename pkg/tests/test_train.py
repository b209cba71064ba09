import numpy as np
import pytest

from gclab.dataio import sample_domain, synth_quadratic
from gclab.errors import DivergedError, InvalidInputError
from gclab.model import NetworkParams, forward, grad
from gclab.train import TrainConfig, grad_check, init_params, sgdm

from _support import knn_basis


@pytest.fixture(scope="module")
def problem():
    g, basis = knn_basis(10, k=3, seed=3)
    f, _ = synth_quadratic(g, seed=1)
    X = sample_domain(10, 30, seed=2)
    return basis, X, f(X)


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [{"momentum": 1.0}, {"momentum": -0.1}, {"learning_rate": -1}, {"iterations": 0},
         {"init": "xavier"}, {"record_every": 0}, {"minibatch": 0}],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidInputError):
            TrainConfig(**kwargs)

    def test_defaults_match_algorithm(self):
        cfg = TrainConfig()
        assert (cfg.momentum, cfg.learning_rate, cfg.eps) == (0.9, 0.003, 1e-5)


class TestSgdm:
    def test_zero_init_is_stationary(self, problem):
        basis, X, y = problem
        traj = sgdm(X, y, basis, 4, 3, TrainConfig(init="paper_zero", iterations=50))
        assert not traj.params_final.flat().any()
        assert np.all(traj.rmse == 1.0)

    def test_zero_learning_rate(self, problem):
        basis, X, y = problem
        cfg = TrainConfig(learning_rate=0, iterations=10, seed=3)
        traj = sgdm(X, y, basis, 3, 2, cfg)
        np.testing.assert_array_equal(traj.params_final.flat(), init_params(basis, 3, 2, cfg).flat())
        assert np.ptp(traj.rmse) == 0

    def test_plain_gradient_step(self, problem):
        basis, X, y = problem
        cfg = TrainConfig(momentum=0.0, iterations=1, seed=4)
        p0 = init_params(basis, 3, 2, cfg)
        traj = sgdm(X, y, basis, 3, 2, cfg)
        expected = p0.flat() - cfg.learning_rate * grad(p0, X, y).flat()
        np.testing.assert_allclose(traj.params_final.flat(), expected, atol=1e-15)

    def test_momentum_recursion(self, problem):
        basis, X, y = problem
        cfg = TrainConfig(iterations=3, seed=5, learning_rate=0.01)
        theta = init_params(basis, 2, 2, cfg)
        temp = grad(theta, X, y).flat()
        for n in range(3):
            if n:
                temp = 0.9 * temp + grad(theta, X, y).flat()
            else:
                temp = 0.9 * temp + temp  # first Grad equals the initial Temp
            theta = theta.from_flat(theta.flat() - 0.01 * temp)
        traj = sgdm(X, y, basis, 2, 2, cfg)
        np.testing.assert_allclose(traj.params_final.flat(), theta.flat(), atol=1e-14)

    def test_deterministic(self, problem):
        basis, X, y = problem
        cfg = TrainConfig(iterations=20, seed=6)
        a, b = sgdm(X, y, basis, 3, 2, cfg), sgdm(X, y, basis, 3, 2, cfg)
        np.testing.assert_array_equal(a.params_final.flat(), b.params_final.flat())
        assert a.losses == b.losses

    def test_recording(self, problem):
        basis, X, y = problem
        traj = sgdm(X, y, basis, 2, 2, TrainConfig(iterations=10, record_every=4), checkpoints=(0, 5, 10))
        assert list(traj.iterations) == [0, 4, 8, 10]
        assert set(traj.checkpoints) == {0, 5, 10}
        np.testing.assert_array_equal(traj.checkpoints[10].flat(), traj.params_final.flat())
        assert np.isfinite(traj.ruae_final)

    def test_loss_decreases(self, problem):
        basis, X, y = problem
        traj = sgdm(X, y, basis, 4, 3, TrainConfig(iterations=200, seed=7))
        assert traj.rmse[-1] < traj.rmse[0]

    def test_divergence(self, problem):
        basis, X, y = problem
        with pytest.raises(DivergedError) as info:
            sgdm(X, y, basis, 2, 2, TrainConfig(learning_rate=50.0, iterations=200, delta=1.0))
        traj = info.value.trajectory
        assert len(traj.losses) >= 1

    def test_minibatch(self, problem):
        basis, X, y = problem
        cfg = TrainConfig(iterations=5, minibatch=8, seed=8)
        a, b = sgdm(X, y, basis, 2, 2, cfg), sgdm(X, y, basis, 2, 2, cfg)
        np.testing.assert_array_equal(a.params_final.flat(), b.params_final.flat())

    def test_shape_check(self, problem):
        basis, X, y = problem
        with pytest.raises(InvalidInputError):
            sgdm(X[:, :5], y, basis, 2, 2, TrainConfig(iterations=1))


class TestGradCheck:
    def test_zero_residual(self, problem):
        basis, X, _ = problem
        p = init_params(basis, 2, 2, TrainConfig(seed=9))
        res = grad_check(p, X, forward(p, X, "smooth"))
        np.testing.assert_array_equal(res.analytic, 0)
        # central differences of a loss that is quadratic near its minimum
        assert np.abs(res.numeric).max() < 1e-12
        assert res.max_rel_error < 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_random_instances(self, seed):
        rng = np.random.default_rng(seed)
        _, basis = knn_basis(8, seed=seed)
        p = NetworkParams(rng.standard_normal((3, 8)), rng.standard_normal((3, 3)), rng.standard_normal((3, 8)), basis)
        X, y = rng.uniform(-1, 1, (10, 8)), rng.standard_normal(10)
        assert grad_check(p, X, y, step=1e-6).max_rel_error < 1e-4

    def test_kink_flagged(self, problem):
        basis, X, y = problem
        rng = np.random.default_rng(10)
        eps = 1e-5
        p = NetworkParams(rng.standard_normal((1, 10)), np.zeros((1, 3)), np.full((1, 10), eps / 2), basis)
        # preactivations inside the smoothing band: the approximate derivative
        # there (0.75) disagrees with the exact ReLU slope (1)
        res = grad_check(p, X, y, activation="relu")
        assert res.n_excluded > 0
        assert res.near_kink[10:].all()
        assert res.flagged
        assert res.max_rel_error_all > 0.1

    def test_step_validation(self, problem):
        basis, X, y = problem
        with pytest.raises(InvalidInputError):
            grad_check(init_params(basis, 1, 1, TrainConfig()), X, y, step=0)
