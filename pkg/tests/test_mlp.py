import numpy as np
import pytest

from copuf.attack import evaluate, run_attack
from copuf.composites import ApufInstance
from copuf.crpio import generate_crps, split
from copuf.features import plain_features
from copuf.mlp import (
    DivergenceError,
    MlpConfig,
    MlpModel,
    accuracy,
    backprop,
    bce_loss,
    choose_l,
    gradient_check,
    hidden_sizes,
    init_model,
    train_arrays,
)

from conftest import random_challenges


class TestChooseL:
    def test_published_presets(self):
        assert choose_l("ff", k=2) == 3
        assert hidden_sizes(3) == (4, 8, 4)
        assert choose_l("xor-ff", k=1, z=2) == 4
        assert hidden_sizes(4) == (8, 16, 8)
        assert choose_l("ipuf", x=3, y=3) == 5
        assert hidden_sizes(5) == (16, 32, 16)
        assert choose_l("mn") == 4
        assert choose_l("apuf") == 1

    def test_variants(self):
        assert choose_l("xor-ff", k=1, z=2, variant="low") == 3
        assert choose_l("oax-ff", k=1, x=2, y=3, z=1) == 8
        assert choose_l("oax-ff", k=1, x=2, y=3, z=1, variant="low") == 7
        assert choose_l("oax-ff", k=1, x=2, y=3, z=1, variant="xy") == 5
        assert choose_l("ipuf", x=4, y=4, variant="plus1") == 7
        assert choose_l("ipuf", x=4, y=4, variant="minus1") == 5

    def test_unknown_architecture(self):
        with pytest.raises(ValueError):
            choose_l("rainbow")


class TestInitAndForward:
    def test_seeded_init_deterministic(self):
        cfg = MlpConfig(input_dim=16, hidden=(4, 8, 4), seed=3)
        a, b = init_model(cfg), init_model(cfg)
        for wa, wb in zip(a.parameters(), b.parameters()):
            assert np.array_equal(wa, wb)

    def test_fan_scaled_bound(self):
        cfg = MlpConfig(input_dim=24, hidden=(8, 16, 8), seed=1)
        model = init_model(cfg)
        dims = model.layer_dims
        for (fan_in, fan_out), W in zip(zip(dims[:-1], dims[1:]), model.weights):
            assert np.abs(W).max() <= np.sqrt(6.0 / (fan_in + fan_out))
        for b in model.biases:
            assert (b == 0).all()

    def test_zero_weights_output_half(self):
        model = MlpModel([np.zeros((6, 3)), np.zeros((3, 1))], [np.zeros(3), np.zeros(1)])
        X = np.random.default_rng(0).choice([-1.0, 1.0], size=(5, 6))
        assert np.allclose(model.forward(X), 0.5)

    def test_no_hidden_layers_is_logistic_regression(self):
        rng = np.random.default_rng(1)
        w = rng.normal(0, 1, (8, 1))
        model = MlpModel([w], [np.array([0.25])])
        X = rng.choice([-1.0, 1.0], size=(10, 8))
        expected = 1 / (1 + np.exp(-(X @ w[:, 0] + 0.25)))
        assert np.allclose(model.forward(X), expected)

    def test_output_bias_monotone(self):
        cfg = MlpConfig(input_dim=4, hidden=(3,), seed=2)
        model = init_model(cfg)
        X = np.ones((1, 4))
        p0 = model.forward(X)[0]
        model.biases[-1][0] += 1.0
        assert model.forward(X)[0] > p0

    def test_dim_mismatch(self):
        cfg = MlpConfig(input_dim=4, hidden=(3,), seed=2)
        with pytest.raises(ValueError):
            init_model(cfg).forward(np.ones((1, 5)))

    def test_tie_predicts_one(self):
        model = MlpModel([np.zeros((2, 1))], [np.zeros(1)])
        assert model.predict(np.ones((1, 2)))[0] == 1


class TestGradients:
    def test_small_random_configs(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            d = int(rng.integers(2, 10))
            h = tuple(int(rng.integers(1, 9)) for _ in range(int(rng.integers(1, 4))))
            model = init_model(MlpConfig(input_dim=d, hidden=h, seed=int(rng.integers(1 << 20))))
            X = rng.choice([-1.0, 1.0], size=(int(rng.integers(1, 9)), d))
            y = rng.integers(0, 2, X.shape[0]).astype(float)
            assert gradient_check(model, X, y) < 1e-4

    def test_zero_gradient_point(self):
        # all-zero weights with a balanced batch: analytic and numeric
        # derivatives both vanish
        model = MlpModel(
            [np.zeros((4, 3)), np.zeros((3, 1))], [np.zeros(3), np.zeros(1)]
        )
        X = np.array([[1.0, -1.0, 1.0, -1.0], [-1.0, 1.0, -1.0, 1.0]])
        y = np.array([0.0, 1.0])
        _, grads = backprop(model, X, y)
        for dW, db in grads:
            assert np.abs(dW).max() < 1e-8
            assert np.abs(db).max() < 1e-8
        step = 1e-5
        for param in model.parameters():
            flat = param.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                up = bce_loss(model.forward(X), y)
                flat[i] = orig - step
                down = bce_loss(model.forward(X), y)
                flat[i] = orig
                assert abs(up - down) / (2 * step) < 1e-8

    def test_sign_agreement(self):
        rng = np.random.default_rng(8)
        model = init_model(MlpConfig(input_dim=6, hidden=(4, 8, 4), seed=9))
        X = rng.choice([-1.0, 1.0], size=(8, 6))
        y = rng.integers(0, 2, 8).astype(float)
        _, grads = backprop(model, X, y)
        step = 1e-5
        flat_grads = [g for pair in grads for g in pair]
        for param, analytic in zip(model.parameters(), flat_grads):
            it = np.nditer(param, flags=["multi_index"])
            while not it.finished:
                ix = it.multi_index
                a = analytic[ix]
                if abs(a) > 1e-6:
                    orig = param[ix]
                    param[ix] = orig + step
                    up = bce_loss(model.forward(X), y)
                    param[ix] = orig - step
                    down = bce_loss(model.forward(X), y)
                    param[ix] = orig
                    assert np.sign((up - down) / (2 * step)) == np.sign(a)
                it.iternext()


def _linear_target_data(seed, count, n=32):
    inst = ApufInstance.from_seed(seed, n)
    c = random_challenges(seed + 1, count, n)
    X = plain_features(c)
    y = ((X * inst.weights[:n]).sum(axis=1) + inst.weights[n] < 0).astype(float)
    return X, y


class TestTraining:
    def test_linear_target_learnability(self):
        X, y = _linear_target_data(21, 7000)
        cfg = MlpConfig(input_dim=32, hidden=hidden_sizes(choose_l("apuf")),
                        epochs=100, batch_size=20, seed=4)
        model, hist = train_arrays(init_model(cfg), X[:5000], y[:5000],
                                   X[5000:6000], y[5000:6000], cfg)
        assert accuracy(model, X[6000:], y[6000:]) > 0.95

    def test_coin_flip_labels_hit_chance(self):
        rng = np.random.default_rng(5)
        X = rng.choice([-1.0, 1.0], size=(4000, 16))
        y = rng.integers(0, 2, 4000).astype(float)
        cfg = MlpConfig(input_dim=16, hidden=(4, 8, 4), epochs=5, batch_size=50, seed=6)
        model, _ = train_arrays(init_model(cfg), X[:3000], y[:3000],
                                X[3000:3500], y[3000:3500], cfg)
        assert abs(accuracy(model, X[3500:], y[3500:]) - 0.5) < 0.04

    def test_best_validation_rule(self):
        X, y = _linear_target_data(22, 4000)
        cfg = MlpConfig(input_dim=32, hidden=(2, 4, 2), epochs=15, batch_size=20, seed=7)
        best, hist = train_arrays(init_model(cfg), X[:2500], y[:2500],
                                  X[2500:3200], y[2500:3200], cfg)
        final, _ = train_arrays(
            init_model(cfg), X[:2500], y[:2500], X[2500:3200], y[2500:3200],
            MlpConfig(**{**cfg.__dict__, "keep_best": False}),
        )
        va = lambda m: accuracy(m, X[2500:3200], y[2500:3200])
        assert va(best) >= va(final)
        assert va(best) == hist.best_val_accuracy
        assert hist.best_epoch == int(np.argmax(hist.val_accuracy))

    def test_training_is_deterministic(self):
        X, y = _linear_target_data(23, 3000)
        cfg = MlpConfig(input_dim=32, hidden=(2, 4, 2), epochs=5, batch_size=20, seed=8)
        m1, h1 = train_arrays(init_model(cfg), X[:2000], y[:2000], X[2000:2500], y[2000:2500], cfg)
        m2, h2 = train_arrays(init_model(cfg), X[:2000], y[:2000], X[2000:2500], y[2000:2500], cfg)
        assert h1.train_loss == h2.train_loss
        assert h1.val_accuracy == h2.val_accuracy
        for a, b in zip(m1.parameters(), m2.parameters()):
            assert np.array_equal(a, b)

    def test_divergence_reported_with_epoch(self):
        X, y = _linear_target_data(24, 600)
        cfg = MlpConfig(input_dim=32, hidden=(2,), epochs=3, batch_size=20,
                        learning_rate=float("inf"), seed=9)
        with np.errstate(invalid="ignore"), pytest.raises(DivergenceError) as err:
            train_arrays(init_model(cfg), X[:400], y[:400], X[400:500], y[400:500], cfg)
        assert err.value.epoch == 0


class TestEvaluate:
    def test_perfect_model_scores_one(self):
        inst = ApufInstance.from_seed(31, 32)
        crps = generate_crps(inst, 500, 0.0, seed=32)
        # logistic readout of the exact delay model: p >= 0.5 iff delta <= 0
        scale = 1e6
        model = MlpModel([(-scale * inst.weights[:32])[:, None]],
                         [np.array([-scale * inst.weights[32]])])
        assert evaluate(model, crps, plain_features) == 1.0

    def test_constant_half_model_scores_majority_rate(self):
        inst = ApufInstance.from_seed(33, 32)
        crps = generate_crps(inst, 400, 0.0, seed=34)
        model = MlpModel([np.zeros((32, 1))], [np.zeros(1)])
        assert evaluate(model, crps, plain_features) == crps.responses.mean()

    def test_empty_test_set_rejected(self):
        with pytest.raises(ValueError):
            accuracy(MlpModel([np.zeros((2, 1))], [np.zeros(1)]), np.zeros((0, 2)), np.zeros(0))

    def test_no_leakage_label_shuffle(self):
        inst = ApufInstance.from_seed(35, 32)
        crps = generate_crps(inst, 7000, 0.0, seed=36)
        train_set, val_set, test_set = split(crps, 5000, 1000, 1000)
        cfg = MlpConfig(input_dim=32, hidden=(2, 4, 2), epochs=20, batch_size=20, seed=37)
        model, report = run_attack(inst, train_set, val_set, test_set, cfg)
        assert report.test_accuracy > 0.9
        shuffled = np.random.default_rng(38).permutation(test_set.responses)
        acc = accuracy(model, plain_features(test_set.challenges), shuffled)
        assert abs(acc - 0.5) < 0.04
