import csv

import numpy as np
import pytest

from informed_nn.nn_core import Network, init_network
from informed_nn.risks import RiskSpec, WeightedObjective, eq1_weights
from informed_nn.trainer import (HISTORY_HEADER, TrainConfig, TrainingDivergedError,
                                 default_step_size, train)


def scalar_net(v0):
    return Network(np.ones((1, 1)), [np.ones((1, 1))], np.array([[v0]]))


class ScalarQuadratic:
    """1/2 (v - 1)^2 on the single output weight v."""

    n = 1

    def __call__(self, net, rows=None):
        v = net.V[0, 0]
        grad = net.zeros_like()
        grad.V[0, 0] = v - 1.0
        return 0.5 * (v - 1.0) ** 2, grad


class TestGD:
    def test_geometric_convergence(self):
        net, hist = train(scalar_net(3.0), ScalarQuadratic(),
                          TrainConfig(optimizer="gd", steps=20, eta=0.5))
        assert net.V[0, 0] - 1 == pytest.approx(0.5 ** 20 * 2.0, rel=1e-12)
        for t, obj in zip(hist.step, hist.objective):
            assert obj == pytest.approx(0.5 * (0.5 ** t * 2.0) ** 2, rel=1e-12)

    def test_zero_steps_returns_copy(self):
        net0 = init_network(2, 4, 1, 1, seed=0)
        obj = WeightedObjective(RiskSpec(), np.ones((3, 2)), np.zeros((3, 1)), None, None,
                                eq1_weights(3, 0, 0.0))
        net, hist = train(net0, obj, TrainConfig(steps=0))
        assert net.equals(net0) and net is not net0
        assert hist.step == [0]

    def test_last_layer_monotone(self, rng):
        X = rng.normal(size=(20, 3))
        z = rng.normal(size=(20, 1))
        obj = WeightedObjective(RiskSpec(), X, z, None, None, eq1_weights(20, 0, 0.0))

        def frozen(net, rows=None):
            value, grad = obj(net, rows)
            grad.W0[:] = 0.0
            for w in grad.W:
                w[:] = 0.0
            return value, grad
        frozen.n = obj.n

        net0 = init_network(3, 32, 1, 1, seed=2)
        _, hist = train(net0, frozen, TrainConfig(steps=200, eta=1e-3))
        assert np.all(np.diff(hist.objective) <= 0)

    def test_divergence_detected(self):
        with pytest.raises(TrainingDivergedError), np.errstate(over="ignore"):
            train(scalar_net(3.0), ScalarQuadratic(),
                  TrainConfig(optimizer="gd", steps=5000, eta=3.0))

    def test_plateau_stops(self):
        _, hist = train(scalar_net(3.0), ScalarQuadratic(),
                        TrainConfig(steps=1000, eta=0.5, plateau_window=10, plateau_tol=1e-3))
        assert hist.stopped_early and hist.step[-1] < 1000


class TestDefaultStep:
    @pytest.mark.parametrize("b,m,L,d,expected", [(2, 1024, 2, 1, 1 / 4096),
                                                  (2, 4, 1, 4, 1.0)])
    def test_values(self, b, m, L, d, expected):
        assert default_step_size(init_network(b, m, L, d, seed=0)) == expected

    def test_doubling_width_halves(self):
        a = default_step_size(init_network(2, 64, 2, 1, seed=0))
        b = default_step_size(init_network(2, 128, 2, 1, seed=0))
        assert b == a / 2


class TestAdam:
    def test_schedule(self):
        cfg = TrainConfig.bohachevsky_full()
        assert cfg.optimizer == "adam" and cfg.steps == 3000 and cfg.batch_size == 100
        assert [cfg.learning_rate(t) for t in (1, 2000, 2001, 2500, 2501, 3000)] == [
            1e-6, 1e-6, 5e-5, 5e-5, 1e-5, 1e-5]

    def test_reproducible_and_decreasing(self, rng):
        X = rng.normal(size=(60, 2))
        z = np.sin(X[:, :1])
        obj = WeightedObjective(RiskSpec(), X, z, None, None, eq1_weights(60, 0, 0.0))
        cfg = TrainConfig(optimizer="adam", steps=300, lr_rates=[1e-2], batch_size=16, seed=4,
                          record_every=50)
        net0 = init_network(2, 32, 1, 1, seed=0)
        a, ha = train(net0, obj, cfg)
        b, hb = train(net0, obj, cfg)
        assert a.equals(b) and ha.objective == hb.objective
        assert ha.objective[-1] < 0.5 * ha.objective[0]
        assert ha.step == [0, 50, 100, 150, 200, 250, 300]

    def test_first_step_size(self):
        # bias-corrected first Adam step moves each weight by lr * sign(grad)
        cfg = TrainConfig(optimizer="adam", steps=1, lr_rates=[0.1])
        net, _ = train(scalar_net(3.0), ScalarQuadratic(), cfg)
        assert net.V[0, 0] == pytest.approx(2.9, abs=1e-7)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(optimizer="sgd"), dict(steps=-1), dict(eta=0.0),
                                    dict(batch_size=0), dict(lr_rates=[1e-3, 1e-4]),
                                    dict(lr_rates=[1e-3, 1e-4], lr_breakpoints=[2000], steps=10),
                                    dict(lr_rates=[-1.0]), dict(record_every=0)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)

    def test_history_csv(self, tmp_path):
        _, hist = train(scalar_net(3.0), ScalarQuadratic(), TrainConfig(steps=3, eta=0.5))
        hist.write_csv(tmp_path / "h.csv")
        with open(tmp_path / "h.csv") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == HISTORY_HEADER
        assert len(rows) == 5
