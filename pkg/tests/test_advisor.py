import math

import pytest

from informed_nn.advisor import beta_lambda, choose_lambda


class TestBetaLambda:
    def test_endpoints(self):
        assert beta_lambda(0.0, 100, 20) == 0.0
        assert beta_lambda(1.0, 100, 20) == 1.0

    def test_example(self):
        assert beta_lambda(0.5, 100, 20) == pytest.approx(1 / 6, rel=1e-15)

    def test_no_shared_samples(self):
        assert beta_lambda(0.3, 100, 0) == 0.0
        with pytest.raises(ZeroDivisionError):
            beta_lambda(1.0, 100, 0)

    @pytest.mark.parametrize("args", [(1.5, 10, 2), (0.5, 10, 11), (0.5, 10, -1)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            beta_lambda(*args)


class TestChooseLambda:
    def test_perfect_knowledge_case_a(self):
        d = choose_lambda(0.01, 0.0, 0.3)
        assert d.case == "a" and d.lam == 1.0 and d.feasible

    def test_case_b_example(self):
        d = choose_lambda(0.04, 0.5, 0.25)
        assert d.case == "b"
        assert d.lam == pytest.approx(0.4, rel=1e-15)
        assert d.order_of_magnitude_only

    def test_case_c_example(self):
        d = choose_lambda(0.01, 0.5, 0.2)
        assert d.case == "c" and d.lam is None and not d.feasible

    def test_boundary_continuity(self):
        eps = 0.09
        root = math.sqrt(eps)
        at = choose_lambda(eps, root, 0.5)
        above = choose_lambda(eps, root * (1 + 1e-12), 0.5)
        assert at.case == "a" and above.case == "b"
        assert above.lam == pytest.approx(at.lam, abs=1e-11)

    def test_zero_label_imperfectness_always_feasible(self):
        assert choose_lambda(0.01, 0.9, 0.0).case == "b"

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.1])
    def test_rejects_epsilon(self, eps):
        with pytest.raises(ValueError):
            choose_lambda(eps, 0.5, 0.5)
