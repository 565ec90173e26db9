import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reparam_lab import bounds as B
from reparam_lab.errors import BoundInputError
from reparam_lab.func_families import ConstantSet


def _consts(**kw):
    base = dict(L_t1=1, L_t2=1, L_pi1=1, L_pi2=1, L_r1=1, L_r2=1, L_phi=1, r_max=1, K=1)
    base.update(kw)
    return ConstantSet(**base)


def _inputs(**kw):
    c = kw.pop("constants", _consts())
    kw.setdefault("gamma", 0.9)
    kw.setdefault("T", 1)
    return B.BoundInputs(c, **kw)


class TestSeries:
    @pytest.mark.parametrize("gamma,T,expected", [(0.5, 2, 1.75), (0.0, 5, 1.0), (0.9, 1, 1.9)])
    def test_geom_sum(self, gamma, T, expected):
        assert B.geom_sum(gamma, T) == pytest.approx(expected, rel=1e-15)

    def test_ratio_sum(self):
        assert B.ratio_sum(0.5, 2.0, 2) == pytest.approx(1.25, rel=1e-15)
        assert B.ratio_sum(0.5, 1.0, 2) == 1.0
        assert B.ratio_sum(0.7, 3.3, 0) == 0.0

    @pytest.mark.parametrize("eps", [1e-9, -1e-9])
    def test_ratio_sum_continuity(self, eps):
        assert abs(B.ratio_sum(0.9, 1 + eps, 50) - B.ratio_sum(0.9, 1.0, 50)) < 1e-6

    def test_long_horizon_precision(self):
        # high-precision oracle for T = 10^4 with gamma close to 1
        g, nu, T = 0.9999, 0.99995, 10_000
        with mpmath.workdps(50):
            G, N = mpmath.mpf(g), mpmath.mpf(nu)
            geo = sum(G**t for t in range(T + 1))
            rat = sum(G**t * (N**t - 1) / (N - 1) for t in range(T + 1))
        assert B.geom_sum(g, T) == pytest.approx(float(geo), rel=1e-12)
        assert B.ratio_sum(g, nu, T) == pytest.approx(float(rat), rel=1e-10)

    def test_invalid_gamma(self):
        with pytest.raises(BoundInputError):
            B.geom_sum(1.0, 3)


class TestShiftBounds:
    def test_zero_gaps(self):
        assert B.bound_fixed_policy_shift(_inputs(state_gap_series=(0.0, 0.0))).value == 0.0

    def test_fixed_policy_example(self):
        v = B.bound_fixed_policy_shift(_inputs(state_gap_series=(0.5, 0.5))).value
        assert v == pytest.approx(0.95, rel=1e-15)

    def test_series_length_checked(self):
        with pytest.raises(BoundInputError):
            B.bound_fixed_policy_shift(_inputs(state_gap_series=(0.5,)))

    def test_linear_noise(self):
        assert B.bound_linear_noise(_inputs(eta=0.0)).value == 0.0
        assert B.bound_linear_noise(_inputs(eta=0.5)).value == pytest.approx(0.95, rel=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(eta=st.floats(0, 10), gamma=st.floats(0, 0.999), T=st.integers(0, 200),
           k=st.floats(0.01, 5))
    def test_linear_noise_equals_constant_series(self, eta, gamma, T, k):
        inp = _inputs(constants=_consts(L_r2=k), eta=eta, gamma=gamma, T=T,
                      state_gap_series=(eta,) * (T + 1))
        assert B.bound_fixed_policy_shift(inp).value == B.bound_linear_noise(inp).value

    def test_stochastic_reduces_to_linear(self):
        inp = _inputs(eta=0.3, sigma2=0.0, delta=0.2)
        assert B.bound_stochastic_distractor(inp).value == pytest.approx(B.bound_linear_noise(inp).value, rel=1e-15)

    def test_stochastic_example(self):
        v = B.bound_stochastic_distractor(_inputs(gamma=0.0, eta=0.0, sigma2=0.01, delta=0.25)).value
        assert v == pytest.approx(0.2, rel=1e-15)

    @pytest.mark.parametrize("delta", [0.0, 1.0])
    def test_stochastic_bad_delta(self, delta):
        with pytest.raises(BoundInputError):
            _inputs(delta=delta)


class TestStateDeviation:
    def test_init(self):
        assert B.bound_state_dev_init(0.2, 1.4, 0) == 0.2
        assert B.bound_state_dev_init(0.0, 1.4, 9) == 0.0
        assert B.bound_state_dev_init(0.2, 1.4, 2) == pytest.approx(0.392, rel=1e-14)

    def test_transition(self):
        assert B.bound_state_dev_transition(0.1, 1.7, 0) == 0.0
        assert B.bound_state_dev_transition(0.1, 1.0, 3) == pytest.approx(0.3, rel=1e-15)
        assert B.bound_state_dev_transition(0.1, 2.0, 2) == pytest.approx(0.3, rel=1e-14)

    @pytest.mark.parametrize("eps", [1e-9, -1e-9])
    def test_continuity(self, eps):
        for t in range(0, 30):
            assert abs(B.bound_state_dev_transition(0.1, 1 + eps, t) - 0.1 * t) < 1e-6
            assert abs(B.bound_state_dev_init(0.1, 1 + eps, t) - 0.1) < 1e-6

    def test_negative_t(self):
        with pytest.raises(BoundInputError):
            B.bound_state_dev_init(0.1, 1.0, -1)


class TestTrainTest:
    def test_identical_envs(self):
        assert B.bound_train_test(_inputs()).value == 0.0

    def test_transition_only_example(self):
        # lambda = 2, nu = 2 with unit constants
        v = B.bound_train_test(_inputs(gamma=0.5, T=2, zeta=0.1)).value
        assert v == pytest.approx(0.25, rel=1e-14)

    def test_terms_sum(self):
        b = B.bound_train_test(_inputs(gamma=0.8, T=7, zeta=0.1, epsilon=0.2, varrho=0.3))
        assert set(b.terms) == {"transition_term", "init_term", "repr_term"}
        assert b.value == pytest.approx(math.fsum(b.terms.values()), rel=1e-12)

    def test_degenerate_horizon(self):
        b = B.bound_train_test(_inputs(T=0, zeta=0.5))
        assert b.terms["transition_term"] == 0.0
        assert b.value == 0.0


class TestCompositeBounds:
    def test_concentration_halves_when_n_quadruples(self):
        a = B.concentration_term(_inputs(n=100), 3.0)
        b = B.concentration_term(_inputs(n=400), 3.0)
        assert b == pytest.approx(a / 2, rel=1e-14)

    def test_generalization_pure_concentration(self):
        b = B.bound_generalization(_inputs(n=50, delta=0.1), 0.0, 3.0)
        assert b.value == pytest.approx(3.0 * math.sqrt(math.log(10) / 50), rel=1e-14)
        assert b.big_o_constants == {"concentration_constant": 3.0}

    def test_generalization_dominates_train_test(self):
        inp = _inputs(zeta=0.1, epsilon=0.1, varrho=0.1, n=10)
        assert B.bound_generalization(inp, 0.2).value >= B.bound_train_test(inp).value

    def test_final_linear_in_K_and_sqrt_m(self):
        inp = _inputs(n=64, m=4)
        r1 = B.bound_final(inp).terms["rademacher_term"]
        r2 = B.bound_final(inp.replace(constants=_consts(K=2))).terms["rademacher_term"]
        r3 = B.bound_final(inp.replace(m=16)).terms["rademacher_term"]
        assert r2 == pytest.approx(2 * r1, rel=1e-14)
        assert r3 == pytest.approx(2 * r1, rel=1e-14)

    def test_final_dominates_train_test(self):
        inp = _inputs(zeta=0.2, n=10, m=3)
        assert B.bound_final(inp).value >= B.bound_train_test(inp).value

    def test_reward_shift(self):
        inp = _inputs(gamma=0.5, T=2, epsilon_r=0.0)
        base = B.bound_train_test(inp.replace(zeta=0.1))
        assert B.bound_reward_shift(inp, base).value == pytest.approx(base.value, rel=1e-15)
        added = B.bound_reward_shift(inp.replace(epsilon_r=0.1), base).value - base.value
        assert added == pytest.approx(0.175, rel=1e-12)

    def test_scaled(self):
        b = B.bound_train_test(_inputs(zeta=0.1, epsilon=0.1)).scaled(0.01)
        assert b.value == pytest.approx(math.fsum(b.terms.values()), rel=1e-12)


_fields = st.fixed_dictionaries({
    "eta": st.floats(0, 2), "sigma2": st.floats(0, 2), "zeta": st.floats(0, 2),
    "epsilon": st.floats(0, 2), "varrho": st.floats(0, 2), "epsilon_r": st.floats(0, 2),
    "n": st.integers(1, 10_000), "m": st.integers(1, 50), "T": st.integers(0, 60),
    "delta": st.floats(0.01, 0.99), "gamma": st.floats(0, 0.99),
})


def _all_values(inp):
    tt = B.bound_train_test(inp)
    return {
        "linear": B.bound_linear_noise(inp).value,
        "stochastic": B.bound_stochastic_distractor(inp).value,
        "train_test": tt.value,
        "generalization": B.bound_generalization(inp, 0.1).value,
        "final": B.bound_final(inp).value,
        "reward": B.bound_reward_shift(inp, tt).value,
    }


class TestMonotonicity:
    @settings(max_examples=200, deadline=None)
    @given(f=_fields, K=st.floats(0.1, 5),
           which=st.sampled_from(["eta", "sigma2", "zeta", "epsilon", "varrho", "epsilon_r", "m", "T", "K"]))
    def test_nondecreasing(self, f, K, which):
        lo = _inputs(constants=_consts(K=K, L_t1=0.6, L_t2=0.3), **f)
        if which == "K":
            hi = lo.replace(constants=_consts(K=K * 1.5, L_t1=0.6, L_t2=0.3))
        elif which in ("m", "T"):
            hi = lo.replace(**{which: getattr(lo, which) + 1})
        else:
            hi = lo.replace(**{which: getattr(lo, which) + 0.25})
        a, b = _all_values(lo), _all_values(hi)
        for k in a:
            assert b[k] >= a[k] * (1 - 1e-12), k

    @settings(max_examples=200, deadline=None)
    @given(f=_fields, which=st.sampled_from(["n", "delta"]))
    def test_nonincreasing(self, f, which):
        lo = _inputs(**f)
        hi = lo.replace(n=lo.n * 2) if which == "n" else lo.replace(delta=min(0.999, lo.delta * 1.01))
        a, b = _all_values(lo), _all_values(hi)
        for k in a:
            assert b[k] <= a[k] * (1 + 1e-12), k

    @settings(max_examples=200, deadline=None)
    @given(f=_fields)
    def test_terms_sum_to_value(self, f):
        inp = _inputs(**f)
        tt = B.bound_train_test(inp)
        for b in (tt, B.bound_stochastic_distractor(inp), B.bound_generalization(inp, 0.3),
                  B.bound_final(inp), B.bound_reward_shift(inp, tt)):
            assert b.value == pytest.approx(math.fsum(b.terms.values()), rel=1e-12, abs=0)
