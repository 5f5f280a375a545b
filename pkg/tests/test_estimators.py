import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from volput import AmericanPutPricer, CallablePutPricer, KnockoutPutPricer
from volput.pricing import solve_american, solve_callable, solve_knockout
from volput.validation import check_params, check_state

from conftest import MEAN_REVERTING, make_params

X = np.array([0.1, 0.3, 0.45, 0.5, 2.0])


@pytest.mark.parametrize(
    "cls,solver",
    [(AmericanPutPricer, solve_american), (KnockoutPutPricer, solve_knockout), (CallablePutPricer, solve_callable)],
)
def test_matches_functional_api(cls, solver):
    est = cls(delta=0.05)
    assert est.fit() is est
    sol = solver(make_params(MEAN_REVERTING, 0.05))
    np.testing.assert_array_equal(est.predict(X), sol.value(X))
    np.testing.assert_array_equal(est.predict(X.reshape(-1, 1)), sol.value(X))
    assert est.boundary_ == sol.boundary_s


def test_params_roundtrip():
    est = CallablePutPricer(alpha=0.2, delta=0.01)
    assert est.get_params()["alpha"] == 0.2
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert not hasattr(twin, "solution_")
    est.set_params(delta=0.3)
    assert est.delta == 0.3


def test_callable_attributes():
    est = CallablePutPricer(delta=0.2).fit()
    assert est.regime_ == "AmericanEquivalent"
    assert est.delta_star_ < 0.2
    assert est.to_dict()["regime"] == "AmericanEquivalent"


def test_not_fitted():
    with pytest.raises(NotFittedError):
        CallablePutPricer().predict(X)


@pytest.mark.parametrize("bad", [[0.1, np.nan], [[0.1, 0.2]], [-0.1], [0.0]])
def test_invalid_states(bad):
    est = AmericanPutPricer().fit()
    with pytest.raises(ValueError):
        est.predict(bad)


def test_invalid_params_at_fit():
    with pytest.raises(ValueError):
        KnockoutPutPricer(k=-0.5).fit()
    with pytest.raises(TypeError):
        KnockoutPutPricer(k="0.5").fit()


def test_slope():
    est = AmericanPutPricer().fit()
    assert est.slope([0.01])[0] == -1.0


def test_check_helpers():
    np.testing.assert_array_equal(check_state(0.3), [0.3])
    with pytest.raises(ValueError, match="missing"):
        check_params({"alpha": 0.1})
