import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from pmdlab.estimators import PolicyMirrorDescent, ProjectedPolicyGradient
from pmdlab.instances import InstanceSpec, generate, save
from pmdlab.sampling import ExactOracle, InjectedNoise
from pmdlab.solvers import policy_iteration


@pytest.fixture
def mdp():
    return generate(InstanceSpec(num_states=4, num_actions=3, gamma=0.8, seed=11))


def test_params_and_clone():
    est = PolicyMirrorDescent(divergence="euclidean", n_iter=7)
    assert est.get_params()["divergence"] == "euclidean"
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert twin.set_params(n_iter=3).n_iter == 3


def test_unfitted_raises():
    with pytest.raises(NotFittedError):
        PolicyMirrorDescent().predict()


@pytest.mark.parametrize("est, tol", [
    (PolicyMirrorDescent(n_iter=60), 1e-8),
    # the default gradient step is conservative, so only the greedy actions settle quickly
    (ProjectedPolicyGradient(n_iter=2000), 5e-2),
])
def test_fit_recovers_optimal_actions(mdp, est, tol):
    pi_star, v_star, _ = policy_iteration(mdp)
    est.fit(mdp)
    np.testing.assert_array_equal(est.predict(), np.argmax(pi_star, axis=1))
    proba = est.predict_proba()
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert est.score() == pytest.approx(-v_star.mean(), abs=tol)
    assert est.score() <= -v_star.mean() + 1e-12
    assert est.n_iter_ == len(est.trace_.records) - 1


def test_fit_from_path(tmp_path, mdp):
    path = tmp_path / "mdp.json"
    save(mdp, path, rho=np.array([0.1, 0.2, 0.3, 0.4]))
    est = PolicyMirrorDescent(n_iter=5).fit(str(path))
    np.testing.assert_array_equal(est.rho_, [0.1, 0.2, 0.3, 0.4])


def test_exact_oracle_matches_default(mdp):
    a = PolicyMirrorDescent(n_iter=20).fit(mdp)
    b = PolicyMirrorDescent(n_iter=20, q_oracle=ExactOracle()).fit(mdp)
    np.testing.assert_array_equal(a.policy_, b.policy_)


def test_noisy_oracle_records_error(mdp):
    est = PolicyMirrorDescent(n_iter=10, q_oracle=InjectedNoise(0.01, 2)).fit(mdp)
    assert 0 < est.trace_.records[0].q_err_inf <= 0.01


def test_rejects_non_mdp():
    with pytest.raises(TypeError):
        PolicyMirrorDescent().fit(np.zeros((3, 3)))
