import json

import numpy as np
import pytest

from pmdlab import simplex
from pmdlab.verify import MUTATIONS, enumerate_optimal_values, mutated, projection_oracle, verify_suite


@pytest.fixture(scope="module")
def quick_report():
    return verify_suite("quick", seed=0)


def test_quick_scope_passes(quick_report):
    assert quick_report.passed, quick_report.failed_checks()
    assert all(c.n_cases > 0 for c in quick_report.checks.values())


@pytest.mark.parametrize("name, check", [("kl-sign", "kl_step"), ("projection-off-by-one", "projection")])
def test_mutations_are_caught(tmp_path, name, check):
    with mutated(name):
        report = verify_suite("quick", seed=0, out_dir=tmp_path)
    assert not report.passed
    assert check in report.failed_checks()
    doc = json.loads((tmp_path / f"counterexample-{check}.json").read_text())
    assert {"instance_index", "check"} <= set(doc)


def test_mutation_is_undone():
    v = np.array([0.9, 0.8, -1.0])
    with mutated("projection-off-by-one"):
        pass
    np.testing.assert_allclose(simplex.project_simplex(v), projection_oracle(v), atol=1e-12)
    assert set(MUTATIONS) == {"kl-sign", "projection-off-by-one"}


def test_unknown_mutation():
    with pytest.raises(ValueError, match="unknown mutation"):
        with mutated("nope"):
            pass


def test_enumeration_on_one_state():
    from pmdlab.mdp import Dmdp

    mdp = Dmdp(np.ones((1, 2, 1)), np.array([[0.3, 0.1]]), 0.5)
    np.testing.assert_allclose(enumerate_optimal_values(mdp), [0.2])
