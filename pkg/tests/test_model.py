import json

import numpy as np
import pytest

from camdp import CmdpInstance, MixturePolicy
from camdp.model import (
    as_stochastic,
    check_deterministic_policy,
    check_stochastic_policy,
    deterministic_to_stochastic,
)


def valid_kwargs():
    return dict(
        n_states=2, n_actions=2,
        kernel=[[[0.5, 0.5], [1.0, 0.0]], [[0.0, 1.0], [0.25, 0.75]]],
        reward=[[0.1, 0.9], [0.5, 0.5]],
        constraint=[[1.0, 0.0], [0.3, 0.7]],
        threshold=0.4,
        start=[0.6, 0.4],
    )


def test_valid_instance_roundtrips(tmp_path):
    inst = CmdpInstance(**valid_kwargs())
    path = tmp_path / "inst.json"
    inst.save(path)
    back = CmdpInstance.load(path)
    assert np.array_equal(back.kernel, inst.kernel)
    assert np.array_equal(back.reward, inst.reward)
    assert np.array_equal(back.constraint, inst.constraint)
    assert np.array_equal(back.start, inst.start)
    assert back.threshold == inst.threshold
    # lossless float text round trip
    assert json.loads(path.read_text()) == inst.to_dict()


def test_kernel_rows_must_sum_to_one():
    kw = valid_kwargs()
    kw["kernel"][0][0] = [0.5, 0.499]
    with pytest.raises(ValueError, match="sums to"):
        CmdpInstance(**kw)


def test_negative_kernel_entry_rejected():
    kw = valid_kwargs()
    kw["kernel"][0][0] = [1.5, -0.5]
    with pytest.raises(ValueError, match="nonnegative"):
        CmdpInstance(**kw)


@pytest.mark.parametrize("field,value", [
    ("reward", [[0.1, 1.2], [0.5, 0.5]]),
    ("constraint", [[-0.1, 0.0], [0.3, 0.7]]),
])
def test_reward_range_enforced(field, value):
    kw = valid_kwargs()
    kw[field] = value
    with pytest.raises(ValueError, match="lie in"):
        CmdpInstance(**kw)


def test_threshold_and_start_validated():
    kw = valid_kwargs()
    kw["threshold"] = 1.5
    with pytest.raises(ValueError):
        CmdpInstance(**kw)
    kw = valid_kwargs()
    kw["start"] = [0.7, 0.7]
    with pytest.raises(ValueError):
        CmdpInstance(**kw)


def test_missing_json_field():
    d = CmdpInstance(**valid_kwargs()).to_dict()
    del d["kernel"]
    with pytest.raises(ValueError, match="missing field"):
        CmdpInstance.from_dict(d)


def test_policy_validation():
    inst = CmdpInstance(**valid_kwargs())
    assert np.array_equal(check_deterministic_policy([1, 0], inst), [1, 0])
    with pytest.raises(ValueError):
        check_deterministic_policy([2, 0], inst)
    with pytest.raises(ValueError):
        check_deterministic_policy([0], inst)
    pol = [[0.5, 0.5], [1.0, 0.0]]
    assert check_stochastic_policy(pol, inst).shape == (2, 2)
    with pytest.raises(ValueError):
        check_stochastic_policy([[0.5, 0.6], [1.0, 0.0]], inst)
    one_hot = deterministic_to_stochastic([1, 0], 2)
    assert np.array_equal(one_hot, [[0.0, 1.0], [1.0, 0.0]])
    assert np.array_equal(as_stochastic([1, 0], inst), one_hot)


def test_mixture_invariants():
    member = np.array([[1.0, 0.0], [1.0, 0.0]])
    MixturePolicy(weights=[0.5, 0.5], members=[member, member])
    with pytest.raises(ValueError):
        MixturePolicy(weights=[0.5, 0.4], members=[member, member])
    with pytest.raises(ValueError):
        MixturePolicy(weights=[1.0], members=[member, member])


def test_reward_selector():
    inst = CmdpInstance(**valid_kwargs())
    assert np.array_equal(inst.reward_values("r"), inst.reward)
    assert np.array_equal(inst.reward_values("c"), inst.constraint)
    custom = np.full((2, 2), 0.3)
    assert np.array_equal(inst.reward_values(custom), custom)
    with pytest.raises(ValueError):
        inst.reward_values("x")
