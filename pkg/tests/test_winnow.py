import io

import numpy as np
import pytest

from wtmrd.trust import TrustRecord
from wtmrd.winnow import (FrozenModelError, Label, WinnowModel, classify_network, featurize,
                          thermometer, train_to_convergence)


def record(norm, fwd, drop, node=0):
    return TrustRecord(node, 0, norm, fwd, drop, 0.0, 0, relayed=1)


def test_featurize_extremes():
    assert featurize(record(1.0, 1.0, 0.0)) == (1,) * 12
    assert featurize(record(0.0, 0.0, 1.0)) == (0,) * 12


def test_featurize_follows_strict_threshold_rule():
    # c > k/4 for k = 0..3: 0.6 -> 1110, 0.3 -> 1100, 1 - 0.5 -> 1100
    assert featurize(record(0.6, 0.3, 0.5)) == (1, 1, 1, 0, 1, 1, 0, 0, 1, 1, 0, 0)


def test_thermometer_boundaries_are_strict():
    assert thermometer(0.25, 4) == (1, 0, 0, 0)
    assert thermometer(0.2500001, 4) == (1, 1, 0, 0)
    assert thermometer(0.0, 4) == (0, 0, 0, 0)


def test_featurize_needs_two_bins():
    with pytest.raises(ValueError):
        featurize(record(0.5, 0.5, 0.5), bins=1)


def test_predict_examples():
    m = WinnowModel.initial(12)
    assert m.threshold == 6
    assert m.predict((1,) * 7 + (0,) * 5) == Label.NORMAL
    assert m.predict((0,) * 12) == Label.MALICIOUS
    assert m.predict((1,) * 6 + (0,) * 6) == Label.MALICIOUS


def test_predict_length_mismatch():
    with pytest.raises(ValueError):
        WinnowModel.initial(4).predict((1, 0))


def test_promotion_and_demotion_examples():
    m = WinnowModel((1.0, 1.0, 1.0, 1.0), 2.0)
    up = m.update((1, 0, 1, 0), Label.NORMAL)
    assert up.weights == (2.0, 1.0, 2.0, 1.0)
    down = m.update((1, 1, 1, 0), Label.MALICIOUS)
    assert down.weights == (0.5, 0.5, 0.5, 1.0)
    assert up.mistakes == down.mistakes == 1
    assert up.threshold == down.threshold == 2.0


def test_correct_prediction_is_a_no_op():
    m = WinnowModel((1.0, 1.0, 1.0, 1.0), 2.0)
    assert m.update((1, 1, 1, 0), Label.NORMAL) is m


def test_train_streams():
    m = WinnowModel.initial(4)
    assert m.train([]) == m
    same = [((1, 1, 1, 1), Label.NORMAL)] * 5
    assert m.train(same).mistakes == 0


def test_frozen_model_rejects_updates():
    m = WinnowModel.initial(4).freeze()
    with pytest.raises(FrozenModelError):
        m.update((1, 0, 0, 0), Label.NORMAL)


def test_classify_network():
    model = WinnowModel.initial(12).freeze()
    recs = [record(1.0, 1.0, 0.0, node=i) for i in range(5)]
    assert classify_network(model, recs) == {i: Label.NORMAL for i in range(5)}
    assert classify_network(model, []) == {}
    with pytest.raises(RuntimeError):
        classify_network(WinnowModel.initial(12), recs)


def test_disjunction_target_converges_within_bound():
    rng = np.random.default_rng(11)
    x = (rng.random((600, 64)) < 0.3).astype(np.uint8)
    y = np.where(x[:, 1] | x[:, 3], 1, -1)
    model, passes = train_to_convergence(WinnowModel.initial(64), x, y)
    assert model.mistakes <= 8 * 2 * (1 + 6)
    assert all(model.predict(row) == lab for row, lab in zip(x.tolist(), y.tolist()))
    assert passes >= 1


def test_model_csv_snapshot():
    buf = io.StringIO()
    WinnowModel((2.0, 0.5), 1.0, mistakes=3, frozen=True).write_csv(buf)
    assert buf.getvalue().splitlines() == [
        "key,value", "threshold,1.0", "mistakes,3", "frozen,1", "bitIndex,weight", "0,2.0", "1,0.5"]
