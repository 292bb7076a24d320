import pytest
from hypothesis import given
from hypothesis import strategies as st

from aliveness.metrics import Confusion, metrics, score


def test_table2_arithmetic():
    s = metrics(Confusion(tp=2, fp=1, fn=1, tn=6))
    assert (s.precision, s.recall, s.accuracy, s.f1) == (2 / 3, 2 / 3, 0.8, 2 / 3)
    assert s.degenerate == ()


def test_perfect_and_degenerate():
    s = metrics(Confusion(tp=3, tn=4))
    assert (s.precision, s.recall, s.accuracy, s.f1) == (1.0, 1.0, 1.0, 1.0)
    s = metrics(Confusion(tp=0, fp=2, fn=3, tn=1))
    assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)
    assert "f1" in s.degenerate
    s = metrics(Confusion(tn=5))
    assert set(s.degenerate) == {"precision", "recall", "f1"} and s.accuracy == 1.0


def test_errors():
    with pytest.raises(ValueError):
        metrics(Confusion())
    with pytest.raises(ValueError):
        Confusion(tp=-1)
    with pytest.raises(ValueError):
        score("auc", 1, 1, 1, 1)
    with pytest.raises(ValueError):
        Confusion.from_predictions([True], [True, False])


def test_from_predictions():
    c = Confusion.from_predictions([True, True, False, False, True], [True, False, True, False, True])
    assert (c.tp, c.fp, c.fn, c.tn) == (2, 1, 1, 1)


counts = st.integers(0, 50)


@given(counts, counts, counts, counts)
def test_metric_identities(tp, fp, fn, tn):
    if tp + fp + fn + tn == 0:
        return
    s = metrics(Confusion(tp, fp, fn, tn))
    for v in (s.precision, s.recall, s.accuracy, s.f1):
        assert 0.0 <= v <= 1.0
    if s.precision + s.recall > 0:
        assert s.f1 == 2 * s.precision * s.recall / (s.precision + s.recall)
    again = metrics(Confusion(tp, fp, fn, tn))
    assert again == s
    assert s.f1 == score("f1", tp, fp, fn, tn) and s.accuracy == score("accuracy", tp, fp, fn, tn)
