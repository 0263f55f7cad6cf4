import numpy as np
import pytest

from app.models.purification import chained_fidelity, min_pairs, purification_table, purify_step


def closed_form(base: float, pairs: int) -> float:
    return base ** pairs / (base ** pairs + (1 - base) ** pairs)


def test_purify_step_values():
    assert purify_step(0.75, 0.75) == pytest.approx(0.9)
    assert purify_step(1.0, 0.3) == 1.0
    assert purify_step(0.0, 0.3) == 0.0

    rng = np.random.default_rng(1)
    for q in rng.uniform(0.0, 1.0, size=100):
        assert purify_step(float(q), 0.5) == float(q)


def test_purify_step_improves_above_one_half():
    grid = np.linspace(0.01, 0.99, 100)
    for f in grid:
        for b in grid:
            result = purify_step(float(f), float(b))
            assert (result > f) == (b > 0.5)
            assert (result < f) == (b < 0.5)


def test_purify_step_is_symmetric():
    rng = np.random.default_rng(3)
    for q1, q2 in rng.uniform(0.0, 1.0, size=(200, 2)):
        assert purify_step(float(q1), float(q2)) == purify_step(float(q2), float(q1))


@pytest.mark.parametrize("q1, q2", [(-0.1, 0.5), (0.5, 1.2), (0.0, 1.0)])
def test_purify_step_rejects_bad_fidelity(q1, q2):
    with pytest.raises(ValueError):
        purify_step(q1, q2)


def test_chained_fidelity():
    assert chained_fidelity(0.75, 1) == 0.75
    assert 0.986 <= chained_fidelity(0.75, 4) <= 0.988
    for base in (0.55, 0.6, 0.75, 0.9):
        for pairs in range(1, 15):
            assert chained_fidelity(base, pairs) == pytest.approx(closed_form(base, pairs), rel=1e-12)

    with pytest.raises(ValueError):
        chained_fidelity(0.75, 0)


def test_purification_table_is_cached():
    table = purification_table(0.75, 6)
    assert table is purification_table(0.75, 6)
    assert table.achieved[0] == 0.0
    for pairs in range(1, 7):
        assert table.achieved[pairs] == chained_fidelity(0.75, pairs)


def test_purification_table_at_one_half():
    table = purification_table(0.5, 10)
    assert all(value == 0.5 for value in table.achieved[1:])


def test_min_pairs_examples():
    assert min_pairs(0.75, 0.9, 10) == 2
    assert min_pairs(0.95, 0.95, 10) == 1
    assert min_pairs(0.75, 0.999, 3) is None
    assert min_pairs(0.75, 1.0, 100) is None
    assert min_pairs(0.5, 0.8, 100) is None
    assert min_pairs(0.75, 0.987, 10) == 4
    assert min_pairs(0.9, 0.8, 10) == 1
    with pytest.raises(ValueError):
        min_pairs(0.75, 0.9, 0)


def test_min_pairs_is_minimal():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        base = float(rng.uniform(0.501, 0.99))
        target = float(rng.uniform(base, 0.999))
        cap = int(rng.integers(1, 65))
        k = min_pairs(base, target, cap)
        if k is None:
            assert chained_fidelity(base, cap) < target
        else:
            assert 1 <= k <= cap
            assert chained_fidelity(base, k) >= target
            if k > 1:
                assert chained_fidelity(base, k - 1) < target
