import math

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aimarket.reputation import (
    Rating,
    ReputationParams,
    apply_restriction,
    detect_deviant_reviewer,
    logistic_score,
    majority_rating,
    rating_value,
    reputation_score,
    restriction_duration,
)


def oracle(total, theta="0.1"):
    mpmath.mp.dps = 40
    return float(100 / (1 + mpmath.exp(-mpmath.mpf(theta) * total)))


def test_rating_values():
    assert [rating_value(r) for r in (Rating.GOOD, Rating.FAIR, Rating.BAD)] == [1, 0, -1]


def test_empty_is_fifty():
    assert reputation_score({}) == 50.0


@pytest.mark.parametrize("rating, total", [(Rating.GOOD, 10), (Rating.BAD, -10)])
def test_ten_uniform_ratings(rating, total):
    score = reputation_score({f"c{i}": rating for i in range(10)})
    assert abs(score - oracle(total)) < 1e-9
    assert abs(score - (73.105857863 if total > 0 else 26.894142137)) < 1e-8


@given(st.integers(-5000, 5000), st.sampled_from(["0.01", "0.1", "0.5", "2"]))
def test_logistic_matches_oracle_and_stays_bounded(total, theta):
    s = logistic_score(total, float(theta))
    assert 0.0 <= s <= 100.0
    assert math.isclose(s, oracle(total, theta), rel_tol=1e-12, abs_tol=1e-12)


@given(st.lists(st.sampled_from(list(Rating)), max_size=40))
def test_good_bad_mirror(ratings):
    flip = {Rating.GOOD: Rating.BAD, Rating.BAD: Rating.GOOD, Rating.FAIR: Rating.FAIR}
    a = reputation_score({f"c{i}": r for i, r in enumerate(ratings)})
    b = reputation_score({f"c{i}": flip[r] for i, r in enumerate(ratings)})
    assert abs(a + b - 100) < 1e-9


def test_theta_must_be_positive():
    with pytest.raises(ValueError):
        reputation_score({}, theta=0)
    with pytest.raises(ValueError):
        ReputationParams(theta=-1)


def test_majority():
    assert majority_rating([Rating.GOOD, Rating.GOOD, Rating.BAD]) is Rating.GOOD
    assert majority_rating([Rating.GOOD, Rating.BAD]) is None  # too few raters
    assert majority_rating([Rating.GOOD, Rating.BAD, Rating.FAIR]) is None  # tie


def _history(n, disagree):
    hist = [(f"s{i}", Rating.BAD if i < disagree else Rating.GOOD) for i in range(n)]
    majorities = {f"s{i}": Rating.GOOD for i in range(n)}
    return hist, majorities


def test_deviant_detected():
    hist, maj = _history(10, 8)
    assert detect_deviant_reviewer(hist, maj, ReputationParams())


def test_agreeing_reviewer_not_flagged():
    hist, maj = _history(30, 0)
    assert not detect_deviant_reviewer(hist, maj, ReputationParams())


def test_too_few_samples():
    hist, maj = _history(2, 2)
    assert not detect_deviant_reviewer(hist, maj, ReputationParams())


def test_services_without_majority_are_ignored():
    hist, maj = _history(12, 12)
    maj = {k: (None if i % 2 else v) for i, (k, v) in enumerate(maj.items())}
    assert not detect_deviant_reviewer(hist, maj, ReputationParams())


def test_restriction_doubles():
    p = ReputationParams(base_restriction=100)
    s1 = apply_restriction(None, 10, p, "x")
    assert (s1.until, s1.level) == (110, 0)
    s2 = apply_restriction(s1, 500, p)
    assert (s2.until - 500, s2.level) == (200, 1)
    s3 = apply_restriction(s2, 1000, p)
    assert (s3.until - 1000, s3.level) == (400, 2)
    assert [restriction_duration(k, p) for k in range(3)] == [100, 200, 400]
