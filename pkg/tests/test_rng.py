import math

from hypothesis import given, settings, strategies as st

from leadapt.rng import Stream, StreamSet


def test_same_seed_same_sequence():
    a = Stream(42, "motion")
    b = Stream(42, "motion")
    assert [a.next_u64() for _ in range(100)] == [b.next_u64() for _ in range(100)]


def test_named_streams_are_independent():
    s = StreamSet(42)
    xs = [s.get("perception").random() for _ in range(50)]
    ys = [s.get("user").random() for _ in range(50)]
    assert xs != ys
    # Drawing from one stream must not perturb the other.
    t = StreamSet(42)
    t.get("user")  # created first this time
    xs2 = [t.get("perception").random() for _ in range(50)]
    assert xs == xs2


def test_different_seeds_differ():
    assert Stream(1, "x").next_u64() != Stream(2, "x").next_u64()


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25)
def test_random_unit_interval(seed):
    s = Stream(seed, "u")
    for _ in range(200):
        v = s.random()
        assert 0.0 <= v < 1.0


def test_uniform_moments():
    s = Stream(7, "m")
    xs = [s.uniform(-2.0, 2.0) for _ in range(20000)]
    mean = sum(xs) / len(xs)
    var = sum((x - mean) ** 2 for x in xs) / len(xs)
    assert abs(mean) < 0.05
    assert abs(var - 4.0 / 3.0) < 0.05


def test_normal_moments():
    s = Stream(11, "n")
    xs = [s.normal(1.0, 2.0) for _ in range(20000)]
    mean = sum(xs) / len(xs)
    std = math.sqrt(sum((x - mean) ** 2 for x in xs) / len(xs))
    assert abs(mean - 1.0) < 0.06
    assert abs(std - 2.0) < 0.06


def test_poisson_mean():
    s = Stream(13, "p")
    lam = 3.0
    xs = [s.poisson(lam) for _ in range(20000)]
    assert abs(sum(xs) / len(xs) - lam) < 0.1


def test_poisson_zero_rate():
    s = Stream(1, "p")
    assert all(s.poisson(0.0) == 0 for _ in range(10))


def test_randint_bounds():
    s = Stream(3, "r")
    vals = {s.randint(5) for _ in range(500)}
    assert vals == {0, 1, 2, 3, 4}


def test_sequence_frozen():
    # Regression pin: log replay depends on these exact draws never changing.
    s = Stream(1234, "pin")
    assert [s.next_u64() for _ in range(4)] == [
        6890655199314530362,
        10265438021694918624,
        9882131939443849422,
        5438176256838648287,
    ]
    u = Stream(99, "user")
    assert [u.random() for _ in range(3)] == [
        0.19988420259779272,
        0.17566699554218557,
        0.31220270554093255,
    ]
