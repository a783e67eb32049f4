"""The portable RNG must be stable forever: these values are frozen."""

from simquery.rng import PortableRng, derive_seed, fnv1a64, mix64


def test_fnv1a64_known_values():
    # Published FNV-1a test vectors.
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_splitmix64_reference_sequence():
    # First outputs of splitmix64 seeded with 1234567; cross-checked against
    # the reference C implementation.
    rng = PortableRng(1234567)
    assert rng.next_u64() == 6457827717110365317
    assert rng.next_u64() == 3203168211198807973
    assert rng.next_u64() == 9817491932198370423


def test_mix64_is_deterministic_bijection_sample():
    seen = {mix64(i) for i in range(1000)}
    assert len(seen) == 1000


def test_derive_seed_stable_and_label_sensitive():
    assert derive_seed(42, "a") == derive_seed(42, "a")
    assert derive_seed(42, "a") != derive_seed(42, "b")
    assert derive_seed(42, "a", "b") != derive_seed(42, "ab")


def test_randbelow_range_and_determinism():
    rng = PortableRng(9)
    values = [rng.randbelow(7) for _ in range(2000)]
    assert set(values) == set(range(7))
    replay = PortableRng(9)
    assert values == [replay.randbelow(7) for _ in range(2000)]


def test_sample_positions_distinct_and_full():
    rng = PortableRng(3)
    got = rng.sample_positions(10, 10)
    assert sorted(got) == list(range(10))
    got5 = PortableRng(3).sample_positions(10, 5)
    assert got[:5] == got5


def test_uniform01_open_interval():
    rng = PortableRng(17)
    for _ in range(1000):
        u = rng.uniform01()
        assert 0.0 < u < 1.0
