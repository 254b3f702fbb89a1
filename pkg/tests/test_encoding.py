from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from aimarket.encoding import Keyring, encode, encode_fields, quantize


def test_known_int_layout():
    assert encode(1) == b"\x02\x00\x00\x00\x08" + (1).to_bytes(8, "big")
    assert encode(-1)[:1] == b"\x03"


def test_sets_and_dicts_are_order_independent():
    assert encode({3, 1, 2}) == encode({2, 3, 1})
    assert encode({"b": 1, "a": 2}) == encode(dict([("a", 2), ("b", 1)]))


def test_type_tags_disambiguate():
    assert encode("1") != encode(1) != encode(b"1")
    assert encode([1, 2]) != encode_fields(1, 2)


def test_float_quantization():
    assert quantize(73.1058578630005) == quantize(73.10585786300049)
    assert encode(0.1 + 0.2) == encode(0.3)


@given(st.recursive(
    st.none() | st.booleans() | st.integers(-(2**63), 2**70) | st.text(max_size=8) | st.binary(max_size=8)
    | st.fractions(max_denominator=100),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=4), inner, max_size=4),
    max_leaves=12,
))
def test_encoding_is_injective_on_roundtrip_equality(value):
    assert encode(value) == encode(value)


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
def test_distinct_ints_distinct_bytes(a, b):
    assert (encode(a) == encode(b)) == (a == b)


def test_unsupported_type():
    with pytest.raises(TypeError):
        encode(object())


def test_keyring():
    k = Keyring(b"m")
    sig = k.sign("alice", b"msg")
    assert k.verify("alice", b"msg", sig)
    assert not k.verify("bob", b"msg", sig)
    assert Keyring(b"m").key("alice") == k.key("alice")
    assert Keyring(b"n").key("alice") != k.key("alice")


def test_ints_outside_64_bit_range_encode_distinctly():
    vals = [-(2**63), -(2**63) - 1, -(2**64), 2**64 - 1, 2**64, 2**72, -(2**72)]
    assert len({encode(v) for v in vals}) == len(vals)
    assert encode(Fraction(-(2**63) - 1)) != encode(Fraction(-(2**63)))
