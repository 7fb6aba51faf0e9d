import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sskmeans.field import (
    BoundViolationError,
    FieldModulus,
    FixedPointCodec,
    ModulusMismatchError,
    choose_modulus,
    decode_sum,
    encode,
    field_add,
    field_scale,
    field_sub,
)

from oracles import is_prime_trial, next_prime_scan


@pytest.mark.parametrize(
    "n, x_max, scale, expected",
    [
        (1, 1, 1, 5),
        (10, 100, 1, 2003),
        (4, 7.5, 2, 127),
    ],
)
def test_choose_modulus_examples(n, x_max, scale, expected):
    assert choose_modulus(n, x_max, scale).p == expected


@pytest.mark.parametrize("n, x_max, scale", [(1, 1, 1), (10, 100, 1), (4, 7.5, 2), (64, 30, 1), (7, 0.3, 100)])
def test_choose_modulus_matches_trial_division_scan(n, x_max, scale):
    import math
    from decimal import Decimal

    bound = 2 * n * math.ceil(Decimal(str(x_max)) * scale) + 1
    assert choose_modulus(n, x_max, scale).p == next_prime_scan(bound)


@given(st.integers(1, 50), st.integers(1, 200), st.integers(1, 20))
@settings(max_examples=60, deadline=None)
def test_choose_modulus_prime_above_bound_and_deterministic(n, x_max, scale):
    p = choose_modulus(n, x_max, scale).p
    assert is_prime_trial(p)
    assert p > 2 * n * x_max * scale + 1
    assert choose_modulus(n, x_max, scale).p == p


def test_choose_modulus_rejects_bad_arguments():
    with pytest.raises(ValueError):
        choose_modulus(0, 1, 1)
    with pytest.raises(ValueError):
        choose_modulus(1, 0, 1)
    with pytest.raises(ValueError):
        choose_modulus(1, 1, 0)


def test_modulus_must_be_prime():
    with pytest.raises(ValueError):
        FieldModulus(15)


def test_encode_examples():
    codec10 = FixedPointCodec(10, FieldModulus(2003), 10, 10)
    assert encode(0.0, codec10).value == 0
    assert encode(-1.5, codec10).value == 1988
    codec1 = FixedPointCodec(1, FieldModulus(5), 1, 1)
    assert encode(1.0, codec1).value == 1


def test_encode_rounds_half_away_from_zero():
    codec = FixedPointCodec(10, FieldModulus(2003), 10, 10)
    assert codec.to_units(0.25) == 3
    assert codec.to_units(-0.25) == -3
    assert codec.to_units(2.35) == 24


def test_encode_out_of_range():
    codec = FixedPointCodec.for_network(3, 5.0, 1)
    with pytest.raises(BoundViolationError):
        encode(5.5, codec)


def test_decode_sum_examples():
    codec10 = FixedPointCodec(10, FieldModulus(2003), 10, 10)
    assert decode_sum(codec10.modulus.element(0), codec10) == 0.0
    assert decode_sum(codec10.modulus.element(1988), codec10) == -1.5
    codec1 = FixedPointCodec(1, FieldModulus(2003), 10, 100)
    assert decode_sum(codec1.modulus.element(7), codec1) == 7.0


def test_codec_rejects_small_modulus():
    with pytest.raises(ValueError):
        FixedPointCodec(1, FieldModulus(5), 10, 100)


def test_field_ops_examples():
    f5, f13 = FieldModulus(5), FieldModulus(13)
    assert field_add(f5.element(3), f5.element(4)).value == 2
    assert field_sub(f13.element(5), f13.element(9)).value == 9
    p = 2003
    fp = FieldModulus(p)
    assert field_scale(fp.element(1), p - 1).value == p - 1


def test_field_ops_reject_mixed_moduli():
    with pytest.raises(ModulusMismatchError):
        field_add(FieldModulus(5).element(1), FieldModulus(7).element(1))
    with pytest.raises(ModulusMismatchError):
        field_sub(FieldModulus(5).element(1), FieldModulus(7).element(1))


def test_element_must_be_reduced():
    from sskmeans.field import FieldElement

    with pytest.raises(ValueError):
        FieldElement(5, FieldModulus(5))


P_BIG = 2**127 - 1  # Mersenne prime; exercises arbitrary precision


@given(st.integers(0, P_BIG - 1), st.integers(0, P_BIG - 1))
def test_add_sub_round_trip(a, b):
    f = FieldModulus(P_BIG)
    ea, eb = f.element(a), f.element(b)
    assert (ea + eb) - eb == ea


@given(st.floats(-50, 50, allow_nan=False), st.integers(1, 1000))
def test_encode_decode_within_half_unit(x, scale):
    codec = FixedPointCodec.for_network(8, 50, scale)
    assert abs(decode_sum(encode(x, codec), codec) - x) <= 1 / (2 * scale) + 1e-12


@given(st.lists(st.floats(-20, 20, allow_nan=False), min_size=1, max_size=12), st.integers(1, 100))
def test_decode_of_field_sum_recovers_real_sum(xs, scale):
    codec = FixedPointCodec.for_network(12, 20, scale)
    total = codec.modulus.element(0)
    for x in xs:
        total = total + encode(x, codec)
    assert abs(decode_sum(total, codec) - sum(xs)) <= len(xs) / (2 * scale) + 1e-9
