import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridprec.channel import ArrayGeometry, ChannelRealization, generate_channel
from hybridprec.errors import ContractViolation, DegenerateInputError, InvalidInputError
from hybridprec.precoding import (
    DYNAMIC_SUBARRAY,
    FIXED_SUBARRAY,
    FULLY_CONNECTED,
    DigitalPrecoder,
    HybridPrecoder,
    RfPrecoder,
    SnrPoint,
    composite_power,
    fully_digital_rf,
    make_hybrid,
    normalize_power,
    sum_se,
    user_se,
    validate_rf,
)
from hybridprec.rf_design import dynamic_subarray_rf, left_singular_basis


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _se_oracle(H, F_rf, F_d, P, sigma2):
    """Straightforward scalar evaluation of the per-user rate formula."""
    n, k = H.shape
    rates = []
    for user in range(k):
        h = H[:, user]
        terms = []
        for stream in range(k):
            v = F_rf @ F_d[:, stream]
            acc = 0j
            for i in range(n):
                acc += np.conj(h[i]) * v[i]
            terms.append(abs(acc) ** 2)
        interference = sum(terms[l] for l in range(k) if l != user)
        rates.append(math.log2(1 + terms[user] / (interference + sigma2 / P)))
    return rates


def test_mrt_single_user_closed_form():
    rng = np.random.default_rng(0)
    h = _crandn(rng, 6)
    ch = ChannelRealization.from_matrix(h)
    pre = make_hybrid(fully_digital_rf(6), DigitalPrecoder(h[:, None]))
    snr = SnrPoint(2.0, 0.5)
    expected = math.log2(1 + np.linalg.norm(h) ** 2 * 4.0)
    assert user_se(ch, pre, snr, 0, validate=True) == pytest.approx(expected, rel=1e-12)
    assert sum_se(ch, pre, snr) == pytest.approx(expected, rel=1e-12)


def test_orthogonal_precoder_gives_zero_rate():
    h = np.array([1.0, 1j, 0.0])
    f = np.array([1j, 1.0, 0.0])  # h^H f = 0
    ch = ChannelRealization.from_matrix(h)
    pre = make_hybrid(fully_digital_rf(3), DigitalPrecoder(f[:, None]))
    assert user_se(ch, pre, SnrPoint(1, 1), 0) == 0.0


def test_user_se_matches_scalar_oracle():
    rng = np.random.default_rng(12)
    H = _crandn(rng, 8, 2)
    F_rf = np.exp(1j * rng.uniform(-np.pi, np.pi, (8, 3)))
    F_d = _crandn(rng, 3, 2)
    rf = RfPrecoder(F_rf)
    pre = make_hybrid(rf, DigitalPrecoder(F_d))
    snr = SnrPoint(1.0, 0.3)
    ch = ChannelRealization.from_matrix(H)
    expected = _se_oracle(H, F_rf, pre.digital.matrix, 1.0, 0.3)
    for k in range(2):
        assert user_se(ch, pre, snr, k, validate=True) == pytest.approx(expected[k], rel=1e-12)
    assert sum_se(ch, pre, snr) == pytest.approx(sum(expected), rel=1e-12)


def test_sum_se_is_sum_of_user_rates():
    rng = np.random.default_rng(3)
    ch = generate_channel(ArrayGeometry(16), 4, 3, rng)
    pre = make_hybrid(fully_digital_rf(16), DigitalPrecoder(_crandn(rng, 16, 4)))
    snr = SnrPoint.from_db(5)
    assert sum_se(ch, pre, snr) == pytest.approx(sum(user_se(ch, pre, snr, k) for k in range(4)), abs=1e-12)


def test_zero_digital_precoder_has_zero_rate():
    ch = generate_channel(ArrayGeometry(4), 2, 1, np.random.default_rng(0))
    pre = make_hybrid(fully_digital_rf(4), DigitalPrecoder(np.zeros((4, 2))), normalize=False)
    assert sum_se(ch, pre, SnrPoint(1, 1)) == 0.0


def test_validation_mode_rejects_unnormalized():
    ch = generate_channel(ArrayGeometry(4), 2, 1, np.random.default_rng(0))
    pre = make_hybrid(fully_digital_rf(4), DigitalPrecoder(2 * np.ones((4, 2))), normalize=False)
    with pytest.raises(ContractViolation):
        sum_se(ch, pre, SnrPoint(1, 1), validate=True)
    # unchecked mode still evaluates
    assert sum_se(ch, pre, SnrPoint(1, 1)) >= 0


def test_user_index_and_dimension_checks():
    ch = generate_channel(ArrayGeometry(4), 2, 1, np.random.default_rng(0))
    pre = make_hybrid(fully_digital_rf(4), DigitalPrecoder(np.ones((4, 2))))
    with pytest.raises(InvalidInputError):
        user_se(ch, pre, SnrPoint(1, 1), 2)
    other = make_hybrid(fully_digital_rf(5), DigitalPrecoder(np.ones((5, 2))))
    with pytest.raises(InvalidInputError):
        sum_se(ch, other, SnrPoint(1, 1))
    with pytest.raises(InvalidInputError):
        HybridPrecoder(fully_digital_rf(4), DigitalPrecoder(np.ones((3, 2))))


@pytest.mark.parametrize("p, s2", [(0, 1), (1, 0), (-1, 1)])
def test_snr_point_requires_positive_powers(p, s2):
    with pytest.raises(InvalidInputError):
        SnrPoint(p, s2)


def test_snr_from_db():
    s = SnrPoint.from_db(20)
    assert s.transmit_power == 1.0
    assert s.snr == pytest.approx(100.0)


@given(phi=st.floats(-np.pi, np.pi), seed=st.integers(0, 2**32 - 1))
@settings(max_examples=50)
def test_se_invariant_to_common_phase(phi, seed):
    rng = np.random.default_rng(seed)
    ch = generate_channel(ArrayGeometry(8), 3, 2, rng)
    rf = RfPrecoder(np.exp(1j * rng.uniform(-np.pi, np.pi, (8, 3))))
    F_d = _crandn(rng, 3, 3)
    a = make_hybrid(rf, DigitalPrecoder(F_d))
    b = make_hybrid(rf, DigitalPrecoder(np.exp(1j * phi) * F_d))
    snr = SnrPoint.from_db(7)
    for k in range(3):
        assert abs(user_se(ch, a, snr, k) - user_se(ch, b, snr, k)) <= 1e-10


def test_se_monotone_in_snr():
    rng = np.random.default_rng(4)
    ch = generate_channel(ArrayGeometry(16), 4, 4, rng)
    pre = make_hybrid(fully_digital_rf(16), DigitalPrecoder(_crandn(rng, 16, 4)))
    values = [sum_se(ch, pre, SnrPoint.from_db(db)) for db in np.linspace(-20, 40, 61)]
    assert np.all(np.diff(values) >= 0)


def test_normalize_scalar_case():
    # tr = 4, so F_D / sqrt(4) = [1]; unit power is the binding postcondition
    out = normalize_power(RfPrecoder(np.ones((1, 1))), DigitalPrecoder([[2.0]]))
    np.testing.assert_allclose(out.matrix, [[1.0]])
    assert composite_power(RfPrecoder(np.ones((1, 1))), out) == pytest.approx(1.0)


def test_normalize_random_trace_and_idempotence():
    rng = np.random.default_rng(9)
    rf = RfPrecoder(np.exp(1j * rng.uniform(-np.pi, np.pi, (16, 4))))
    d = normalize_power(rf, DigitalPrecoder(_crandn(rng, 4, 4)))
    F = rf.matrix @ d.matrix
    assert abs(np.trace(F @ F.conj().T).real - 1.0) <= 1e-9
    again = normalize_power(rf, d)
    assert np.max(np.abs(again.matrix - d.matrix)) <= 1e-12


@given(c=st.floats(1e-6, 1e6), seed=st.integers(0, 2**32 - 1))
@settings(max_examples=50)
def test_normalize_is_scale_invariant(c, seed):
    rng = np.random.default_rng(seed)
    rf = RfPrecoder(np.exp(1j * rng.uniform(-np.pi, np.pi, (8, 2))))
    F_d = _crandn(rng, 2, 3)
    a = normalize_power(rf, DigitalPrecoder(F_d)).matrix
    b = normalize_power(rf, DigitalPrecoder(c * F_d)).matrix
    assert np.max(np.abs(a - b)) <= 1e-12


def test_normalize_zero_is_degenerate():
    with pytest.raises(DegenerateInputError):
        normalize_power(RfPrecoder(np.ones((4, 2))), DigitalPrecoder(np.zeros((2, 2))))
    # nonzero F_D in the null space of F_RF is also a zero composite
    rf = RfPrecoder(np.array([[1, 1], [1, 1]], dtype=complex))
    with pytest.raises(DegenerateInputError):
        normalize_power(rf, DigitalPrecoder([[1.0], [-1.0]]))


def test_composite_cached():
    rng = np.random.default_rng(1)
    rf = RfPrecoder(np.exp(1j * rng.uniform(-np.pi, np.pi, (6, 2))))
    d = DigitalPrecoder(_crandn(rng, 2, 2))
    pre = HybridPrecoder(rf, d)
    assert np.max(np.abs(pre.composite - rf.matrix @ d.matrix)) <= 1e-12
    assert composite_power(rf, d) == pytest.approx(np.linalg.norm(pre.composite) ** 2)


def test_validate_phase_of_unitary():
    rng = np.random.default_rng(2)
    Q, _ = np.linalg.qr(_crandn(rng, 8, 8))
    report = validate_rf(RfPrecoder(np.exp(1j * np.angle(Q))))
    assert report.unit_modulus_deviation < 1e-14
    assert report.ok
    assert report.semi_unitary_deviation is not None


def test_validate_flags_zero_entry():
    F = np.ones((4, 2), dtype=complex)
    F[1, 0] = 0
    report = validate_rf(RfPrecoder(F, FULLY_CONNECTED))
    assert not report.ok
    assert report.unit_modulus_deviation == 1.0


def test_validate_dynamic_partition_from_greedy():
    ch = generate_channel(ArrayGeometry(16), 4, 3, np.random.default_rng(6))
    rf = dynamic_subarray_rf(left_singular_basis(ch, 4), 4)
    report = validate_rf(rf)
    assert report.ok, report.lines()
    covered = sorted(i for s in rf.partition for i in s)
    assert covered == list(range(16))


def test_validate_partition_violations():
    F = np.zeros((4, 2), dtype=complex)
    F[[0, 1], 0] = 1
    F[[1, 2], 1] = 1
    report = validate_rf(RfPrecoder(F, DYNAMIC_SUBARRAY, partition=((0, 1), (1, 2))))
    assert not report.ok
    text = " ".join(report.partition_errors)
    assert "not covered" in text and "shared" in text

    F = np.ones((4, 2), dtype=complex)  # entries off the declared support
    report = validate_rf(RfPrecoder(F, FIXED_SUBARRAY, partition=((0, 1), (2, 3))))
    assert report.off_support_max == 1.0 and not report.ok

    report = validate_rf(RfPrecoder(F, FIXED_SUBARRAY))
    assert "no partition" in report.partition_errors[0]


def test_fully_digital_skips_unit_modulus():
    report = validate_rf(fully_digital_rf(5))
    assert report.ok
    assert "status: ok" in report.lines()
