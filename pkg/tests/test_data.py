import math

import numpy as np
import pytest

from privrank import (KIND_ADRR, KIND_RAW, KIND_RR, MECH_ADRR, MECH_CLASSIC_RR,
                      MECH_LAPLACE, ComparisonModel, PairwiseDataset,
                      PrivacyProfile, centered_uniform_preferences,
                      equally_spaced_preferences, generate,
                      intransitivity_report, load_csv, privatize, write_csv)

BTL = ComparisonModel("btl")


def test_preference_helpers():
    rng = np.random.default_rng(0)
    theta = centered_uniform_preferences(12, rng)
    assert abs(theta.sum()) <= 1e-9
    assert np.all(np.abs(theta) <= 2.0)
    spaced = equally_spaced_preferences(5, 0.1)
    assert abs(spaced.sum()) <= 1e-9
    np.testing.assert_allclose(np.diff(spaced), -0.1, atol=1e-12)


def test_generate_full_observation_counts():
    ds = generate(np.zeros(3), BTL, L=2, p=1.0, rng=np.random.default_rng(1))
    assert len(ds) == 6
    assert ds.kind == KIND_RAW


def test_generate_symmetric_pair_mean():
    L = 100_000
    ds = generate(np.zeros(2), BTL, L=L, p=1.0, rng=np.random.default_rng(2))
    se = math.sqrt(0.25 / L)
    assert abs(ds.values.mean() - 0.5) <= 3.0 * se


def test_generate_gap_log4_frequency():
    # theta = (log 2, -log 2): win probability F(log 4) = 4/5
    L = 100_000
    theta = np.array([math.log(2.0), -math.log(2.0)])
    ds = generate(theta, BTL, L=L, p=1.0, rng=np.random.default_rng(3))
    se = math.sqrt(0.8 * 0.2 / L)
    assert abs(ds.values.mean() - 0.8) <= 3.0 * se


def test_generate_observation_probability():
    m, L, p = 6, 500, 0.3
    ds = generate(np.zeros(m), BTL, L=L, p=p, rng=np.random.default_rng(4))
    total = L * m * (m - 1) / 2
    se = math.sqrt(p * (1.0 - p) / total)
    assert abs(len(ds) / total - p) <= 3.0 * se
    with pytest.raises(ValueError):
        generate(np.zeros(m), BTL, L=L, p=0.0, rng=np.random.default_rng(0))


def test_privatize_preserves_index_set():
    rng = np.random.default_rng(5)
    raw = generate(centered_uniform_preferences(5, rng), BTL, L=20, p=0.5, rng=rng)
    profile = PrivacyProfile.uniform(20, 0.5, 3.0, rng)
    for mech in (MECH_CLASSIC_RR, MECH_ADRR, MECH_LAPLACE):
        private = privatize(raw, profile, mech, rng)
        np.testing.assert_array_equal(private.users, raw.users)
        np.testing.assert_array_equal(private.item_i, raw.item_i)
        np.testing.assert_array_equal(private.item_j, raw.item_j)


def test_adrr_with_infinite_budgets_is_weighted_identity():
    rng = np.random.default_rng(6)
    L = 8
    raw = generate(centered_uniform_preferences(4, rng), BTL, L=L, p=1.0, rng=rng)
    private = privatize(raw, PrivacyProfile.non_private(L), MECH_ADRR, rng)
    np.testing.assert_allclose(private.values, raw.values / L, atol=1e-15)


def test_classic_rr_at_zero_budget_is_pure_noise():
    rng = np.random.default_rng(7)
    L = 20_000
    raw = generate(np.array([1.0, -1.0]), BTL, L=L, p=1.0, rng=rng)
    # eps=0 is legal for the raw mechanism even though profiles reject it
    from privrank import randomized_response
    noisy = randomized_response(raw.values, 0.0, rng)
    assert abs(noisy.mean() - 0.5) <= 3.0 * math.sqrt(0.25 / L)


def test_adrr_values_enumerate_both_branches():
    rng = np.random.default_rng(8)
    L = 30
    raw = generate(centered_uniform_preferences(3, rng), BTL, L=L, p=1.0, rng=rng)
    profile = PrivacyProfile.uniform(L, 0.4, 2.5, rng)
    private = privatize(raw, profile, MECH_ADRR, rng)
    eps = profile.epsilons[private.users]
    w = profile.weights[private.users]
    lo = -w / np.expm1(eps)
    hi = w * np.exp(eps) / np.expm1(eps)
    matches_lo = np.isclose(private.values, lo, atol=1e-12)
    matches_hi = np.isclose(private.values, hi, atol=1e-12)
    assert np.all(matches_lo | matches_hi)
    # dividing by the weight and inverting the debiasing map recovers a bit
    z_tilde = private.values / w
    bits = (z_tilde * np.expm1(eps) + 1.0) / (np.exp(eps) + 1.0)
    assert np.all(np.isclose(bits, 0.0, atol=1e-9) | np.isclose(bits, 1.0, atol=1e-9))


def test_dataset_validation():
    with pytest.raises(ValueError, match="duplicate"):
        PairwiseDataset(m=3, L=2, users=[0, 0], item_i=[0, 0], item_j=[1, 1],
                        values=[1.0, 0.0], kind=KIND_RAW)
    with pytest.raises(ValueError, match="i < j"):
        PairwiseDataset(m=3, L=1, users=[0], item_i=[2], item_j=[1],
                        values=[1.0], kind=KIND_RAW)
    with pytest.raises(ValueError, match="0/1"):
        PairwiseDataset(m=3, L=1, users=[0], item_i=[0], item_j=[1],
                        values=[0.3], kind=KIND_RR)


def test_csv_round_trips(tmp_path):
    empty = PairwiseDataset(m=2, L=1, users=[], item_i=[], item_j=[],
                            values=[], kind=KIND_RAW)
    path = tmp_path / "empty.csv"
    write_csv(empty, path)
    assert path.read_text().strip() == "user_id,item_i,item_j,value,kind"
    assert len(load_csv(path)) == 0

    one = PairwiseDataset(m=4, L=2, users=[1], item_i=[0], item_j=[3],
                          values=[1.0], kind=KIND_RAW)
    path = tmp_path / "one.csv"
    write_csv(one, path)
    back = load_csv(path)
    assert back.records == one.records

    rng = np.random.default_rng(9)
    raw = generate(centered_uniform_preferences(5, rng), BTL, L=10, p=0.5, rng=rng)
    path = tmp_path / "raw.csv"
    write_csv(raw, path)
    back = load_csv(path)
    assert back.records == raw.records and back.kind == raw.kind

    profile = PrivacyProfile.uniform(10, 0.5, 2.0, rng)
    private = privatize(raw, profile, MECH_ADRR, rng)
    path = tmp_path / "adrr.csv"
    write_csv(private, path)
    back = load_csv(path, profile=profile)
    assert back.kind == KIND_ADRR
    np.testing.assert_allclose(back.values, private.values, atol=1e-12)


def test_csv_errors_carry_line_numbers(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("user_id,item_i,item_j,value,kind\n1,1,2,one,raw_binary\n")
    with pytest.raises(ValueError, match=":2"):
        load_csv(bad)
    dup = tmp_path / "dup.csv"
    dup.write_text("user_id,item_i,item_j,value,kind\n"
                   "1,1,2,1,raw_binary\n1,1,2,0,raw_binary\n")
    with pytest.raises(ValueError, match="duplicate"):
        load_csv(dup)
    mixed = tmp_path / "mixed.csv"
    mixed.write_text("user_id,item_i,item_j,value,kind\n"
                     "1,1,2,1,raw_binary\n1,1,3,1,rr_binary\n")
    with pytest.raises(ValueError, match="mixed kinds"):
        load_csv(mixed)


def test_intransitivity_transitive_user():
    ds = PairwiseDataset(m=3, L=1, users=[0, 0, 0], item_i=[0, 0, 1],
                         item_j=[1, 2, 2], values=[1, 1, 1], kind=KIND_RAW)
    users_frac, comp_frac = intransitivity_report(ds)
    assert users_frac == 0.0 and comp_frac == 0.0


def test_intransitivity_three_cycle():
    # 1 beats 2, 2 beats 3, 3 beats 1: all win counts tie, the induced order
    # is 1 > 2 > 3 by the index rule, and only the (1,3) comparison conflicts
    ds = PairwiseDataset(m=3, L=1, users=[0, 0, 0], item_i=[0, 1, 0],
                         item_j=[1, 2, 2], values=[1, 1, 0], kind=KIND_RAW)
    users_frac, comp_frac = intransitivity_report(ds)
    assert users_frac == 1.0
    assert comp_frac == pytest.approx(1.0 / 3.0)


def test_intransitivity_mixed_users():
    users = [0, 0, 0, 1, 1, 1]
    ds = PairwiseDataset(m=3, L=2, users=users, item_i=[0, 0, 1] * 2,
                         item_j=[1, 2, 2] * 2, values=[1, 1, 1, 1, 0, 1],
                         kind=KIND_RAW)
    users_frac, comp_frac = intransitivity_report(ds)
    assert users_frac == pytest.approx(0.5)
    assert comp_frac == pytest.approx(1.0 / 6.0)
