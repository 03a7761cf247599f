import dataclasses
import math

import numpy as np
import pytest

from nvmbench import device as dev
from nvmbench.device import AddressError, create_device, draw_attempts, inject_errors, latency_of_write
from nvmbench.profiles import LogisticCurve, default_profile

from conftest import make_hot_profile, rng


def test_fresh_device_is_all_zeros(profiles):
    d = create_device(profiles["cbram"], seed=1)
    assert not d.memory.any()
    assert not d.wear.any()
    assert not d.flags.any() and not d.flag_wear.any()
    assert d.counters.byte_writes == 0


def test_identical_seed_gives_identical_devices(profiles):
    d1 = create_device(profiles["cbram"], seed=42)
    d2 = create_device(profiles["cbram"], seed=42)
    data = rng(3).integers(0, 256, 256, dtype=np.uint8)
    outs1 = [dev.write_byte(d1, i % 128, int(v)) for i, v in enumerate(data)]
    outs2 = [dev.write_byte(d2, i % 128, int(v)) for i, v in enumerate(data)]
    assert outs1 == outs2
    assert np.array_equal(d1.memory, d2.memory)
    assert np.array_equal(d1.wear, d2.wear)
    assert d1.counters == d2.counters


def test_read_after_write_below_rated(profiles):
    for name, p in profiles.items():
        d = create_device(p, seed=7)
        out = dev.write_byte(d, 5, 0xA5)
        assert out.observed_error_bits == 0, name
        assert dev.read_byte(d, 5) == 0xA5, name


def test_bits_toggled_is_hamming_distance(profiles):
    d = create_device(profiles["feram"], seed=0)
    dev.write_byte(d, 0, 0b10110010)
    out = dev.write_byte(d, 0, 0b01110001)
    assert out.bits_toggled == (0b10110010 ^ 0b01110001).bit_count()


def test_writing_stored_value_leaves_wear_unchanged(profiles):
    d = create_device(profiles["cbram"], seed=9)
    dev.write_byte(d, 3, 0x5A)
    wear_before = d.wear.copy()
    out = dev.write_byte(d, 3, 0x5A)
    assert out.bits_toggled == 0
    assert np.array_equal(d.wear, wear_before)


def test_wear_monotone_nondecreasing(profiles):
    d = create_device(profiles["toggle_mram"], seed=4)
    prev = d.wear.copy()
    for v in rng(5).integers(0, 256, 200, dtype=np.uint8):
        dev.write_byte(d, 0, int(v))
        assert np.all(d.wear >= prev)
        prev = d.wear.copy()


def test_bounds_errors(profiles):
    d = create_device(profiles["sram"], seed=0, size_bytes=64)
    with pytest.raises(AddressError):
        dev.write_byte(d, 64, 0)
    with pytest.raises(AddressError):
        dev.read_byte(d, -1)
    with pytest.raises(AddressError):
        dev.write_page(d, 1, np.zeros(64, dtype=np.uint8))
    with pytest.raises(ValueError):
        dev.write_page(d, 0, np.zeros(63, dtype=np.uint8))
    with pytest.raises(ValueError):
        dev.write_byte(d, 0, 256)


def test_read_does_not_change_wear_or_memory(profiles):
    d = create_device(profiles["cbram"], seed=2)
    dev.write_byte(d, 0, 0xC3)
    wear, mem = d.wear.copy(), d.memory.copy()
    for _ in range(10):
        dev.read_byte(d, 0)
    assert np.array_equal(d.wear, wear) and np.array_equal(d.memory, mem)
    assert d.counters.byte_reads == 10


def test_counters_track_transactions(profiles):
    d = create_device(profiles["feram"], seed=2)
    dev.write_page(d, 0, np.arange(64, dtype=np.uint8))
    dev.write_byte(d, 0, 1)
    dev.read_byte(d, 0)
    assert d.counters.byte_writes == 65
    assert d.counters.byte_reads == 1


# -- current signatures ------------------------------------------------------

def test_feram_current_constant_and_flat(profiles):
    p = profiles["feram"]
    d = create_device(p, seed=12)
    n = 4000
    currents = np.empty(n)
    for i in range(n):
        out = dev.write_byte(d, 0, int(i * 37 + 11) & 0xFF)
        currents[i] = out.current
        assert out.latency_cycles == p.latency.base_write_cycles
    se = p.current.noise_sigma / math.sqrt(n)
    assert abs(currents.mean() - p.current.constant) < 3 * se


def test_mram_ones_start_costs_more_than_zeros_start(profiles):
    p = profiles["toggle_mram"]
    n = 1500
    ones = np.empty(n)
    zeros = np.empty(n)
    d1 = create_device(p, seed=31)
    d0 = create_device(p, seed=32)
    for i in range(n):
        dev.write_byte(d1, 0, 0xFF)           # restore all-ones
        ones[i] = dev.write_byte(d1, 0, 0xFE).current   # 1 toggle from a one
        dev.write_byte(d0, 0, 0x00)           # restore all-zeros
        zeros[i] = dev.write_byte(d0, 0, 0x01).current  # 1 toggle from a zero
    gap = p.current.cost_toggle_from_one - p.current.cost_toggle_from_zero
    se = p.current.noise_sigma * math.sqrt(2.0 / n)
    assert ones.mean() - zeros.mean() > gap - 5 * se
    assert ones.mean() > zeros.mean()


def test_cbram_mean_current_affine_in_toggle_count(profiles):
    p = profiles["cbram"]
    means = []
    for k in range(1, 9):
        d = create_device(p, seed=100 + k)
        mask = (1 << k) - 1
        samples = np.empty(400)
        for i in range(400):
            dev.write_byte(d, 0, 0x00)
            samples[i] = dev.write_byte(d, 0, mask).current
        means.append(samples.mean())
    ks = np.arange(1, 9)
    slope, intercept = np.polyfit(ks, means, 1)
    fitted = slope * ks + intercept
    ss_res = np.sum((means - fitted) ** 2)
    ss_tot = np.sum((means - np.mean(means)) ** 2)
    assert 1 - ss_res / ss_tot > 0.99
    assert slope > 0


def test_reram_current_within_uniform_support(profiles):
    p = profiles["reram"]
    d = create_device(p, seed=3)
    lo, hi = p.current.mean - p.current.spread, p.current.mean + p.current.spread
    for v in rng(4).integers(0, 256, 500, dtype=np.uint8):
        out = dev.write_byte(d, 0, int(v))
        assert lo <= out.current <= hi


# -- erase -------------------------------------------------------------------

def test_flash_erase_sets_all_ones_with_cost(profiles):
    p = profiles["flash"]
    d = create_device(p, seed=5)
    dev.write_page(d, 0, np.arange(64, dtype=np.uint8))
    out = dev.erase(d, 0)
    assert out.current == p.erase.erase_current > 0
    assert out.latency_cycles == p.erase.erase_latency_cycles > 0
    assert np.all(d.memory[:64] == 0xFF)


def test_erase_noop_for_non_flash(profiles):
    d = create_device(profiles["toggle_mram"], seed=5)
    dev.write_byte(d, 0, 0x12)
    out = dev.erase(d, 0)
    assert out.current == 0.0 and out.latency_cycles == 0
    assert dev.read_byte(d, 0) == 0x12
    assert d.counters.erases == 0


def test_double_erase_idempotent(profiles):
    d = create_device(profiles["flash"], seed=5)
    dev.write_page(d, 0, np.full(64, 0x55, dtype=np.uint8))
    dev.erase(d, 0)
    mem = d.memory.copy()
    wear = d.wear.copy()
    dev.erase(d, 0)
    assert np.array_equal(d.memory, mem)
    assert np.array_equal(d.wear, wear)  # nothing toggles the second time


def test_flash_auto_erase_on_first_write(profiles):
    d = create_device(profiles["flash"], seed=7)
    out = dev.write_byte(d, 0, 0x3C)
    assert out.auto_erased
    assert d.counters.erases == 1
    assert out.current > profiles["flash"].erase.erase_current  # erase cost folded in
    # rest of the page erased but unwritten; sequential writes skip the erase
    out2 = dev.write_byte(d, 1, 0x11)
    assert not out2.auto_erased
    assert dev.read_byte(d, 0) == 0x3C


def test_flash_rewrite_triggers_page_erase(profiles):
    d = create_device(profiles["flash"], seed=8)
    dev.write_byte(d, 0, 0x0F)
    dev.write_byte(d, 1, 0x33)
    out = dev.write_byte(d, 0, 0xF0)  # rewrite forces an erase of the page
    assert out.auto_erased
    assert dev.read_byte(d, 0) == 0xF0
    assert dev.read_byte(d, 1) == 0xFF  # neighbors revert to the erased state


# -- page write == 64 sequential byte writes ---------------------------------

@pytest.mark.parametrize("tech", ["toggle_mram", "feram", "cbram", "reram", "flash", "sram"])
def test_write_page_equals_sequential_byte_writes(profiles, tech):
    p = profiles[tech]
    d1 = create_device(p, seed=99)
    d2 = create_device(p, seed=99)
    r = rng(6)
    for _ in range(5):
        data = r.integers(0, 256, 64, dtype=np.uint8)
        page_out = dev.write_page(d1, 0, data)
        byte_outs = [dev.write_byte(d2, i, int(data[i])) for i in range(64)]
        assert np.array_equal(d1.memory, d2.memory)
        assert np.array_equal(d1.wear, d2.wear)
        assert page_out.latency_cycles == sum(o.latency_cycles for o in byte_outs)
        assert page_out.current == pytest.approx(sum(o.current for o in byte_outs), rel=1e-12)
    assert d1.counters.byte_writes == d2.counters.byte_writes == 320


# -- latency -----------------------------------------------------------------

def test_latency_without_wvw_is_constant(profiles):
    p = profiles["feram"]
    r = rng(0)
    for wear in (0, 10**5, 10**6):
        latency, attempts = latency_of_write(p, [wear] * 8, r)
        assert attempts == 1
        assert latency == p.latency.base_write_cycles


def test_latency_fresh_device_single_attempt(profiles):
    p = profiles["cbram"]
    r = rng(1)
    attempts = np.array([latency_of_write(p, [0] * 8, r)[1] for _ in range(2000)])
    q0 = p.latency.retry_prob.value(0.0)
    assert (attempts == 1).mean() >= 1 - q0 - 0.01


def test_latency_grows_with_wear(profiles):
    p = profiles["cbram"]
    r = rng(2)
    lat_low = np.array([latency_of_write(p, [10_000] * 8, r)[0] for _ in range(10_000)])
    lat_high = np.array([latency_of_write(p, [150_000] * 8, r)[0] for _ in range(10_000)])
    assert lat_high.mean() > lat_low.mean()
    assert lat_high.max() <= (p.latency.base_write_cycles
                              + (p.latency.max_attempts - 1) * p.latency.wvw_attempt_cycles)


def test_draw_attempts_matches_truncated_geometric():
    curve = LogisticCurve(p_max=0.5, steepness=1.0, midpoint_cycles=0.0)
    profile = make_hot_profile(wvw=True)
    profile = dataclasses.replace(
        profile, latency=dataclasses.replace(profile.latency, retry_prob=curve, max_attempts=4))
    q = float(curve.value(0.0))  # 0.25 at the midpoint
    n = 200_000
    u = rng(3).random(n)
    attempts = draw_attempts(profile, np.zeros(n), u)
    # Oracle: inverse-CDF of the truncated geometric distribution.
    expected_probs = [(1 - q) * q ** (a - 1) for a in range(1, 4)] + [q ** 3]
    counts = np.bincount(attempts, minlength=5)[1:5] / n
    assert np.allclose(counts, expected_probs, atol=4 / math.sqrt(n))


# -- error injection ---------------------------------------------------------

def test_inject_errors_pristine_is_identity(profiles):
    p = profiles["cbram"]
    r = rng(0)
    for v in range(0, 256, 17):
        assert inject_errors(p, [0] * 8, v, r) == v


def test_inject_errors_matches_binomial_oracle():
    # Pick the wear where the raw per-bit flip probability is exactly 0.01 and
    # compare the observed 2-bit error rate against C(8,2) p^2 (1-p)^6.
    profile = make_hot_profile(p_max=0.05, steepness=2e-3, midpoint=2000.0, ecc=True)
    curve = profile.endurance.flip_prob
    p_target = 0.01
    wear = curve.midpoint_cycles + math.log(p_target / (curve.p_max - p_target)) / curve.steepness
    assert curve.value(wear) == pytest.approx(p_target, rel=1e-9)

    n = 1_000_000
    u = rng(8).random((n, 8))
    from nvmbench.device import _inject_span
    probs = np.full((n, 8), p_target)
    stored, _ = _inject_span(profile, probs, np.zeros(n, dtype=np.uint8), u)
    from nvmbench.bits import POPCOUNT
    observed = POPCOUNT[stored]
    rate_2bit = float((observed == 2).mean())
    expected = math.comb(8, 2) * p_target**2 * (1 - p_target)**6
    assert rate_2bit == pytest.approx(expected, rel=0.05)
    # SEC: no single-bit outcomes survive
    assert not (observed == 1).any()


def test_inject_errors_wrapper_matches_span_batch():
    profile = make_hot_profile(p_max=0.3, steepness=1.0, midpoint=0.0)
    wear = [50] * 8
    r1, r2 = rng(11), rng(11)
    singles = [inject_errors(profile, wear, 0xAB, r1) for _ in range(500)]
    from nvmbench.device import _inject_span
    p = profile.endurance.flip_prob.value(np.full((500, 8), 50.0))
    batch, _ = _inject_span(profile, p, np.full(500, 0xAB, dtype=np.uint8), r2.random((500, 8)))
    assert singles == batch.tolist()


def test_ecc_disabled_passes_single_flips():
    profile = make_hot_profile(p_max=0.08, steepness=1.0, midpoint=0.0, ecc=False)
    r = rng(13)
    from nvmbench.bits import POPCOUNT
    outcomes = np.array([inject_errors(profile, [100] * 8, 0, r) for _ in range(4000)])
    assert (POPCOUNT[outcomes] == 1).any()


def test_worn_device_write_errors_match_binomial_tail(profiles):
    # Write the stored value repeatedly (zero toggles, wear frozen) on a worn
    # chip and compare the error-event rate against the closed-form binomial
    # probability of seeing >= 2 raw flips.
    profile = make_hot_profile(p_max=0.05, steepness=2e-3, midpoint=2000.0, ecc=True)
    d = create_device(profile, seed=77)
    curve = profile.endurance.flip_prob
    wear_level = int(curve.midpoint_cycles)  # p = p_max/2 = 0.025
    p = float(curve.value(wear_level))
    d.wear[:64] = wear_level
    page = np.zeros(64, dtype=np.uint8)
    trials = 0
    errors = 0
    ones_seen = 0
    for _ in range(1600):  # 102400 byte writes
        out = dev.write_page(d, 0, page)
        trials += 64
        errors += int((out.error_bits >= 2).sum())
        ones_seen += int((out.error_bits == 1).sum())
        d.memory[:64] = 0          # rollback corruption; keep wear frozen
        d.wear[:64] = wear_level
    expected = 1 - (1 - p) ** 8 - 8 * p * (1 - p) ** 7
    assert ones_seen == 0
    assert errors / trials == pytest.approx(expected, rel=0.1)
