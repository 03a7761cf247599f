import dataclasses
import json

import numpy as np
import pytest

from nvmbench.profiles import (
    CbramCurrent,
    LogisticCurve,
    MramCurrent,
    ProfileError,
    Technology,
    TechnologyProfile,
    default_profile,
    load_default_profiles,
)

from conftest import make_hot_profile


def test_all_defaults_load_and_validate():
    loaded = load_default_profiles()
    assert [p.technology for p in loaded] == [
        Technology.TOGGLE_MRAM, Technology.FERAM, Technology.CBRAM,
        Technology.RERAM, Technology.FLASH, Technology.SRAM,
    ]
    for p in loaded:
        assert p.page_size_bytes == 64
        assert p.clock_hz == 1.5625e6


def test_json_round_trip():
    for tech in Technology:
        p = default_profile(tech)
        doc = p.to_json_dict()
        again = TechnologyProfile.from_json_dict(json.loads(json.dumps(doc)))
        assert again == p


def test_schema_rejects_unknown_fields():
    doc = default_profile("cbram").to_json_dict()
    doc["surprise"] = 1
    with pytest.raises(ProfileError):
        TechnologyProfile.from_json_dict(doc)


def test_invalid_parameters_rejected():
    base = make_hot_profile()
    with pytest.raises(ProfileError):
        dataclasses.replace(base, clock_hz=0.0).validate()
    with pytest.raises(ProfileError):
        dataclasses.replace(base, page_size_bytes=128).validate()
    with pytest.raises(ProfileError):
        dataclasses.replace(base, current=CbramCurrent(base=-1.0, slope_per_bit=0.5, noise_sigma=0.1)).validate()
    # erase-before-write is a flash-only trait
    with pytest.raises(ProfileError):
        dataclasses.replace(base, erase=dataclasses.replace(base.erase, erase_before_write=True)).validate()


def test_mram_asymmetry_constraint():
    p = default_profile("toggle_mram")
    cur = p.current
    assert cur.cost_toggle_from_one > cur.cost_toggle_from_zero
    bad = MramCurrent(base=60.0, cost_toggle_from_one=9.0, cost_toggle_from_zero=25.0,
                      deviation_decay=0.25, noise_sigma=1.5)
    with pytest.raises(ProfileError):
        dataclasses.replace(p, current=bad).validate()


def test_flash_is_only_erase_before_write_profile():
    for p in load_default_profiles():
        assert p.erase.erase_before_write == (p.technology is Technology.FLASH)
        if p.technology is not Technology.FLASH:
            assert p.erase.erase_current == 0.0


def test_logistic_curve_shape():
    c = LogisticCurve(p_max=0.5, steepness=1e-3, midpoint_cycles=1000.0)
    assert c.value(1000.0) == pytest.approx(0.25)
    w = np.array([0.0, 500.0, 1000.0, 2000.0, 1e7])
    v = c.value(w)
    assert np.all(np.diff(v) >= 0) and v[-1] <= 0.5


def test_expected_byte_write_current_closed_forms():
    # Brute-force oracle over all 65536 (previous, new) byte pairs.
    mram = default_profile("toggle_mram").current
    total = 0.0
    for prev in range(256):
        for new in range(256):
            x = prev ^ new
            k = x.bit_count()
            t1 = (x & prev).bit_count()
            if k == 0:
                total += mram.base
            else:
                total += (mram.base + k * mram.cost_toggle_from_zero
                          + t1 * (mram.cost_toggle_from_one - mram.cost_toggle_from_zero)
                          * mram.deviation_decay ** (k - 1))
    assert mram.expected_byte_write_current() == pytest.approx(total / 65536, rel=1e-12)

    cbram = default_profile("cbram").current
    assert cbram.expected_byte_write_current() == pytest.approx(cbram.base + 4 * cbram.slope_per_bit)


def test_calibrated_byte_write_maxima_exactly_equal():
    # The three technologies sharing the byte-write column maximum must agree
    # bit for bit, or the normalized 1.0 entries cannot all be exact.
    mram = default_profile("toggle_mram").expected_byte_write_current()
    flash = default_profile("flash").expected_byte_write_current()
    sram = default_profile("sram").expected_byte_write_current()
    assert mram == flash == sram
    assert mram == 97.1920928955078125


def test_mram_ones_start_exceeds_zeros_start_for_every_k():
    cur = default_profile("toggle_mram").current
    for k in range(1, 9):
        ones = cur.mean_pattern_current(k, k)
        zeros = cur.mean_pattern_current(k, 0)
        assert ones > zeros


def test_mram_pattern_gap_shrinks_with_k():
    cur = default_profile("toggle_mram").current
    gaps = [cur.mean_pattern_current(k, k) - cur.mean_pattern_current(k, 0) for k in range(1, 9)]
    assert all(g > 0 for g in gaps)
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_cycles_to_seconds():
    p = default_profile("sram")
    assert p.cycles_to_seconds(1_562_500) == pytest.approx(1.0)
