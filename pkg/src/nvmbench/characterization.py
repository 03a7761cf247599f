"""The three chip-characterization experiments.

* Pattern sweep: page writes with a fixed number of bits toggled per byte,
  from an all-zeros or all-ones initial pattern, averaging write current over
  repeated cycles.
* Aging: random page writes at one location for many cycles, sampling page
  current, latency and write-verify-write attempts.
* Endurance: random page writes with read-back after every cycle, classifying
  per-byte errors into k-bit buckets.

Experiments over distinct devices are independent; a single experiment is
sequential because wear feeds back into every draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import device as dev
from .bits import POPCOUNT, PACK_WEIGHTS, hamming8, unpack_bits
from .device import DeviceInstance


def classify_error(expected: int, actual: int) -> int:
    """Number of incorrect bits in a read-back byte (0..8)."""
    return hamming8(expected, actual)


def slope_significance(x, y):
    """OLS slope and its two-sided t-test p-value (trend detection)."""
    res = stats.linregress(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    return res.slope, res.pvalue


# ---------------------------------------------------------------------------
# Pattern sweep
# ---------------------------------------------------------------------------

INITIAL_STATES = ("zeros", "ones")


@dataclass
class PatternSweepCell:
    k: int
    initial_state: str
    mean_page_current: float
    std_page_current: float
    trials: int
    samples: np.ndarray = field(repr=False)

    def to_row(self) -> dict:
        return {
            "k": self.k,
            "initial_state": self.initial_state,
            "mean_page_current": self.mean_page_current,
            "std_page_current": self.std_page_current,
            "trials": self.trials,
        }


@dataclass
class PatternSweepResult:
    technology: str
    cycles: int
    cells: list[PatternSweepCell]

    def cell(self, k: int, initial_state: str) -> PatternSweepCell:
        for c in self.cells:
            if c.k == k and c.initial_state == initial_state:
                return c
        raise KeyError((k, initial_state))

    def means(self, initial_state: str) -> tuple[np.ndarray, np.ndarray]:
        """(k values, mean page currents) for one initial state, ordered by k."""
        cells = sorted((c for c in self.cells if c.initial_state == initial_state), key=lambda c: c.k)
        return (np.array([c.k for c in cells], dtype=np.float64),
                np.array([c.mean_page_current for c in cells]))

    def to_json_dict(self) -> dict:
        return {
            "technology": self.technology,
            "cycles": self.cycles,
            "cells": [c.to_row() for c in self.cells],
        }


def toggle_mask(k: int, positions=None) -> int:
    """Byte mask with k bits set; defaults to the k lowest-order bits."""
    if not 1 <= k <= 8:
        raise ValueError(f"k must be in 1..8, got {k}")
    if positions is None:
        return (1 << k) - 1
    positions = list(positions)
    if len(positions) != k or len(set(positions)) != k or not all(0 <= p <= 7 for p in positions):
        raise ValueError(f"need {k} distinct bit positions in 0..7, got {positions}")
    mask = 0
    for p in positions:
        mask |= 1 << p
    return mask


def run_pattern_sweep(device_factory, k_values=range(1, 9), cycles: int = 500,
                      positions=None, page_index: int = 0) -> PatternSweepResult:
    """Average page write current per (bits-toggled, initial-state) cell.

    Every cell runs on a fresh device from ``device_factory(k, initial_state)``
    so aging never contaminates the pattern study. Each cycle first restores
    the initial pattern with an unmeasured write (needed to keep the toggle
    direction fixed), then performs the measured write toggling exactly ``k``
    bits in every byte.
    """
    k_values = list(k_values)
    for k in k_values:
        if not 1 <= k <= 8:
            raise ValueError(f"k must be in 1..8, got {k}")
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    cells = []
    technology = None
    for k in k_values:
        mask = toggle_mask(k, positions)
        for initial_state in INITIAL_STATES:
            device = device_factory(k, initial_state)
            technology = device.profile.technology.value
            page_size = device.profile.page_size_bytes
            init_byte = 0x00 if initial_state == "zeros" else 0xFF
            init_page = np.full(page_size, init_byte, dtype=np.uint8)
            toggled_page = np.full(page_size, init_byte ^ mask, dtype=np.uint8)
            if init_byte != 0x00:
                dev.write_page(device, page_index, init_page)  # setup, unmeasured
            samples = np.empty(cycles, dtype=np.float64)
            for c in range(cycles):
                if c > 0:
                    dev.write_page(device, page_index, init_page)  # restore, unmeasured
                out = dev.write_page(device, page_index, toggled_page)
                samples[c] = out.current
            cells.append(PatternSweepCell(
                k=k,
                initial_state=initial_state,
                mean_page_current=float(samples.mean()),
                std_page_current=float(samples.std(ddof=1)) if cycles > 1 else 0.0,
                trials=cycles,
                samples=samples,
            ))
    return PatternSweepResult(technology=technology, cycles=cycles, cells=cells)


# ---------------------------------------------------------------------------
# Aging
# ---------------------------------------------------------------------------

@dataclass
class AgingTrace:
    technology: str
    cycles: int
    sample_every: int
    cycle_index: np.ndarray
    page_current: np.ndarray
    page_latency_cycles: np.ndarray
    mean_wvw_attempts: np.ndarray

    def __len__(self) -> int:
        return len(self.cycle_index)

    def decile_means(self, column: str) -> tuple[float, float]:
        """(first-decile mean, last-decile mean) of a trace column by cycle."""
        values = getattr(self, column)
        lo = self.cycle_index < self.cycles / 10
        hi = self.cycle_index >= self.cycles * 9 / 10
        return float(values[lo].mean()), float(values[hi].mean())

    def to_json_dict(self) -> dict:
        return {
            "technology": self.technology,
            "cycles": self.cycles,
            "sample_every": self.sample_every,
            "samples": {
                "cycle_index": self.cycle_index.tolist(),
                "page_current": self.page_current.tolist(),
                "page_latency_cycles": self.page_latency_cycles.tolist(),
                "mean_wvw_attempts": self.mean_wvw_attempts.tolist(),
            },
        }


def run_aging(device: DeviceInstance, cycles: int, sample_every: int = 100,
              page_index: int = 0) -> AgingTrace:
    """Write uniformly random pages at one location, sampling current/latency
    every ``sample_every`` cycles (cycle 0 is always sampled).

    Batched engine: random draws are consumed in exactly the order a
    :func:`nvmbench.device.write_page` loop would use, so sampled
    measurements, wear and memory are bit-identical to the plain loop (the
    regression suite asserts this). Device timing counters are not
    accumulated here; the trace carries the measurements.
    """
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    if sample_every < 1:
        raise ValueError("sample_every must be >= 1")
    profile = device.profile
    page_size = profile.page_size_bytes
    if not 0 <= page_index < device.page_count:
        raise dev.AddressError(f"page {page_index} outside device of {device.page_count} pages")
    span = slice(page_index * page_size, (page_index + 1) * page_size)
    data = device.spawn_stream().integers(0, 256, size=(cycles, page_size), dtype=np.uint8)

    cur_model = profile.current
    lat_model = profile.latency
    wvw = lat_model.wvw_enabled
    noise_kind = {"mram": "normal", "cbram": "normal", "feram": "normal",
                  "reram": "uniform", "constant": None}[cur_model.kind]
    erase_each_cycle = profile.erase.erase_before_write

    stored = device.memory[span].copy()
    wear = device.wear[span]
    n_samples = (cycles + sample_every - 1) // sample_every
    idx = np.empty(n_samples, dtype=np.int64)
    cur = np.empty(n_samples, dtype=np.float64)
    lat = np.empty(n_samples, dtype=np.int64)
    att = np.empty(n_samples, dtype=np.float64)
    sample_i = 0

    max_wear = int(wear.max()) + (2 if erase_each_cycle else 1) * cycles + 1
    flip_lut = profile.endurance.flip_prob.value(np.arange(max_wear + 1, dtype=np.float64))
    if wvw:
        retry_lut = lat_model.retry_prob.value(np.arange(8 * (max_wear + 1), dtype=np.float64) / 8.0)
        with np.errstate(divide="ignore"):
            retry_logq = np.log(retry_lut)

    block = 4096
    noise_blk = wvw_blk = inj_blk = None
    all_ones = np.full(page_size, 0xFF, dtype=np.uint8)
    erases = 0
    page_written = bool(device.written_since_erase[span].any())
    for t in range(cycles):
        i = t % block
        if i == 0:
            b = min(block, cycles - t)
            if noise_kind == "normal":
                noise_blk = device.rng_noise.standard_normal((b, page_size))
            elif noise_kind == "uniform":
                noise_blk = device.rng_noise.random((b, page_size))
            if wvw:
                wvw_blk = device.rng_wvw.random((b, page_size))
            inj_blk = device.rng_inject.random((b, page_size, 8))
        v = data[t]
        erased_now = False
        if erase_each_cycle and page_written:
            wear += unpack_bits(stored ^ all_ones)
            stored = all_ones
            erases += 1
            erased_now = True
        page_written = True
        xor = stored ^ v
        sampled = t % sample_every == 0
        if wvw and sampled:
            wear_sum_pre = wear.sum(axis=1)
        wear += unpack_bits(xor)
        if wvw and sampled:
            # log1p(-u)/log(q) >= 0, so integer truncation is the floor;
            # log(0) = -inf maps u to -0.0 extra attempts, i.e. never retry.
            attempts = 1 + (np.log1p(-wvw_blk[i]) / retry_logq[wear_sum_pre]).astype(np.int64)
            np.minimum(attempts, lat_model.max_attempts, out=attempts)
        if sampled:
            k = POPCOUNT[xor].astype(np.float64)
            if cur_model.kind == "mram":
                t1 = (unpack_bits(xor) & unpack_bits(stored)).sum(axis=1)
                currents = cur_model.mean_pattern_current(k, t1) + noise_blk[i] * cur_model.noise_sigma
            elif cur_model.kind == "cbram":
                currents = cur_model.mean_pattern_current(k) + noise_blk[i] * cur_model.noise_sigma
            elif cur_model.kind == "feram":
                currents = cur_model.constant + noise_blk[i] * cur_model.noise_sigma
            elif cur_model.kind == "reram":
                currents = cur_model.mean + (2.0 * noise_blk[i] - 1.0) * cur_model.spread
            else:
                currents = np.full(page_size, cur_model.byte_write, dtype=np.float64)
            if wvw:
                currents = attempts * currents
                latencies = lat_model.base_write_cycles + (attempts - 1) * lat_model.wvw_attempt_cycles
                mean_attempts = float(attempts.mean())
            else:
                latencies = np.full(page_size, lat_model.base_write_cycles, dtype=np.int64)
                mean_attempts = 1.0
            idx[sample_i] = t
            cur[sample_i] = currents.sum() + (profile.erase.erase_current if erased_now else 0.0)
            lat[sample_i] = latencies.sum() + (profile.erase.erase_latency_cycles if erased_now else 0)
            att[sample_i] = mean_attempts
            sample_i += 1
        flips = inj_blk[i] < flip_lut[wear]
        if flips.any():
            if profile.ecc.enabled:
                flips[flips.sum(axis=1) == 1] = False
            stored = v ^ (flips.astype(np.uint8) * PACK_WEIGHTS).sum(axis=1).astype(np.uint8)
        else:
            stored = v.copy()

    device.memory[span] = stored
    device.written_since_erase[span] = True
    device.counters.byte_writes += cycles * page_size
    device.counters.erases += erases
    return AgingTrace(
        technology=profile.technology.value,
        cycles=cycles,
        sample_every=sample_every,
        cycle_index=idx[:sample_i],
        page_current=cur[:sample_i],
        page_latency_cycles=lat[:sample_i],
        mean_wvw_attempts=att[:sample_i],
    )


# ---------------------------------------------------------------------------
# Endurance
# ---------------------------------------------------------------------------

@dataclass
class ErrorHistogram:
    """k-bit error counts per byte address and aggregated over the page."""

    technology: str
    cycles: int
    page_index: int
    encoder: str | None
    per_byte: np.ndarray  # (page_size, 9), column k holds k-bit error counts

    @property
    def counts(self) -> np.ndarray:
        """Aggregate counts indexed by k (0..8; index 0 unused)."""
        return self.per_byte.sum(axis=0)

    @property
    def total_errors(self) -> int:
        return int(self.counts[1:].sum())

    def to_json_dict(self) -> dict:
        return {
            "technology": self.technology,
            "cycles": self.cycles,
            "page_index": self.page_index,
            "encoder": self.encoder,
            "counts": {str(k): int(self.counts[k]) for k in range(1, 9)},
            "total_errors": self.total_errors,
            "per_byte": self.per_byte[:, 1:].tolist(),
        }


def run_endurance(device: DeviceInstance, cycles: int = 200_000, encoder=None,
                  page_index: int = 0) -> ErrorHistogram:
    """Random page writes with read-back, classifying per-byte errors.

    Implemented as a batched loop over the device's own state and inject
    stream; because current noise and retry draws live on separate streams,
    the error realization is bit-identical to issuing the same writes through
    :func:`nvmbench.device.write_page` (asserted by the regression suite).
    Timing and current are not accounted here -- the experiment observes
    errors, and its transaction counters (writes, read-backs) stay exact.
    """
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    profile = device.profile
    page_size = profile.page_size_bytes
    if not 0 <= page_index < device.page_count:
        raise dev.AddressError(f"page {page_index} outside device of {device.page_count} pages")
    span = slice(page_index * page_size, (page_index + 1) * page_size)

    data = device.spawn_stream().integers(0, 256, size=(cycles, page_size), dtype=np.uint8)
    width = encoder.codeword_bits if encoder is not None else 8
    erase_each_cycle = profile.erase.erase_before_write

    stored = device.memory[span]
    flags = device.flags[span]
    wear = device.wear[span]
    flag_wear = device.flag_wear[span]
    hist = np.zeros((page_size, 9), dtype=np.int64)
    ecc = profile.ecc.enabled

    # Wear grows by at most 2 per cycle (erase + write); precompute the flip
    # probability for every reachable integer wear value.
    max_wear = int(max(wear.max(), flag_wear.max())) + 2 * cycles + 1
    lut = profile.endurance.flip_prob.value(np.arange(max_wear + 1, dtype=np.float64))

    inject = device.rng_inject
    block = 4096
    u_block = None
    all_ones = np.full(page_size, 0xFF, dtype=np.uint8)
    erases = 0
    page_written = bool(device.written_since_erase[span].any())
    for t in range(cycles):
        i = t % block
        if i == 0:
            u_block = inject.random((min(block, cycles - t), page_size, width))
        v = data[t]
        if erase_each_cycle and page_written:
            wear += unpack_bits(stored ^ all_ones)
            stored = all_ones.copy()
            erases += 1
        page_written = True
        if encoder is not None:
            enc, new_flags = encoder.encode_span(stored, flags, v)
            wear += unpack_bits(stored ^ enc)
            flag_wear += (flags != new_flags)
            u = u_block[i]
            flips = u[:, :8] < lut[wear]
            flag_flips = u[:, 8] < lut[flag_wear]
            if flips.any() or flag_flips.any():
                n_flips = flips.sum(axis=1) + flag_flips
                if ecc:
                    single = n_flips == 1
                    flips[single] = False
                    flag_flips = flag_flips & ~single
                stored = enc ^ (flips.astype(np.uint8) * PACK_WEIGHTS).sum(axis=1).astype(np.uint8)
                flags = new_flags ^ flag_flips.astype(np.uint8)
                err = POPCOUNT[encoder.decode_span(stored, flags) ^ v]
                bad = err > 0
                if bad.any():
                    hist[np.nonzero(bad)[0], err[bad]] += 1
            else:
                stored = enc
                flags = new_flags
        else:
            wear += unpack_bits(stored ^ v)
            flips = u_block[i] < lut[wear]
            if flips.any():
                if ecc:
                    flips[flips.sum(axis=1) == 1] = False
                stored = v ^ (flips.astype(np.uint8) * PACK_WEIGHTS).sum(axis=1).astype(np.uint8)
                err = POPCOUNT[stored ^ v]
                bad = err > 0
                if bad.any():
                    hist[np.nonzero(bad)[0], err[bad]] += 1
            else:
                stored = v.copy()

    device.memory[span] = stored
    device.flags[span] = flags
    device.written_since_erase[span] = True
    device.counters.byte_writes += cycles * page_size
    device.counters.byte_reads += cycles * page_size
    device.counters.erases += erases
    return ErrorHistogram(
        technology=profile.technology.value,
        cycles=cycles,
        page_index=page_index,
        encoder=getattr(encoder, "name", None),
        per_byte=hist,
    )
