"""Stateful behavioral simulation of one memory chip.

A :class:`DeviceInstance` holds the byte array, per-bit wear counters and
transaction accounting for a single simulated chip, plus three independent
deterministic random streams (current noise, write-verify-write retries, raw
bit flips) derived from one user seed. Keeping the streams separate means an
experiment that never inspects currents draws nothing from the noise stream,
without changing the error realization.

All mutating operations are built on one vectorized span write so that a page
write is bit-for-bit identical to 64 sequential byte writes (the regression
suite asserts this).

Alongside each data byte the device models one spare flag cell, used by
write encoders such as Flip-N-Write. The flag wears like a data bit, and when
a write supplies a flag the per-byte SEC codeword covers all nine stored bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bits import PACK_WEIGHTS, POPCOUNT, unpack_bits
from .profiles import TechnologyProfile, Technology

DEFAULT_SIZE_BYTES = 8192


class AddressError(IndexError):
    """Access outside the device's byte array."""


class StateError(RuntimeError):
    """Operation requires device state that was never established."""


@dataclass
class Counters:
    byte_writes: int = 0
    byte_reads: int = 0
    erases: int = 0
    total_latency_cycles: int = 0
    total_current_au: float = 0.0


@dataclass(frozen=True)
class WriteOutcome:
    """Observable result of a single byte write."""

    stored_value: int
    bits_toggled: int
    current: float
    latency_cycles: int
    wvw_attempts: int
    observed_error_bits: int
    auto_erased: bool = False
    flag_stored: int | None = None


@dataclass(frozen=True)
class EraseOutcome:
    current: float
    latency_cycles: int


@dataclass
class SpanWriteOutcome:
    """Result of writing ``n`` consecutive bytes (struct-of-arrays form).

    ``current``/``latency_cycles`` are grand totals including any auto-erase;
    the per-byte arrays cover the writes only. ``outcomes`` materializes the
    per-byte records on demand.
    """

    stored: np.ndarray
    bits_toggled: np.ndarray
    currents: np.ndarray
    latencies: np.ndarray
    attempts: np.ndarray
    error_bits: np.ndarray
    erase_current: float = 0.0
    erase_latency_cycles: int = 0
    erased_pages: tuple[int, ...] = ()
    flags_stored: np.ndarray | None = None

    @property
    def current(self) -> float:
        return float(self.currents.sum()) + self.erase_current

    @property
    def latency_cycles(self) -> int:
        return int(self.latencies.sum()) + self.erase_latency_cycles

    @property
    def outcomes(self) -> list[WriteOutcome]:
        out = []
        for i in range(len(self.stored)):
            out.append(
                WriteOutcome(
                    stored_value=int(self.stored[i]),
                    bits_toggled=int(self.bits_toggled[i]),
                    current=float(self.currents[i]),
                    latency_cycles=int(self.latencies[i]),
                    wvw_attempts=int(self.attempts[i]),
                    observed_error_bits=int(self.error_bits[i]),
                    auto_erased=bool(self.erased_pages),
                    flag_stored=None if self.flags_stored is None else int(self.flags_stored[i]),
                )
            )
        return out


# A page write is a span write aligned to one page.
PageWriteOutcome = SpanWriteOutcome


class DeviceInstance:
    """One simulated chip. Mutation requires exclusive access (no internal locks);
    independent instances can run in parallel freely."""

    def __init__(self, profile: TechnologyProfile, seed: int, size_bytes: int = DEFAULT_SIZE_BYTES):
        profile.validate()
        if size_bytes < profile.page_size_bytes:
            raise ValueError(f"size_bytes must be at least one page ({profile.page_size_bytes})")
        self.profile = profile
        self.seed = int(seed)
        self.size_bytes = int(size_bytes)
        self.memory = np.zeros(size_bytes, dtype=np.uint8)
        self.wear = np.zeros((size_bytes, 8), dtype=np.int64)
        self.flags = np.zeros(size_bytes, dtype=np.uint8)
        self.flag_wear = np.zeros(size_bytes, dtype=np.int64)
        # Flash bookkeeping: a byte written since the last page erase forces an
        # auto-erase before it can be rewritten. Fresh chips are not erased.
        self.written_since_erase = np.ones(size_bytes, dtype=bool)
        self.counters = Counters()
        self.notes: dict = {}
        self._seed_seq = np.random.SeedSequence(self.seed)
        noise_ss, wvw_ss, inject_ss = self._seed_seq.spawn(3)
        self.rng_noise = np.random.Generator(np.random.PCG64(noise_ss))
        self.rng_wvw = np.random.Generator(np.random.PCG64(wvw_ss))
        self.rng_inject = np.random.Generator(np.random.PCG64(inject_ss))
        # Curve lookup tables over integer wear, grown on demand. Values are
        # produced by the profile curves themselves, so the cached path is
        # bit-identical to direct evaluation.
        self._flip_lut = profile.endurance.flip_prob.value(np.arange(4096, dtype=np.float64))
        self._retry_lut: np.ndarray | None = None

    def flip_probs(self, wear: np.ndarray) -> np.ndarray:
        """Raw flip probability per wear entry (cached logistic)."""
        top = int(wear.max(initial=0))
        if top >= len(self._flip_lut):
            size = max(top + 1, 2 * len(self._flip_lut))
            self._flip_lut = self.profile.endurance.flip_prob.value(np.arange(size, dtype=np.float64))
        return self._flip_lut[wear]

    def retry_probs(self, wear_sums: np.ndarray) -> np.ndarray:
        """WvW per-attempt failure probability, indexed by a byte's wear sum
        (sum/8 is the exact mean wear: int-to-float and /8 are both exact)."""
        curve = self.profile.latency.retry_prob
        top = int(wear_sums.max(initial=0))
        if self._retry_lut is None or top >= len(self._retry_lut):
            size = max(top + 1, 4096, 0 if self._retry_lut is None else 2 * len(self._retry_lut))
            self._retry_lut = curve.value(np.arange(size, dtype=np.float64) / 8.0)
        return self._retry_lut[wear_sums]

    def spawn_stream(self) -> np.random.Generator:
        """Deterministic child generator (for experiment data streams)."""
        return np.random.Generator(np.random.PCG64(self._seed_seq.spawn(1)[0]))

    @property
    def page_count(self) -> int:
        return self.size_bytes // self.profile.page_size_bytes

    def _check_span(self, addr: int, n: int) -> None:
        if addr < 0 or n < 0 or addr + n > self.size_bytes:
            raise AddressError(f"span [{addr}, {addr + n}) outside device of {self.size_bytes} bytes")


def create_device(profile: TechnologyProfile, seed: int, size_bytes: int = DEFAULT_SIZE_BYTES) -> DeviceInstance:
    """Fresh chip: memory and wear all zeros, streams seeded from ``seed``."""
    return DeviceInstance(profile, seed, size_bytes)


# ---------------------------------------------------------------------------
# Randomness primitives (shared by the scalar ops and the experiment engines)
# ---------------------------------------------------------------------------

def _attempts_from_q(q: np.ndarray, u: np.ndarray, max_attempts: int) -> np.ndarray:
    """Truncated-geometric attempt counts from one uniform per write.

    The failure count F satisfies P(F >= n) = q^n, so F = floor(log(1-u)/log(q)).
    """
    attempts = np.ones(len(q), dtype=np.int64)
    active = q > 0.0
    if np.any(active):
        extra = np.floor(np.log1p(-u[active]) / np.log(q[active])).astype(np.int64)
        attempts[active] += extra
    return np.minimum(attempts, max_attempts)


def draw_attempts(profile: TechnologyProfile, mean_wear: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Write-verify-write attempt counts from one uniform draw per write.

    The per-attempt failure probability is the retry curve at the byte's mean
    wear; attempts follow a geometric law truncated at ``max_attempts``.
    """
    lat = profile.latency
    if not lat.wvw_enabled:
        return np.ones(len(mean_wear), dtype=np.int64)
    return _attempts_from_q(lat.retry_prob.value(mean_wear), u, lat.max_attempts)


def _inject_span(
    profile: TechnologyProfile,
    p_data: np.ndarray,
    requested: np.ndarray,
    u: np.ndarray,
    p_flag: np.ndarray | None = None,
    requested_flags: np.ndarray | None = None,
):
    """Raw wear-driven bit flips plus SEC masking over each stored codeword.

    ``p_data`` holds the per-bit flip probabilities (n, 8); ``u`` carries one
    uniform per codeword bit, shape (n, 8) or (n, 9) when flags are written
    (the flag is the 9th codeword bit). Returns the stored bytes and, when
    flags participate, the stored flags.
    """
    flips = u[:, :8] < p_data
    if requested_flags is not None:
        flag_flips = u[:, 8] < p_flag
        any_flips = flips.any() or flag_flips.any()
    else:
        flag_flips = None
        any_flips = flips.any()
    if not any_flips:
        if requested_flags is None:
            return requested.copy(), None
        return requested.copy(), requested_flags.copy()
    n_flips = flips.sum(axis=1) + (flag_flips if flag_flips is not None else 0)
    if profile.ecc.enabled:
        single = n_flips == 1
        if np.any(single):
            flips[single] = False
            if flag_flips is not None:
                flag_flips = flag_flips & ~single
    stored = requested ^ (flips.astype(np.uint8) * PACK_WEIGHTS).sum(axis=1).astype(np.uint8)
    if requested_flags is None:
        return stored, None
    stored_flags = requested_flags ^ flag_flips.astype(np.uint8)
    return stored, stored_flags


def _pattern_current(profile: TechnologyProfile, prev, values, toggled_bits, flag_toggles, rng_noise):
    """Noisy per-byte write current for one attempt, by technology signature."""
    cur = profile.current
    k = toggled_bits.sum(axis=1).astype(np.float64)
    if flag_toggles is not None:
        k_eff = k + flag_toggles
    else:
        k_eff = k
    if cur.kind == "mram":
        t1 = (toggled_bits & unpack_bits(prev)).sum(axis=1)
        # The spare flag cell costs like a from-zero toggle and does not join
        # the asymmetry term.
        mean = cur.mean_pattern_current(k, t1)
        if flag_toggles is not None:
            mean = mean + flag_toggles * cur.cost_toggle_from_zero
        return mean + rng_noise.standard_normal(len(prev)) * cur.noise_sigma
    if cur.kind == "cbram":
        return cur.mean_pattern_current(k_eff) + rng_noise.standard_normal(len(prev)) * cur.noise_sigma
    if cur.kind == "feram":
        return cur.constant + rng_noise.standard_normal(len(prev)) * cur.noise_sigma
    if cur.kind == "reram":
        return cur.mean + (2.0 * rng_noise.random(len(prev)) - 1.0) * cur.spread
    # constant (flash, sram): deterministic
    return np.full(len(prev), cur.byte_write, dtype=np.float64)


# ---------------------------------------------------------------------------
# Core span write
# ---------------------------------------------------------------------------

def write_span(
    device: DeviceInstance,
    addr: int,
    values,
    flags=None,
) -> SpanWriteOutcome:
    """Write ``values`` to consecutive addresses starting at ``addr``.

    Equivalent to sequential byte writes: all random draws are batched in the
    same stream order a per-byte loop would use. When ``flags`` is given, each
    byte is stored together with its spare flag cell (nine-bit codewords).
    """
    values = np.ascontiguousarray(values, dtype=np.uint8)
    n = len(values)
    device._check_span(addr, n)
    profile = device.profile
    span = slice(addr, addr + n)

    erase_current = 0.0
    erase_latency = 0
    erased_pages: list[int] = []
    if profile.erase.erase_before_write and n > 0:
        page_size = profile.page_size_bytes
        first_page, last_page = addr // page_size, (addr + n - 1) // page_size
        for page in range(first_page, last_page + 1):
            lo = max(addr, page * page_size)
            hi = min(addr + n, (page + 1) * page_size)
            if device.written_since_erase[lo:hi].any():
                out = erase(device, page)
                erase_current += out.current
                erase_latency += out.latency_cycles
                erased_pages.append(page)

    wear_slice = device.wear[span]
    prev = device.memory[span].copy()
    xor = prev ^ values
    toggled_bits = unpack_bits(xor)
    bits_toggled = POPCOUNT[xor]

    if flags is not None:
        flags = np.ascontiguousarray(flags, dtype=np.uint8)
        if len(flags) != n:
            raise ValueError("flags must match values length")
        prev_flags = device.flags[span].copy()
        flag_toggles = (prev_flags != flags).astype(np.int64)
    else:
        flag_toggles = None

    if profile.latency.wvw_enabled:
        wear_sums = wear_slice.sum(axis=1)  # retry curve sees pre-write wear

    # Wear accrues on toggled cells only, once per write (attempt retries
    # re-drive the same state, they do not toggle it again).
    wear_slice += toggled_bits
    if flags is not None:
        device.flag_wear[span] += flag_toggles

    if profile.latency.wvw_enabled:
        u_wvw = device.rng_wvw.random(n)
        attempts = _attempts_from_q(device.retry_probs(wear_sums), u_wvw, profile.latency.max_attempts)
    else:
        attempts = np.ones(n, dtype=np.int64)

    current = attempts * _pattern_current(profile, prev, values, toggled_bits, flag_toggles, device.rng_noise)
    latencies = profile.latency.base_write_cycles + (attempts - 1) * profile.latency.wvw_attempt_cycles

    width = 9 if flags is not None else 8
    u_inject = device.rng_inject.random((n, width))
    stored, stored_flags = _inject_span(
        profile,
        device.flip_probs(wear_slice),
        values,
        u_inject,
        p_flag=device.flip_probs(device.flag_wear[span]) if flags is not None else None,
        requested_flags=flags,
    )

    device.memory[span] = stored
    if flags is not None:
        device.flags[span] = stored_flags
    device.written_since_erase[span] = True

    error_bits = POPCOUNT[stored ^ values]

    out = SpanWriteOutcome(
        stored=stored,
        bits_toggled=bits_toggled,
        currents=current,
        latencies=latencies,
        attempts=attempts,
        error_bits=error_bits,
        erase_current=erase_current,
        erase_latency_cycles=erase_latency,
        erased_pages=tuple(erased_pages),
        flags_stored=stored_flags,
    )
    device.counters.byte_writes += n
    device.counters.total_latency_cycles += out.latency_cycles - erase_latency
    device.counters.total_current_au += out.current - erase_current
    return out


def write_byte(device: DeviceInstance, addr: int, value: int, flag: int | None = None) -> WriteOutcome:
    """Write one byte (optionally with its spare flag cell)."""
    if not 0 <= value <= 0xFF:
        raise ValueError(f"value must be a byte, got {value!r}")
    flags = None if flag is None else np.array([1 if flag else 0], dtype=np.uint8)
    span = write_span(device, addr, np.array([value], dtype=np.uint8), flags=flags)
    out = span.outcomes[0]
    if span.erased_pages:
        # Fold the auto-erase cost into the triggering write's record.
        return WriteOutcome(
            stored_value=out.stored_value,
            bits_toggled=out.bits_toggled,
            current=out.current + span.erase_current,
            latency_cycles=out.latency_cycles + span.erase_latency_cycles,
            wvw_attempts=out.wvw_attempts,
            observed_error_bits=out.observed_error_bits,
            auto_erased=True,
            flag_stored=out.flag_stored,
        )
    return out


def write_page(device: DeviceInstance, page_index: int, data, flags=None) -> PageWriteOutcome:
    """Write one full page. Page current/latency are sums over the byte writes
    (serial byte interface), plus any auto-erase cost."""
    data = np.ascontiguousarray(data, dtype=np.uint8)
    page_size = device.profile.page_size_bytes
    if len(data) != page_size:
        raise ValueError(f"page data must be exactly {page_size} bytes, got {len(data)}")
    if not 0 <= page_index < device.page_count:
        raise AddressError(f"page {page_index} outside device of {device.page_count} pages")
    return write_span(device, page_index * page_size, data, flags=flags)


def read_byte(device: DeviceInstance, addr: int) -> int:
    """Return the stored byte; counts one read transaction."""
    device._check_span(addr, 1)
    device.counters.byte_reads += 1
    device.counters.total_latency_cycles += device.profile.latency.read_cycles
    return int(device.memory[addr])


def read_span(device: DeviceInstance, addr: int, n: int) -> np.ndarray:
    """Read ``n`` consecutive bytes (n sequential read transactions)."""
    device._check_span(addr, n)
    device.counters.byte_reads += n
    device.counters.total_latency_cycles += n * device.profile.latency.read_cycles
    return device.memory[addr:addr + n].copy()


def read_word(device: DeviceInstance, addr: int) -> tuple[int, int]:
    """Read one byte together with its spare flag cell (one transaction)."""
    device._check_span(addr, 1)
    device.counters.byte_reads += 1
    device.counters.total_latency_cycles += device.profile.latency.read_cycles
    return int(device.memory[addr]), int(device.flags[addr])


def peek_word(device: DeviceInstance, addr: int) -> tuple[int, int]:
    """Raw cell state without touching counters (controller-internal)."""
    device._check_span(addr, 1)
    return int(device.memory[addr]), int(device.flags[addr])


def erase(device: DeviceInstance, page_index: int) -> EraseOutcome:
    """Erase one page to all ones. A no-op with zero cost unless the
    technology uses erase-before-write (Flash)."""
    if not 0 <= page_index < device.page_count:
        raise AddressError(f"page {page_index} outside device of {device.page_count} pages")
    profile = device.profile
    if not profile.erase.erase_before_write:
        return EraseOutcome(current=0.0, latency_cycles=0)
    page_size = profile.page_size_bytes
    span = slice(page_index * page_size, (page_index + 1) * page_size)
    prev = device.memory[span]
    device.wear[span] += unpack_bits(prev ^ np.uint8(0xFF))
    device.memory[span] = 0xFF
    device.written_since_erase[span] = False
    device.counters.erases += 1
    device.counters.total_latency_cycles += profile.erase.erase_latency_cycles
    device.counters.total_current_au += profile.erase.erase_current
    return EraseOutcome(
        current=profile.erase.erase_current,
        latency_cycles=profile.erase.erase_latency_cycles,
    )


# ---------------------------------------------------------------------------
# Standalone model operations
# ---------------------------------------------------------------------------

def latency_of_write(profile: TechnologyProfile, wear, rng: np.random.Generator) -> tuple[int, int]:
    """Draw (latency_cycles, wvw_attempts) for a byte at the given per-bit wear.

    Expected latency is non-decreasing in wear: the retry probability curve is
    monotone and every extra attempt adds ``wvw_attempt_cycles``.
    """
    wear = np.asarray(wear, dtype=np.float64)
    if not profile.latency.wvw_enabled:
        return profile.latency.base_write_cycles, 1
    attempts = int(draw_attempts(profile, np.array([wear.mean()]), rng.random(1))[0])
    latency = profile.latency.base_write_cycles + (attempts - 1) * profile.latency.wvw_attempt_cycles
    return latency, attempts


def inject_errors(profile: TechnologyProfile, wear, requested: int, rng: np.random.Generator) -> int:
    """Flip each bit independently with the wear-driven raw probability, then
    apply SEC masking; returns the byte actually stored."""
    if not 0 <= requested <= 0xFF:
        raise ValueError(f"requested must be a byte, got {requested!r}")
    wear = np.asarray(wear, dtype=np.float64).reshape(1, 8)
    u = rng.random((1, 8))
    p = profile.endurance.flip_prob.value(wear)
    stored, _ = _inject_span(profile, p, np.array([requested], dtype=np.uint8), u)
    return int(stored[0])
