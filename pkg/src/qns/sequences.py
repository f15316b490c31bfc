"""Fixed-total-time pulse sequences (FTTPS) and experiment plans.

All sequences live on a grid of ``2**(m+1)`` slots of duration ``tau_pi``,
so every sequence runs for the same total time ``T = 2**(m+1) * tau_pi``.
A cosine sequence of order ``k`` places its ``2k`` pi-pulses at the zeros
of ``cos(2*pi*k*t/T)`` rounded to the nearest slot; a sine sequence uses
the zeros of ``sin(2*pi*k*t/T)`` including ``t = 0``.  Sweeping ``k``
slides a filter-function passband across frequency in steps of ``2*pi/T``
while the total time, and hence the frequency resolution, stays fixed.

The experiment plan enumerates four sequence combinations:

1. cosine-k on qubit 1, free evolution on qubit 2, prep |+X>|+Z>,
   record X1 and Y1;
2. the mirror image on qubit 2, prep |+Z>|+X>;
3. the same cosine-k on both qubits, prep |+X>|+X>, record the four
   two-qubit pair observables plus single-qubit marginals;
4. cosine-k on qubit 1 and sine-k on qubit 2, prep |+X>|+X>, record the
   four pair observables.

The k = 0 rows of combinations 1-3 are free-evolution settings; they
carry the static detuning and coupling information, so no separate
statics settings are needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PulseSequence",
    "SwitchingFunction",
    "PlanSetting",
    "ExperimentPlan",
    "cosine_fttps",
    "sine_fttps",
    "free_evolution",
    "switching_function",
    "repeat_sequence",
    "build_plan",
]


@dataclass(frozen=True)
class PulseSequence:
    """Pi-pulse train on the slot grid.

    ``pulse_slots`` are the integer indices (in ``[0, repetitions * 2**(m+1))``)
    at whose left edge an instantaneous X pi-pulse is applied.
    ``waveform_sign`` selects the drive polarity pattern used only by the
    finite-width simulation: ``"same"`` drives every pulse with the same
    sign, ``"alternating"`` flips the sign pulse to pulse.
    """

    kind: str  # "cosine" | "sine" | "free"
    k: int
    m: int
    tau_pi: float
    pulse_slots: tuple[int, ...]
    waveform_sign: str = "same"
    repetitions: int = 1

    def __post_init__(self):
        if self.kind not in ("cosine", "sine", "free"):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if self.waveform_sign not in ("same", "alternating"):
            raise ValueError(f"unknown waveform_sign {self.waveform_sign!r}")
        if self.tau_pi <= 0:
            raise ValueError("tau_pi must be > 0")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        slots = tuple(int(s) for s in self.pulse_slots)
        object.__setattr__(self, "pulse_slots", slots)
        if len(slots) % 2 != 0:
            raise ValueError(f"pulse count must be even, got {len(slots)}")
        if len(set(slots)) != len(slots):
            raise ValueError("pulse slots must be distinct")
        if slots and not (0 <= min(slots) and max(slots) < self.n_slots):
            raise ValueError("pulse slots out of grid range")

    @property
    def n_slots(self) -> int:
        return self.repetitions * 2 ** (self.m + 1)

    @property
    def duration(self) -> float:
        return self.n_slots * self.tau_pi

    @property
    def base_duration(self) -> float:
        """Duration of one repetition, T = 2**(m+1) * tau_pi."""
        return 2 ** (self.m + 1) * self.tau_pi

    def pulse_times(self) -> np.ndarray:
        return np.asarray(self.pulse_slots, dtype=float) * self.tau_pi


@dataclass(frozen=True)
class SwitchingFunction:
    """Piecewise-constant sign history y(t) on [0, duration].

    ``boundaries`` has length ``len(signs) + 1`` with ``boundaries[0] = 0``
    and ``boundaries[-1] = duration``; ``signs[i]`` is the value on
    ``[boundaries[i], boundaries[i+1])``.  The function starts at +1 and
    flips at every pulse time (a pulse at t = 0 flips the first segment
    to -1).
    """

    boundaries: tuple[float, ...]
    signs: tuple[int, ...]

    def __post_init__(self):
        if len(self.boundaries) != len(self.signs) + 1:
            raise ValueError("boundaries must have one more entry than signs")
        if any(s not in (-1, 1) for s in self.signs):
            raise ValueError("signs must be +-1")

    @property
    def duration(self) -> float:
        return self.boundaries[-1]

    def product(self, other: "SwitchingFunction") -> "SwitchingFunction":
        """Pointwise product y1(t)*y2(t), e.g. the ZZ switching function."""
        if not np.isclose(self.duration, other.duration, rtol=1e-12):
            raise ValueError("switching functions must share total time")
        bounds = np.union1d(self.boundaries, other.boundaries)
        mids = (bounds[:-1] + bounds[1:]) / 2
        signs = self.sample(mids) * other.sample(mids)
        # merge equal-sign neighbors to keep segment lists minimal
        keep = np.concatenate(([True], signs[1:] != signs[:-1]))
        new_bounds = np.concatenate((bounds[:-1][keep], [bounds[-1]]))
        return SwitchingFunction(tuple(new_bounds), tuple(int(s) for s in signs[keep]))

    def sample(self, times) -> np.ndarray:
        """Sign at each time (right-continuous: value of the containing segment)."""
        idx = np.searchsorted(self.boundaries, times, side="right") - 1
        idx = np.clip(idx, 0, len(self.signs) - 1)
        return np.asarray(self.signs)[idx]

    def slot_signs(self, n_slots: int) -> np.ndarray:
        """Sign per slot (sampled at slot centers) for discrete evolution."""
        tau = self.duration / n_slots
        centers = (np.arange(n_slots) + 0.5) * tau
        return self.sample(centers)

    def integral(self) -> float:
        """integral of y(t) dt over the full duration."""
        b = np.asarray(self.boundaries)
        return float(np.dot(self.signs, np.diff(b)))


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5).astype(int)


def cosine_fttps(k: int, m: int, tau_pi: float,
                 waveform_sign: str = "same") -> PulseSequence:
    """Cosine FTTPS of order k: 2k pulses at rounded zeros of cos(2*pi*k*t/T).

    The zeros sit at ``t = T*(2j+1)/(4k)``; on the ``2**(m+1)`` slot grid
    that is slot ``2**(m-1)*(2j+1)/k`` rounded half-up.  ``k = 0`` is free
    evolution.  Requires ``0 <= k <= 2**m - 1`` (beyond that, rounding
    would merge adjacent pulses onto one slot).
    """
    if not 0 <= k <= 2**m - 1:
        raise ValueError(f"cosine order k={k} outside [0, {2**m - 1}] for m={m}")
    if k == 0:
        return PulseSequence("free", 0, m, tau_pi, (), waveform_sign)
    j = np.arange(2 * k)
    slots = _round_half_up(2 ** (m - 1) * (2 * j + 1) / k)
    return PulseSequence("cosine", k, m, tau_pi, tuple(slots), waveform_sign)


def sine_fttps(k: int, m: int, tau_pi: float,
               waveform_sign: str = "same") -> PulseSequence:
    """Sine FTTPS of order k: 2k pulses at rounded zeros of sin(2*pi*k*t/T).

    The first zero at ``t = 0`` is included, giving slots
    ``2**m * j / k`` for ``j = 0..2k-1`` (rounded half-up), which keeps
    the pulse count even.  Requires ``1 <= k <= 2**m - 1``.
    """
    if not 1 <= k <= 2**m - 1:
        raise ValueError(f"sine order k={k} outside [1, {2**m - 1}] for m={m}")
    j = np.arange(2 * k)
    slots = _round_half_up(2**m * j / k)
    return PulseSequence("sine", k, m, tau_pi, tuple(slots), waveform_sign)


def free_evolution(m: int, tau_pi: float) -> PulseSequence:
    """No pulses at all; the k = 0 cosine sequence."""
    return cosine_fttps(0, m, tau_pi)


def switching_function(seq: PulseSequence) -> SwitchingFunction:
    """Sign function of a sequence: +1 at 0+, flipping at every pulse."""
    times = seq.pulse_times()
    sign = 1
    boundaries = [0.0]
    signs = []
    for t in times:
        if t == 0.0:
            sign = -sign
            continue
        boundaries.append(float(t))
        signs.append(sign)
        sign = -sign
    signs.append(sign)
    boundaries.append(seq.duration)
    return SwitchingFunction(tuple(boundaries), tuple(signs))


def repeat_sequence(seq: PulseSequence, reps: int) -> PulseSequence:
    """Tile a base sequence ``reps`` times over total time ``reps * T``.

    The resulting comb sharpens each filter-function passband into peaks
    at harmonics of ``2*pi/T`` while leaving the peak positions fixed.
    """
    if reps < 1:
        raise ValueError("repetition count must be >= 1")
    if seq.repetitions != 1:
        raise ValueError("sequence is already tiled")
    if reps == 1:
        return seq
    base = 2 ** (seq.m + 1)
    slots = tuple(s + r * base for r in range(reps) for s in seq.pulse_slots)
    return PulseSequence(seq.kind, seq.k, seq.m, seq.tau_pi, slots,
                         seq.waveform_sign, repetitions=reps)


# ---------------------------------------------------------------------------
# Experiment plan

#: Observables recorded per combination.  Pair settings also record the
#: single-qubit marginals, which come for free from the same shot tallies
#: and feed the static-parameter estimator.
_COMBO_OBSERVABLES = {
    1: ("X1", "Y1"),
    2: ("X2", "Y2"),
    3: ("X1X2", "Y1Y2", "X1Y2", "Y1X2", "X1", "Y1", "X2", "Y2"),
    4: ("X1X2", "Y1Y2", "X1Y2", "Y1X2"),
}

_COMBO_PREPS = {1: ("X", "Z"), 2: ("Z", "X"), 3: ("X", "X"), 4: ("X", "X")}


@dataclass(frozen=True)
class PlanSetting:
    """One experimental setting: prep, a sequence per qubit, observables."""

    combo: int
    k: int
    prep: tuple[str, str]
    seq1: PulseSequence
    seq2: PulseSequence
    observables: tuple[str, ...]

    def __post_init__(self):
        if not np.isclose(self.seq1.duration, self.seq2.duration, rtol=1e-12):
            raise ValueError("both sequences of a setting must share total time")

    @property
    def key(self) -> tuple[int, int]:
        return (self.combo, self.k)


@dataclass(frozen=True)
class ExperimentPlan:
    """The full enumeration of settings for orders 0..K-1."""

    K: int
    m: int
    tau_pi: float
    repetitions: int
    settings: tuple[PlanSetting, ...]

    @property
    def n_slots(self) -> int:
        return self.repetitions * 2 ** (self.m + 1)

    @property
    def base_duration(self) -> float:
        return 2 ** (self.m + 1) * self.tau_pi

    @property
    def duration(self) -> float:
        return self.n_slots * self.tau_pi

    @property
    def max_pulses(self) -> int:
        """Largest pulse count of any single sequence in the plan."""
        if not self.settings:
            return 0
        return max(max(len(s.seq1.pulse_slots), len(s.seq2.pulse_slots))
                   for s in self.settings)

    def setting(self, combo: int, k: int) -> PlanSetting:
        for s in self.settings:
            if s.combo == combo and s.k == k:
                return s
        raise KeyError(f"no setting (combo={combo}, k={k}) in plan")


def build_plan(K: int, m: int, tau_pi: float, reps: int = 1,
               min_gap_slots: int = 0) -> ExperimentPlan:
    """Enumerate all settings for orders k = 0..K-1.

    Combination 4 starts at k = 1 because the order-0 sine sequence does
    not exist.  ``min_gap_slots`` optionally drops settings whose
    sequences contain pulses closer than the given slot gap (a hardware
    constraint, off by default).

    Settings per plan: K (combo 1) + K (combo 2) + K (combo 3)
    + (K-1) (combo 4) = 4K - 1.
    """
    if not 1 <= K <= 2**m:
        raise ValueError(f"K={K} outside [1, {2**m}] for m={m}")

    def tiled(seq):
        return repeat_sequence(seq, reps)

    settings = []
    for combo in (1, 2, 3, 4):
        k_range = range(1, K) if combo == 4 else range(K)
        for k in k_range:
            cos_k = tiled(cosine_fttps(k, m, tau_pi))
            frees = tiled(free_evolution(m, tau_pi))
            if combo == 1:
                seq1, seq2 = cos_k, frees
            elif combo == 2:
                seq1, seq2 = frees, cos_k
            elif combo == 3:
                seq1, seq2 = cos_k, cos_k
            else:
                seq1 = cos_k
                seq2 = tiled(sine_fttps(k, m, tau_pi))
            if min_gap_slots and _min_gap(seq1, seq2) < min_gap_slots:
                continue
            settings.append(PlanSetting(
                combo=combo, k=k, prep=_COMBO_PREPS[combo],
                seq1=seq1, seq2=seq2,
                observables=_COMBO_OBSERVABLES[combo]))
    return ExperimentPlan(K=K, m=m, tau_pi=tau_pi, repetitions=reps,
                          settings=tuple(settings))


def _min_gap(*seqs: PulseSequence) -> int:
    gaps = []
    for seq in seqs:
        slots = sorted(seq.pulse_slots)
        if len(slots) > 1:
            gaps.append(min(np.diff(slots)))
    return min(gaps) if gaps else 10**9
