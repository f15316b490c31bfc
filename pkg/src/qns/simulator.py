"""Monte-Carlo trajectory simulation of two-qubit dephasing experiments.

Evolution is slotted: per grid slot the scheduled pi-pulses act first,
then the slot's accumulated phase is applied as the commuting error
unitary R_z1(phi1 + delta1*dt) R_z2(phi2 + delta2*dt) R_zz(phi12 + J*dt)
with R_z(phi) = exp(-i phi Z).  A free evolution therefore accumulates
total Z phase delta*T and the measured angle is 2*delta*T.  The Z-basis
preparation is |0>, the +1 eigenstate, matching the analytic model.

For instantaneous pulses every term is Z-diagonal between gates, so the
toggling-frame phases collapse to sign-weighted sums over slots; that
vectorized path is used for full runs, while the explicit per-slot state
evolution below serves as its independent check and as the base of the
finite-width variant.

Shot sampling applies the readout confusion to the outcome distribution
before drawing, which is equivalent in law to flipping individual shots.
Averages over realizations use numpy's pairwise summation, keeping the
reduction order-insensitive.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np
from scipy.linalg import expm

from .errors import DataError, NumericalError
from .noise import (TrajectorySet, generate_stratified_trajectories,
                    generate_trajectories)
from .oracle import StaticParams
from .sequences import ExperimentPlan, PlanSetting, PulseSequence, switching_function

__all__ = [
    "StaticParams",
    "ReadoutModel",
    "PulseModel",
    "MeasurementRecord",
    "RunResult",
    "evolve_one",
    "evolve_one_finite_width",
    "measure",
    "mitigate_readout",
    "mitigate_records",
    "expectation_from_distribution",
    "observable_values",
    "run_plan",
    "run_plan_with_trajectories",
]

# computational-basis sign patterns, ordering |q1 q2> = kron(q1, q2)
_Z1 = np.array([1.0, 1.0, -1.0, -1.0])
_Z2 = np.array([1.0, -1.0, 1.0, -1.0])
_Z12 = _Z1 * _Z2

_KETS = {"X": np.array([1.0, 1.0]) / np.sqrt(2.0), "Z": np.array([1.0, 0.0])}

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
_BASIS_ROT = {
    "X": _H.astype(complex),
    "Y": _H @ np.diag([1.0, -1.0j]),
    "Z": np.eye(2, dtype=complex),
}

_X = np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass(eq=False)
class ReadoutModel:
    """Column-stochastic confusion matrices C[read, true] per qubit.

    ``joint`` overrides the tensor product when classical readout
    crosstalk couples the two discriminators.
    """

    qubit1: np.ndarray
    qubit2: np.ndarray
    joint: np.ndarray | None = None

    def __post_init__(self):
        self.qubit1 = np.asarray(self.qubit1, dtype=float)
        self.qubit2 = np.asarray(self.qubit2, dtype=float)
        if self.joint is not None:
            self.joint = np.asarray(self.joint, dtype=float)
        for mat, shape in [(self.qubit1, (2, 2)), (self.qubit2, (2, 2))] + (
                [(self.joint, (4, 4))] if self.joint is not None else []):
            if mat.shape != shape:
                raise ValueError(f"confusion matrix must be {shape}")
            if np.any(mat < 0) or not np.allclose(mat.sum(axis=0), 1.0,
                                                  atol=1e-9):
                raise ValueError("confusion columns must be distributions")

    @classmethod
    def symmetric(cls, p1: float, p2: float | None = None) -> "ReadoutModel":
        """Equal 0->1 and 1->0 flip probability per qubit."""
        if p2 is None:
            p2 = p1
        def flip(p):
            return np.array([[1 - p, p], [p, 1 - p]])
        return cls(qubit1=flip(p1), qubit2=flip(p2))

    @property
    def matrix(self) -> np.ndarray:
        if self.joint is not None:
            return self.joint
        return np.kron(self.qubit1, self.qubit2)


@dataclass(frozen=True)
class PulseModel:
    """Square-envelope pi-pulse model; width 0 means instantaneous."""

    width: float = 0.0
    substeps: int = 8
    envelope: str = "square"

    def __post_init__(self):
        if self.width < 0:
            raise ValueError("width must be >= 0")
        if self.substeps < 8:
            raise ValueError("need at least 8 sub-steps per pulse")
        if self.envelope != "square":
            raise ValueError("only the square envelope is modeled")


@dataclass
class MeasurementRecord:
    """Expectation estimates of one setting with their shot statistics.

    ``per_trajectory`` holds the per-realization expectations used for
    standard errors and bootstrap resampling.  ``tallies`` (finite shots
    only) maps each measured basis, e.g. ``"XY"``, to raw per-realization
    outcome counts of shape (R, 4).
    """

    combo: int
    k: int
    prep: tuple[str, str]
    observables: tuple[str, ...]
    shots: int | None
    expectations: dict[str, float]
    per_trajectory: dict[str, np.ndarray]
    tallies: dict[str, np.ndarray] | None = None

    @property
    def key(self) -> tuple[int, int]:
        return (self.combo, self.k)

    @property
    def n_trajectories(self) -> int:
        first = next(iter(self.per_trajectory.values()))
        return len(first)

    def to_dict(self) -> dict:
        doc = {
            "combo": self.combo,
            "k": self.k,
            "prep": list(self.prep),
            "observables": list(self.observables),
            "shots": self.shots,
            "expectations": {k: float(v) for k, v in self.expectations.items()},
            "per_trajectory": {k: np.asarray(v).tolist()
                               for k, v in self.per_trajectory.items()},
        }
        if self.tallies is not None:
            doc["tallies"] = {b: np.asarray(t).tolist()
                              for b, t in self.tallies.items()}
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "MeasurementRecord":
        try:
            tallies = doc.get("tallies")
            return cls(
                combo=int(doc["combo"]),
                k=int(doc["k"]),
                prep=tuple(doc["prep"]),
                observables=tuple(doc["observables"]),
                shots=doc["shots"],
                expectations={k: float(v)
                              for k, v in doc["expectations"].items()},
                per_trajectory={k: np.asarray(v, dtype=float)
                                for k, v in doc["per_trajectory"].items()},
                tallies=None if tallies is None else
                        {b: np.asarray(t, dtype=int)
                         for b, t in tallies.items()},
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed measurement record: {exc}") from exc


@dataclass
class RunResult:
    """All records of one run plus the provenance needed to reproduce it."""

    records: dict[tuple[int, int], MeasurementRecord]
    master_seed: int
    n_trajectories: int
    shots: int | None
    oversample: int = 1

    def to_dict(self) -> dict:
        return {
            "format": "qns-records-v1",
            "master_seed": self.master_seed,
            "n_trajectories": self.n_trajectories,
            "shots": self.shots,
            "oversample": self.oversample,
            "records": [rec.to_dict()
                        for _, rec in sorted(self.records.items())],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "RunResult":
        if doc.get("format") != "qns-records-v1":
            raise DataError("unrecognized records format")
        records = {}
        for entry in doc["records"]:
            rec = MeasurementRecord.from_dict(entry)
            records[rec.key] = rec
        return cls(records=records,
                   master_seed=int(doc["master_seed"]),
                   n_trajectories=int(doc["n_trajectories"]),
                   shots=doc["shots"],
                   oversample=int(doc.get("oversample", 1)))


# ---------------------------------------------------------------------------
# Per-realization state evolution

def _prep_state(prep: tuple[str, str]) -> np.ndarray:
    return np.kron(_KETS[prep[0]], _KETS[prep[1]]).astype(complex)


def _pulse_signs(seq: PulseSequence) -> dict[int, float]:
    """Slot -> drive sign for the configured waveform pattern."""
    slots = sorted(seq.pulse_slots)
    if seq.waveform_sign == "same":
        return {slot: 1.0 for slot in slots}
    return {slot: (-1.0) ** i for i, slot in enumerate(slots)}


def _slot_phases(trajectory: Mapping[str, np.ndarray], statics: StaticParams,
                 n_slots: int, tau: float):
    out = []
    for label, delta in [("qubit1", statics.delta1), ("qubit2", statics.delta2),
                         ("crosstalk", statics.j_zz)]:
        angles = np.asarray(trajectory.get(label, np.zeros(n_slots)))
        if angles.shape != (n_slots,):
            raise DataError(
                f"trajectory for {label} has shape {angles.shape}, "
                f"expected ({n_slots},)")
        out.append(angles + delta * tau)
    return out


def evolve_one(setting: PlanSetting, trajectory: Mapping[str, np.ndarray],
               statics: StaticParams,
               pulse_model: PulseModel | None = None) -> np.ndarray:
    """Final pure state of one noise realization, slot by slot.

    ``trajectory`` maps channel labels to per-slot accumulated phases
    (rad).  Within a slot the scheduled gates act before the slot's error
    unitary; with Z-diagonal errors and X pi-pulses the orderings differ
    only in which side of the pulse the slot's phase accrues.
    """
    if pulse_model is not None and pulse_model.width > 0:
        return evolve_one_finite_width(setting, trajectory, statics,
                                       pulse_model)
    n = setting.seq1.n_slots
    phi1, phi2, phi12 = _slot_phases(trajectory, statics, n, setting.seq1.tau_pi)
    signs1 = _pulse_signs(setting.seq1)
    signs2 = _pulse_signs(setting.seq2)
    x1 = np.kron(_X, np.eye(2)).astype(complex)
    x2 = np.kron(np.eye(2), _X).astype(complex)
    state = _prep_state(setting.prep)
    for i in range(n):
        if i in signs1:
            state = -1j * signs1[i] * (x1 @ state)
        if i in signs2:
            state = -1j * signs2[i] * (x2 @ state)
        phase = phi1[i] * _Z1 + phi2[i] * _Z2 + phi12[i] * _Z12
        state = np.exp(-1j * phase) * state
    return state


def evolve_one_finite_width(setting: PlanSetting,
                            trajectory: Mapping[str, np.ndarray],
                            statics: StaticParams,
                            pulse_model: PulseModel) -> np.ndarray:
    """Same contract with square pi-pulses of the configured width.

    Each pulse occupies the start of its slot with drive amplitude
    ``Omega = pi/width`` on X/2; the slot's noise phase accrues at a
    uniform rate, so the drive competes with the instantaneous dephasing
    terms inside the window.  The window is split into the configured
    sub-steps (the square envelope makes them identical factors).
    """
    seq1, seq2 = setting.seq1, setting.seq2
    tau = seq1.tau_pi
    width = pulse_model.width
    if width >= tau:
        raise ValueError("pulse width must be below the inter-pulse gap")
    n = seq1.n_slots
    phi1, phi2, phi12 = _slot_phases(trajectory, statics, n, tau)
    signs1 = _pulse_signs(seq1)
    signs2 = _pulse_signs(seq2)
    omega = np.pi / width
    x1 = np.kron(_X, np.eye(2))
    x2 = np.kron(np.eye(2), _X)
    state = _prep_state(setting.prep)
    frac = width / tau
    for i in range(n):
        s1, s2 = signs1.get(i), signs2.get(i)
        if s1 is None and s2 is None:
            phase = phi1[i] * _Z1 + phi2[i] * _Z2 + phi12[i] * _Z12
            state = np.exp(-1j * phase) * state
            continue
        drive = np.zeros((4, 4))
        if s1 is not None:
            drive = drive + 0.5 * omega * s1 * x1
        if s2 is not None:
            drive = drive + 0.5 * omega * s2 * x2
        rates = np.diag((phi1[i] * _Z1 + phi2[i] * _Z2 + phi12[i] * _Z12) / tau)
        dt_sub = width / pulse_model.substeps
        u_sub = expm(-1j * (drive + rates) * dt_sub)
        u_window = np.linalg.matrix_power(u_sub, pulse_model.substeps)
        state = u_window @ state
        remainder = (1.0 - frac) * (phi1[i] * _Z1 + phi2[i] * _Z2
                                    + phi12[i] * _Z12)
        state = np.exp(-1j * remainder) * state
    return state


# ---------------------------------------------------------------------------
# Measurement

def _observable_basis(obs: str, setting: PlanSetting) -> str:
    if len(obs) == 4:
        return obs[0] + obs[2]
    if len(obs) == 2 and obs[0] in "XY" and obs[1] in "12":
        if setting.combo == 1:
            return obs[0] + "Z"
        if setting.combo == 2:
            return "Z" + obs[0]
        return obs[0] + obs[0]
    raise ValueError(f"invalid observable {obs!r}")


def observable_values(obs: str) -> np.ndarray:
    """Readout eigenvalues of an observable over the 4 outcomes."""
    if len(obs) == 4:
        return _Z12
    return _Z1 if obs[1] == "1" else _Z2


def _setting_bases(setting: PlanSetting) -> list[str]:
    bases = []
    for obs in setting.observables:
        b = _observable_basis(obs, setting)
        if b not in bases:
            bases.append(b)
    return bases


def _basis_matrix(basis: str) -> np.ndarray:
    return np.kron(_BASIS_ROT[basis[0]], _BASIS_ROT[basis[1]])


def measure(setting: PlanSetting, state: np.ndarray, shots: int,
            readout_model: ReadoutModel | None = None,
            rng: np.random.Generator | None = None) -> dict[str, np.ndarray]:
    """Shot tallies per measurement basis for one final state.

    Born probabilities after the basis rotation, confusion applied to the
    distribution, multinomial sampling; tallies come back unmitigated.
    """
    if rng is None:
        rng = np.random.default_rng()
    confusion = None if readout_model is None else readout_model.matrix
    tallies = {}
    for basis in _setting_bases(setting):
        probs = np.abs(_basis_matrix(basis) @ state) ** 2
        if confusion is not None:
            probs = confusion @ probs
        probs = np.clip(probs, 0.0, None)
        tallies[basis] = rng.multinomial(shots, probs / probs.sum())
    return tallies


def expectation_from_distribution(obs: str, dist: np.ndarray) -> float:
    """Observable expectation from an outcome distribution in its basis."""
    dist = np.asarray(dist, dtype=float)
    total = dist.sum(axis=-1, keepdims=True)
    return float(np.squeeze((dist / total) @ observable_values(obs)))


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, len(v) + 1) > css)[0][-1]
    return np.clip(v - css[rho] / (rho + 1.0), 0.0, None)


def mitigate_readout(tally: np.ndarray,
                     readout_model: ReadoutModel) -> np.ndarray:
    """Inverse-confusion corrected outcome distribution(s).

    Accepts counts or probabilities with any leading shape; each
    corrected vector is projected onto the probability simplex.
    """
    confusion = readout_model.matrix
    if np.linalg.cond(confusion) > 1e8:
        raise NumericalError("confusion matrix is singular or nearly so")
    inv = np.linalg.inv(confusion)
    arr = np.asarray(tally, dtype=float)
    dist = arr / arr.sum(axis=-1, keepdims=True)
    corrected = dist @ inv.T
    flat = corrected.reshape(-1, corrected.shape[-1])
    projected = np.stack([_project_simplex(row) for row in flat])
    return projected.reshape(corrected.shape)


def mitigate_records(result: RunResult,
                     readout_model: ReadoutModel) -> RunResult:
    """Rebuild all expectations from mitigated per-trajectory tallies."""
    out = {}
    for key, rec in result.records.items():
        if rec.tallies is None:
            raise DataError(
                f"record {key} has no tallies; mitigation needs finite shots")
        setting_like = rec
        per_traj = {}
        for obs in rec.observables:
            basis = _observable_basis(obs, setting_like)
            corrected = mitigate_readout(rec.tallies[basis], readout_model)
            per_traj[obs] = corrected @ observable_values(obs)
        out[key] = MeasurementRecord(
            combo=rec.combo, k=rec.k, prep=rec.prep,
            observables=rec.observables, shots=rec.shots,
            expectations={o: float(np.mean(v)) for o, v in per_traj.items()},
            per_trajectory=per_traj, tallies=rec.tallies)
    return RunResult(records=out, master_seed=result.master_seed,
                     n_trajectories=result.n_trajectories, shots=result.shots,
                     oversample=result.oversample)


# ---------------------------------------------------------------------------
# Full runs

def _toggled_phase_sums(slot_angles: dict[str, np.ndarray],
                        setting: PlanSetting,
                        statics: StaticParams) -> tuple[np.ndarray, ...]:
    """Toggling-frame half-angles a1, a2, a12 per realization."""
    n = setting.seq1.n_slots
    tau = setting.seq1.tau_pi
    s1 = switching_function(setting.seq1).slot_signs(n).astype(float)
    s2 = switching_function(setting.seq2).slot_signs(n).astype(float)
    s12 = s1 * s2
    a1 = slot_angles["qubit1"] @ s1 + statics.delta1 * tau * s1.sum()
    a2 = slot_angles["qubit2"] @ s2 + statics.delta2 * tau * s2.sum()
    a12 = slot_angles["crosstalk"] @ s12 + statics.j_zz * tau * s12.sum()
    return a1, a2, a12


def _pure_expectations(setting: PlanSetting, th1, th2, th12) -> dict[str, np.ndarray]:
    """Vectorized single-realization expectations (no decay factors)."""
    out = {}
    for obs in setting.observables:
        if len(obs) == 2:
            theta = th1 if obs[1] == "1" else th2
            trig = np.cos if obs[0] == "X" else np.sin
            partner = setting.prep[1] if obs[1] == "1" else setting.prep[0]
            if partner == "Z":
                val = trig(theta + th12)
            else:
                val = trig(theta) * np.cos(th12)
        elif obs == "X1X2":
            val = 0.5 * (np.cos(th1 + th2) + np.cos(th1 - th2))
        elif obs == "Y1Y2":
            val = 0.5 * (np.cos(th1 - th2) - np.cos(th1 + th2))
        elif obs == "X1Y2":
            val = 0.5 * (np.sin(th1 + th2) - np.sin(th1 - th2))
        elif obs == "Y1X2":
            val = 0.5 * (np.sin(th1 + th2) + np.sin(th1 - th2))
        else:
            raise ValueError(f"unknown observable {obs!r}")
        out[obs] = val
    return out


def _batched_states(setting: PlanSetting, a1, a2, a12) -> np.ndarray:
    """(R, 4) pure states from toggling-frame half-angles."""
    prep = _prep_state(setting.prep)
    phase = (np.outer(a1, _Z1) + np.outer(a2, _Z2) + np.outer(a12, _Z12))
    return np.exp(-1j * phase) * prep[None, :]


def _sample_setting(setting: PlanSetting, states: np.ndarray, shots: int,
                    readout: ReadoutModel | None,
                    rng: np.random.Generator):
    """Tallies and per-trajectory expectations for one setting."""
    confusion = None if readout is None else readout.matrix
    tallies = {}
    for basis in _setting_bases(setting):
        rotated = states @ _basis_matrix(basis).T
        probs = np.abs(rotated) ** 2
        if confusion is not None:
            probs = probs @ confusion.T
        probs = np.clip(probs, 0.0, None)
        probs /= probs.sum(axis=1, keepdims=True)
        counts = np.empty(probs.shape, dtype=int)
        for r in range(probs.shape[0]):
            counts[r] = rng.multinomial(shots, probs[r])
        tallies[basis] = counts
    per_traj = {}
    for obs in setting.observables:
        basis = _observable_basis(obs, setting)
        dist = tallies[basis] / shots
        per_traj[obs] = dist @ observable_values(obs)
    return tallies, per_traj


def _exact_expectations(setting: PlanSetting, a1, a2, a12,
                        readout: ReadoutModel | None) -> dict[str, np.ndarray]:
    if readout is None:
        return _pure_expectations(setting, 2 * a1, 2 * a2, 2 * a12)
    states = _batched_states(setting, a1, a2, a12)
    confusion = readout.matrix
    out = {}
    cache = {}
    for obs in setting.observables:
        basis = _observable_basis(obs, setting)
        if basis not in cache:
            probs = np.abs(states @ _basis_matrix(basis).T) ** 2
            cache[basis] = probs @ confusion.T
        out[obs] = cache[basis] @ observable_values(obs)
    return out


def run_plan_with_trajectories(plan: ExperimentPlan,
                               trajectories: TrajectorySet,
                               statics: StaticParams | None = None,
                               shots: int | None = None,
                               readout: ReadoutModel | None = None,
                               pulse_model: PulseModel | None = None,
                               master_seed: int = 0,
                               oversample: int = 1,
                               threads: int | None = None) -> RunResult:
    """Run every setting of a plan over an existing trajectory set.

    The same realizations are applied to all settings.  ``shots=None``
    records exact per-realization expectations (infinite-shot mode);
    otherwise each basis of each realization is sampled ``shots`` times.
    Noise may be generated on a grid ``oversample`` times finer than the
    slot grid; per-slot phases are the sums over fine steps, which is
    exact for instantaneous pulses.
    """
    statics = statics or StaticParams()
    n_slots = plan.n_slots
    fine_steps = n_slots * oversample
    slot_angles = {}
    for label in ("qubit1", "qubit2", "crosstalk"):
        angles = trajectories.angles.get(label)
        if angles is None:
            n_real = trajectories.n_realizations
            slot_angles[label] = np.zeros((n_real, n_slots))
            continue
        if angles.shape[1] != fine_steps:
            raise DataError(
                f"trajectories supply {angles.shape[1]} steps, plan needs "
                f"{fine_steps} (oversample {oversample})")
        slot_angles[label] = angles.reshape(angles.shape[0], n_slots,
                                            oversample).sum(axis=2)
    n_real = next(iter(slot_angles.values())).shape[0]

    finite_width = pulse_model is not None and pulse_model.width > 0
    records = {}
    for idx, setting in enumerate(sorted(plan.settings, key=lambda s: s.key)):
        rng = np.random.default_rng(
            np.random.SeedSequence([master_seed, 7700 + idx]))
        if finite_width:
            def one(r):
                traj = {label: slot_angles[label][r]
                        for label in slot_angles}
                return evolve_one_finite_width(setting, traj, statics,
                                               pulse_model)
            if threads and threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    states = np.stack(list(pool.map(one, range(n_real))))
            else:
                states = np.stack([one(r) for r in range(n_real)])
            if shots is None:
                per_traj = {}
                for obs in setting.observables:
                    basis = _observable_basis(obs, setting)
                    probs = np.abs(states @ _basis_matrix(basis).T) ** 2
                    if readout is not None:
                        probs = probs @ readout.matrix.T
                    per_traj[obs] = probs @ observable_values(obs)
                tallies = None
            else:
                tallies, per_traj = _sample_setting(setting, states, shots,
                                                    readout, rng)
        else:
            a1, a2, a12 = _toggled_phase_sums(slot_angles, setting, statics)
            if shots is None:
                per_traj = _exact_expectations(setting, a1, a2, a12, readout)
                tallies = None
            else:
                states = _batched_states(setting, a1, a2, a12)
                tallies, per_traj = _sample_setting(setting, states, shots,
                                                    readout, rng)
        records[setting.key] = MeasurementRecord(
            combo=setting.combo, k=setting.k, prep=setting.prep,
            observables=setting.observables, shots=shots,
            expectations={o: float(np.mean(v)) for o, v in per_traj.items()},
            per_trajectory=per_traj, tallies=tallies)
    return RunResult(records=records, master_seed=master_seed,
                     n_trajectories=n_real, shots=shots,
                     oversample=oversample)


def run_plan(plan: ExperimentPlan, specs, statics: StaticParams | None = None,
             n_trajectories: int = 1000, shots: int | None = None,
             readout: ReadoutModel | None = None,
             pulse_model: PulseModel | None = None, master_seed: int = 0,
             oversample: int = 1, threads: int | None = None,
             sampling: str = "iid") -> RunResult:
    """Generate trajectories for a plan and measure every setting.

    ``sampling="iid"`` draws one set of independent realizations shared
    by every setting.  ``sampling="stratified"`` draws a fresh set per
    setting whose projections onto that setting's switching-weighted
    phase sums follow a scrambled Sobol net; recorded expectations then
    converge much faster in the realization count, at the cost of
    independent rather than shared noise across settings.
    """
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    if sampling not in ("iid", "stratified"):
        raise ValueError("sampling must be 'iid' or 'stratified'")
    n_steps = plan.n_slots * oversample
    dt = plan.tau_pi / oversample
    if sampling == "iid":
        trajectories = generate_trajectories(
            specs, n_steps=n_steps, n_realizations=n_trajectories,
            master_seed=master_seed, dt=dt)
        return run_plan_with_trajectories(
            plan, trajectories, statics=statics, shots=shots, readout=readout,
            pulse_model=pulse_model, master_seed=master_seed,
            oversample=oversample, threads=threads)

    records = {}
    for idx, setting in enumerate(sorted(plan.settings, key=lambda s: s.key)):
        signs1 = switching_function(setting.seq1).slot_signs(
            plan.n_slots).astype(float)
        signs2 = switching_function(setting.seq2).slot_signs(
            plan.n_slots).astype(float)
        weights = {
            "qubit1": np.repeat(signs1, oversample),
            "qubit2": np.repeat(signs2, oversample),
            "crosstalk": np.repeat(signs1 * signs2, oversample),
        }
        seed = int(np.random.SeedSequence(
            [master_seed, 5200 + idx]).generate_state(1)[0])
        trajectories = generate_stratified_trajectories(
            specs, n_steps=n_steps, n_realizations=n_trajectories,
            master_seed=seed, dt=dt, weights=weights)
        part = run_plan_with_trajectories(
            replace(plan, settings=(setting,)), trajectories,
            statics=statics, shots=shots, readout=readout,
            pulse_model=pulse_model, master_seed=seed,
            oversample=oversample, threads=threads)
        records.update(part.records)
    return RunResult(records=records, master_seed=master_seed,
                     n_trajectories=n_trajectories, shots=shots,
                     oversample=oversample)
