"""Estimators that turn measurement records into decay rates, static
parameters, and reconstructed spectra.

Decay-rate extraction inverts the amplitude algebra of the expectation
model: single-qubit settings give one decay per order from the
quadrature amplitude, two-qubit settings give the summed decay and the
cross decay from log-ratios of the four pair amplitudes.  Standard
errors follow by the delta method from the per-trajectory covariance.
Spectra come from a least-squares solve of the bin-integrated system,
confidence intervals from trajectory bootstrap.
"""

from __future__ import annotations

import csv
import dataclasses
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.optimize import lsq_linear

from .errors import DataError, NumericalError
from .filters import BLOCK_NAMES, FrequencyGrid, ReconstructionSystem
from .sequences import ExperimentPlan
from .simulator import MeasurementRecord

__all__ = [
    "CHI_MAX",
    "DecayRateVector",
    "InversionOptions",
    "SpectrumEstimate",
    "StaticEstimate",
    "background_subtract",
    "bootstrap_ci",
    "estimate_statics",
    "extract_decay_rates",
    "invert_spectra",
    "mae",
    "pipeline_estimator",
    "records_from_expectations",
]

# Amplitudes below e^{-CHI_MAX} are numerically dead: an unbounded log
# would let a single starved setting dominate the least squares.
CHI_MAX = 10.0

_PAIR_OBSERVABLES = ("X1X2", "Y1Y2", "X1Y2", "Y1X2")


def _as_records(records) -> dict:
    return dict(getattr(records, "records", records))


def _mean_covariance(rec: MeasurementRecord, names) -> np.ndarray:
    """Covariance matrix of the listed observables' sample means."""
    samples = np.stack([np.asarray(rec.per_trajectory[name], dtype=float)
                        for name in names])
    r = samples.shape[1]
    if r < 2:
        return np.zeros((len(names), len(names)))
    return np.atleast_2d(np.cov(samples, ddof=1)) / r


@dataclasses.dataclass(frozen=True)
class DecayRateVector:
    """Measured decay exponents, one per reconstruction-system row.

    ``row_tags`` mirror the system's ``(combo, k, kind)`` labels so the
    two stay aligned by construction.  ``clamped`` marks entries whose
    amplitude fell below ``e^{-CHI_MAX}``; their value is the floor and
    their standard error is inflated to ``CHI_MAX``.
    """

    values: np.ndarray
    std_errors: np.ndarray
    row_tags: tuple[tuple[int, int, str], ...]
    clamped: np.ndarray

    def __post_init__(self):
        n = len(self.row_tags)
        for name in ("values", "std_errors", "clamped"):
            if getattr(self, name).shape != (n,):
                raise DataError(f"decay-rate field {name} does not match "
                                f"the {n} row tags")


def _log_amplitude(e_x: float, e_y: float,
                   cov: np.ndarray) -> tuple[float, float, bool]:
    """chi = -ln sqrt(ex^2 + ey^2) with the dead-signal floor."""
    q = e_x * e_x + e_y * e_y
    if q <= np.exp(-2.0 * CHI_MAX):
        return CHI_MAX, CHI_MAX, True
    grad = np.array([e_x, e_y]) / q
    se = float(np.sqrt(grad @ cov @ grad))
    return float(-0.5 * np.log(q)), se, False


def _pair_decays(rec: MeasurementRecord):
    """(chi_sum, chi_cross) from the four pair observables.

    The sum and difference combinations of the pair expectations form
    two quadrature amplitudes e^{-(chi_sum -+ chi_cross)}; log-ratios
    separate the two exponents.
    """
    try:
        e = np.array([rec.expectations[p] for p in _PAIR_OBSERVABLES])
    except KeyError as exc:
        raise DataError(f"setting ({rec.combo}, {rec.k}) lacks pair "
                        f"observable {exc}") from exc
    cov = _mean_covariance(rec, _PAIR_OBSERVABLES)
    g1, g2 = e[0] + e[1], e[0] - e[1]
    g3, g4 = e[2] + e[3], e[3] - e[2]
    r_plus = g1 * g1 + g4 * g4
    r_minus = g2 * g2 + g3 * g3

    floor = np.exp(-2.0 * CHI_MAX)
    clamp = r_plus <= floor or r_minus <= floor
    if clamp:
        l_plus = CHI_MAX if r_plus <= floor else -0.5 * np.log(r_plus)
        l_minus = CHI_MAX if r_minus <= floor else -0.5 * np.log(r_minus)
        chi_sum = 0.5 * (l_plus + l_minus)
        chi_cross = 0.5 * (l_minus - l_plus)
        return (chi_sum, CHI_MAX, True), (chi_cross, CHI_MAX, True)

    l_plus = -0.5 * np.log(r_plus)
    l_minus = -0.5 * np.log(r_minus)
    # d g / d e rows for (g1, g2, g3, g4)
    d_plus = -(g1 * np.array([1.0, 1.0, 0.0, 0.0])
               + g4 * np.array([0.0, 0.0, -1.0, 1.0])) / r_plus
    d_minus = -(g2 * np.array([1.0, -1.0, 0.0, 0.0])
                + g3 * np.array([0.0, 0.0, 1.0, 1.0])) / r_minus
    grad_sum = 0.5 * (d_plus + d_minus)
    grad_cross = 0.5 * (d_minus - d_plus)
    se_sum = float(np.sqrt(grad_sum @ cov @ grad_sum))
    se_cross = float(np.sqrt(grad_cross @ cov @ grad_cross))
    chi_sum = 0.5 * (l_plus + l_minus)
    chi_cross = 0.5 * (l_minus - l_plus)
    return (chi_sum, se_sum, False), (chi_cross, se_cross, False)


def extract_decay_rates(records) -> DecayRateVector:
    """Invert observable amplitudes into the decay-rate vector.

    Rows come out in the same sorted ``(combo, k)`` order the
    reconstruction system uses, with two-qubit settings contributing
    their summed-self row before their cross row.
    """
    recs = _as_records(records)
    values, ses, tags, clamped = [], [], [], []
    for key in sorted(recs):
        rec = recs[key]
        if rec.combo in (1, 2):
            n = "1" if rec.combo == 1 else "2"
            names = (f"X{n}", f"Y{n}")
            try:
                e_x = rec.expectations[names[0]]
                e_y = rec.expectations[names[1]]
            except KeyError as exc:
                raise DataError(f"setting {key} lacks observable "
                                f"{exc}") from exc
            chi, se, flag = _log_amplitude(e_x, e_y,
                                           _mean_covariance(rec, names))
            values.append(chi)
            ses.append(se)
            tags.append((rec.combo, rec.k, f"self{n}_zz"))
            clamped.append(flag)
        elif rec.combo in (3, 4):
            (chi_s, se_s, f_s), (chi_c, se_c, f_c) = _pair_decays(rec)
            values.append(chi_s)
            ses.append(se_s)
            tags.append((rec.combo, rec.k, "self_sum"))
            clamped.append(f_s)
            values.append(chi_c)
            ses.append(se_c)
            tags.append((rec.combo, rec.k, "cross"))
            clamped.append(f_c)
        else:
            raise DataError(f"unknown combination {rec.combo}")
    return DecayRateVector(values=np.array(values),
                           std_errors=np.array(ses),
                           row_tags=tuple(tags),
                           clamped=np.array(clamped, dtype=bool))


@dataclasses.dataclass(frozen=True)
class StaticEstimate:
    """Static detunings and crosstalk strength with wrap diagnostics.

    ``j_from_amplitude`` is the arccos of the two-basis amplitude ratio
    on qubit 2; it only resolves the crosstalk angle up to sign and is
    kept as a consistency check on the phase-based ``j_zz``.
    """

    delta1: float
    delta2: float
    j_zz: float
    wrap_delta1: bool = False
    wrap_delta2: bool = False
    wrap_j: bool = False
    j_from_amplitude: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "delta1_rad_s": self.delta1,
            "delta2_rad_s": self.delta2,
            "j_zz_rad_s": self.j_zz,
            "wrap_delta1": self.wrap_delta1,
            "wrap_delta2": self.wrap_delta2,
            "wrap_j": self.wrap_j,
            "j_from_amplitude_rad_s": self.j_from_amplitude,
        }


def _wrap_pi(x: float) -> float:
    return (x + np.pi) % (2.0 * np.pi) - np.pi


def estimate_statics(records, total_time: float) -> StaticEstimate:
    """Static parameters from the three free-evolution settings.

    The both-in-X setting gives each detuning angle modulo pi; the
    small-detuning branch (-pi/2, pi/2] is selected because shifting
    both detuning angles and the crosstalk angle by pi together leaves
    every observable unchanged, so the joint sign is a convention.  The
    partner-in-Z settings then carry theta_n + theta_12, from which the
    crosstalk angle follows on [0, 2 pi) per qubit; the two readings are
    combined by circular mean.  A detuning wrap flag is raised only when
    the branch adjustment is not explained by the crosstalk sign.
    """
    recs = _as_records(records)
    for need in ((3, 0), (1, 0), (2, 0)):
        if need not in recs:
            raise DataError(f"statics need the free-evolution setting {need}")
    xx = recs[(3, 0)].expectations
    xz = {1: recs[(1, 0)].expectations, 2: recs[(2, 0)].expectations}

    thetas, shifted, phases = {}, {}, {}
    amp_dead = {}
    for n in (1, 2):
        try:
            e_x, e_y = xx[f"X{n}"], xx[f"Y{n}"]
            b_x, b_y = xz[n][f"X{n}"], xz[n][f"Y{n}"]
        except KeyError as exc:
            raise DataError(f"free-evolution records lack observable "
                            f"{exc}") from exc
        phi = float(np.arctan2(e_y, e_x))
        theta = (phi + np.pi / 2) % np.pi - np.pi / 2
        thetas[n] = theta
        shifted[n] = abs(_wrap_pi(phi - theta)) > np.pi / 2
        phases[n] = float(np.arctan2(b_y, b_x))
        amp_dead[n] = np.hypot(e_x, e_y) < 1e-12 or np.hypot(b_x, b_y) < 1e-12

    readings = np.array([(phases[n] - thetas[n]) % (2.0 * np.pi)
                         for n in (1, 2)])
    theta12 = float(np.angle(np.sum(np.exp(1j * readings)))) % (2.0 * np.pi)

    expect_shift = np.cos(theta12) < 0.0
    wrap1 = (shifted[1] != expect_shift) or amp_dead[1]
    wrap2 = (shifted[2] != expect_shift) or amp_dead[2]

    a_xx = np.hypot(xx["X2"], xx["Y2"])
    a_xz = np.hypot(xz[2]["X2"], xz[2]["Y2"])
    wrap_j = False
    if a_xz < 1e-12:
        j_amp = float("nan")
        wrap_j = True
    else:
        ratio = a_xx / a_xz
        if ratio > 1.0:
            ratio = 1.0
            wrap_j = True
        j_amp = float(np.arccos(ratio)) / (2.0 * total_time)

    return StaticEstimate(
        delta1=thetas[1] / (2.0 * total_time),
        delta2=thetas[2] / (2.0 * total_time),
        j_zz=theta12 / (2.0 * total_time),
        wrap_delta1=bool(wrap1),
        wrap_delta2=bool(wrap2),
        wrap_j=bool(wrap_j),
        j_from_amplitude=j_amp,
    )


@dataclasses.dataclass(frozen=True)
class InversionOptions:
    nonnegative: bool = False
    drop_flagged: bool = False
    rank_rtol: float = 1e-10


@dataclasses.dataclass(frozen=True)
class SpectrumEstimate:
    """Reconstructed per-bin spectra with optional CIs and statics."""

    grid: FrequencyGrid
    spectra: dict[str, np.ndarray]
    ci_lower: dict[str, np.ndarray] | None = None
    ci_upper: dict[str, np.ndarray] | None = None
    statics: StaticEstimate | None = None
    cond: float = float("nan")
    flagged_rows: tuple[tuple[int, int, str], ...] = ()
    samples: dict[str, np.ndarray] | None = None

    def __post_init__(self):
        for name in BLOCK_NAMES:
            if name not in self.spectra:
                raise DataError(f"estimate is missing block {name}")
        if abs(self.spectra["im_s12"][0]) > 0:
            raise DataError("im_s12 must vanish at bin 0")
        if self.ci_lower is not None:
            for name in BLOCK_NAMES:
                ok = (self.ci_lower[name] <= self.spectra[name] + 1e-12) \
                    & (self.spectra[name] <= self.ci_upper[name] + 1e-12)
                if not np.all(ok):
                    raise DataError(f"CI does not bracket the {name} estimate")

    @property
    def s11(self) -> np.ndarray:
        return self.spectra["s11"]

    @property
    def s22(self) -> np.ndarray:
        return self.spectra["s22"]

    @property
    def s1212(self) -> np.ndarray:
        return self.spectra["s1212"]

    @property
    def re_s12(self) -> np.ndarray:
        return self.spectra["re_s12"]

    @property
    def im_s12(self) -> np.ndarray:
        return self.spectra["im_s12"]

    def to_csv(self, path, provenance: Mapping | None = None) -> None:
        """One row per bin; CI columns only when intervals are present.

        ``provenance`` entries are written as leading ``# key=value``
        comment lines so the file records what produced it.
        """
        order = ("s11", "s22", "re_s12", "im_s12", "s1212")
        header = ["omega_rad_s", *order]
        with_ci = self.ci_lower is not None
        if with_ci:
            for name in order:
                header += [f"{name}_ci_lo", f"{name}_ci_hi"]
        with open(path, "w", newline="") as fh:
            if provenance:
                for key in sorted(provenance):
                    fh.write(f"# {key}={provenance[key]}\n")
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, omega in enumerate(self.grid.centers):
                row = [repr(float(omega))]
                row += [repr(float(self.spectra[name][i])) for name in order]
                if with_ci:
                    for name in order:
                        row += [repr(float(self.ci_lower[name][i])),
                                repr(float(self.ci_upper[name][i]))]
                writer.writerow(row)

    def report(self, reference: Mapping[str, np.ndarray] | None = None,
               band=None) -> dict:
        doc = {
            "n_bins": self.grid.n_bins,
            "condition_number": float(self.cond),
            "statics": None if self.statics is None else
                       self.statics.to_dict(),
            "flagged_rows": [list(t) for t in self.flagged_rows],
        }
        if reference is not None:
            table = {}
            for name in BLOCK_NAMES:
                absolute, pct = mae(self.spectra[name], reference[name], band)
                # a constant reference has zero range; report null rather
                # than emitting Infinity, which strict JSON rejects
                table[name] = {"absolute": absolute,
                               "pct_of_range":
                                   pct if np.isfinite(pct) else None}
            doc["mae"] = table
        return doc


def invert_spectra(chi: DecayRateVector, system: ReconstructionSystem,
                   options: InversionOptions | None = None
                   ) -> SpectrumEstimate:
    """Solve the stacked decay-rate equations for per-bin spectra."""
    opts = options or InversionOptions()
    if chi.row_tags != system.row_tags:
        raise DataError("decay-rate tags do not match the system rows")

    matrix = system.matrix
    values = chi.values
    flagged = ()
    if opts.drop_flagged and chi.clamped.any():
        keep = ~chi.clamped
        flagged = tuple(tag for tag, bad in zip(chi.row_tags, chi.clamped)
                        if bad)
        matrix = matrix[keep]
        values = values[keep]

    n_cols = system.matrix.shape[1]
    svals = np.linalg.svd(matrix, compute_uv=False)
    rank = int(np.sum(svals > svals[0] * opts.rank_rtol)) if len(svals) else 0
    if rank < n_cols:
        _, _, vt = np.linalg.svd(matrix, full_matrices=True)
        null = vt[rank:]
        weight = {name: float(np.abs(null[:, system.blocks[name]]).sum())
                  for name in BLOCK_NAMES}
        worst = max(weight, key=weight.get)
        raise NumericalError(
            f"system is rank deficient (rank {rank} of {n_cols}); null "
            f"space concentrated in block {worst}")

    if opts.nonnegative:
        lower = np.full(n_cols, -np.inf)
        for name in ("s11", "s22", "s1212"):
            lower[system.blocks[name]] = 0.0
        result = lsq_linear(matrix, values, bounds=(lower, np.inf),
                            tol=1e-12, max_iter=500)
        solution = result.x
    else:
        solution, *_ = np.linalg.lstsq(matrix, values, rcond=None)

    return SpectrumEstimate(grid=system.grid,
                            spectra=system.unknowns_to_spectra(solution),
                            cond=system.cond,
                            flagged_rows=flagged)


def records_from_expectations(plan: ExperimentPlan,
                              expectations: Mapping) -> dict:
    """Wrap noiseless model expectations as single-trajectory records."""
    records = {}
    for setting in plan.settings:
        try:
            vals = expectations[setting.key]
        except KeyError as exc:
            raise DataError(f"expectations lack setting {exc}") from exc
        records[setting.key] = MeasurementRecord(
            combo=setting.combo, k=setting.k, prep=setting.prep,
            observables=setting.observables, shots=None,
            expectations={obs: float(vals[obs])
                          for obs in setting.observables},
            per_trajectory={obs: np.array([float(vals[obs])])
                            for obs in setting.observables})
    return records


def pipeline_estimator(system: ReconstructionSystem,
                       options: InversionOptions | None = None,
                       total_time: float | None = None) -> Callable:
    """Extract-and-invert closure, with statics when a duration is given."""
    def run(records) -> SpectrumEstimate:
        estimate = invert_spectra(extract_decay_rates(records), system,
                                  options)
        if total_time is not None:
            estimate = dataclasses.replace(
                estimate, statics=estimate_statics(records, total_time))
        return estimate
    return run


def _resample_record(rec: MeasurementRecord, idx: np.ndarray
                     ) -> MeasurementRecord:
    per_traj = {obs: np.asarray(vals)[idx]
                for obs, vals in rec.per_trajectory.items()}
    return MeasurementRecord(
        combo=rec.combo, k=rec.k, prep=rec.prep,
        observables=rec.observables, shots=rec.shots,
        expectations={obs: float(np.mean(vals))
                      for obs, vals in per_traj.items()},
        per_trajectory=per_traj,
        tallies=None if rec.tallies is None else
                {b: np.asarray(t)[idx] for b, t in rec.tallies.items()})


def bootstrap_ci(records, n_resamples: int, estimator: Callable, *,
                 seed: int = 0, confidence: float = 0.95,
                 threads: int = 1) -> SpectrumEstimate:
    """Percentile intervals from trajectory resampling.

    One index draw per resample is shared by every setting because all
    settings observed the same trajectory set; resampling them jointly
    preserves the cross-setting correlations.  Resamples are seeded by
    index, so the result does not depend on the thread count.
    """
    recs = _as_records(records)
    counts = {rec.n_trajectories for rec in recs.values()}
    if len(counts) != 1:
        raise DataError("records disagree on the trajectory count")
    n_traj = counts.pop()
    if n_traj < 2:
        raise DataError("bootstrap needs at least 2 trajectories")

    point = estimator(recs)
    if n_resamples == 0:
        return point

    def one(index: int) -> SpectrumEstimate:
        rng = np.random.default_rng([seed, 1000 + index])
        idx = rng.integers(0, n_traj, n_traj)
        return estimator({key: _resample_record(rec, idx)
                          for key, rec in recs.items()})

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            estimates = list(pool.map(one, range(n_resamples)))
    else:
        estimates = [one(i) for i in range(n_resamples)]

    stacks = {name: np.stack([est.spectra[name] for est in estimates])
              for name in BLOCK_NAMES}
    tail = 100.0 * (1.0 - confidence) / 2.0
    lower, upper = {}, {}
    for name in BLOCK_NAMES:
        lo = np.percentile(stacks[name], tail, axis=0)
        hi = np.percentile(stacks[name], 100.0 - tail, axis=0)
        # intervals must bracket the full-sample point estimate
        lower[name] = np.minimum(lo, point.spectra[name])
        upper[name] = np.maximum(hi, point.spectra[name])
    return dataclasses.replace(point, ci_lower=lower, ci_upper=upper,
                               samples=stacks)


def mae(estimate, reference, band=None) -> tuple[float, float]:
    """Mean absolute error, absolute and as percent of reference range."""
    est = np.asarray(estimate, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if est.shape != ref.shape:
        raise DataError("estimate and reference are on different grids")
    if band is not None:
        est, ref = est[band], ref[band]
    if est.size == 0:
        raise DataError("empty comparison band")
    absolute = float(np.mean(np.abs(est - ref)))
    span = float(np.ptp(ref))
    if span > 0.0:
        return absolute, 100.0 * absolute / span
    return absolute, 0.0 if absolute == 0.0 else float("inf")


def background_subtract(combined: SpectrumEstimate,
                        native: SpectrumEstimate) -> SpectrumEstimate:
    """Difference of two estimates with CI widths summed in quadrature."""
    ga, gb = combined.grid, native.grid
    if ga.n_bins != gb.n_bins or not np.allclose(ga.centers, gb.centers):
        raise DataError("estimates are on different grids")
    spectra = {name: combined.spectra[name] - native.spectra[name]
               for name in BLOCK_NAMES}
    lower = upper = None
    if combined.ci_lower is not None and native.ci_lower is not None:
        lower, upper = {}, {}
        for name in BLOCK_NAMES:
            down_a = combined.spectra[name] - combined.ci_lower[name]
            up_a = combined.ci_upper[name] - combined.spectra[name]
            down_b = native.spectra[name] - native.ci_lower[name]
            up_b = native.ci_upper[name] - native.spectra[name]
            lower[name] = spectra[name] - np.hypot(down_a, up_b)
            upper[name] = spectra[name] + np.hypot(up_a, down_b)
    return SpectrumEstimate(grid=ga, spectra=spectra, ci_lower=lower,
                            ci_upper=upper,
                            cond=max(combined.cond, native.cond),
                            flagged_rows=tuple(set(combined.flagged_rows)
                                               | set(native.flagged_rows)))
