"""Synthesis of stationary Gaussian noise with prescribed spectra.

Dephasing and ZZ-crosstalk fluctuations are modeled as stationary Gaussian
processes built by filtering white Gaussian noise through low-order
ARMA filters.  Three generator families are supported:

* Ornstein-Uhlenbeck (``OuSpec``), discretized exactly to an AR(1)
  recurrence, with Lorentzian power spectral density
  ``S(omega) = 2*theta*sigma**2 / (theta**2 + omega**2)``.
* Generic ARMA filters (``ArmaSpec``) driven by unit-variance white noise.
* Ideal bandpass blocks (``BandpassSpec``), synthesized as windowed-sinc
  FIR filters.

A channel (qubit 1, qubit 2, or the ZZ crosstalk term) is described by a
``NoiseProcessSpec``: a weighted sum of generator components, each with an
optional delay.  Components that carry the same ``name`` across channels
share a single white-noise stream per realization, which is how
cross-correlation between the two qubits is engineered; the delay then
shows up as a phase ramp ``exp(i*omega*tau)`` in the cross-spectrum.

Trajectories are emitted as per-step accumulated phase angles
``phi_k = beta_k * dt`` so that downstream consumers never multiply by the
step size themselves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import signal
from scipy.special import ndtri
from scipy.stats import qmc

__all__ = [
    "OuSpec",
    "ArmaSpec",
    "BandpassSpec",
    "NoiseComponent",
    "NoiseProcessSpec",
    "TrajectorySet",
    "TargetSpectra",
    "lorentzian_psd",
    "bandpass_psd",
    "arma_psd",
    "ou_to_ar1",
    "bandpass_fir",
    "generate_trajectories",
    "generate_stratified_trajectories",
    "target_spectra",
    "realized_spectra",
    "averaged_periodogram",
    "averaged_cross_periodogram",
]

CHANNELS = ("qubit1", "qubit2", "crosstalk")

#: Poles are iterated until transients have decayed below this factor,
#: which sets the warm-up length of each generated stream.
_WARMUP_DECAY = 1e-9


@dataclass(frozen=True)
class OuSpec:
    """Ornstein-Uhlenbeck process parameters.

    Parameters
    ----------
    sigma : float
        Stationary standard deviation (rad/s).
    theta : float
        Inverse correlation time (1/s).
    mu : float, optional
        Process mean (rad/s).  Defaults to zero.
    """

    sigma: float
    theta: float
    mu: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.theta <= 0:
            raise ValueError(f"theta must be > 0, got {self.theta}")


@dataclass(frozen=True)
class ArmaSpec:
    """ARMA filter driven by unit-variance white Gaussian noise.

    The recurrence is

        y_k = sum_i ar_coeffs[i] * y_{k-1-i} + sum_j ma_coeffs[j] * w_{k-j}

    with ``w_k ~ N(0, 1)`` independent per step of length ``dt``.

    Parameters
    ----------
    ar_coeffs : tuple of float
        Autoregressive coefficients (lags 1, 2, ...).  May be empty.
    ma_coeffs : tuple of float
        Moving-average coefficients (lags 0, 1, ...).  Must be non-empty.
    dt : float
        Sample interval in seconds.
    """

    ar_coeffs: tuple[float, ...]
    ma_coeffs: tuple[float, ...]
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "ar_coeffs", tuple(float(c) for c in self.ar_coeffs))
        object.__setattr__(self, "ma_coeffs", tuple(float(c) for c in self.ma_coeffs))
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.ma_coeffs:
            raise ValueError("ma_coeffs must contain at least one coefficient")
        p = self.poles()
        if p.size and np.max(np.abs(p)) >= 1.0:
            raise ValueError(
                f"unstable AR polynomial: pole magnitude {np.max(np.abs(p)):.6g} >= 1"
            )

    def poles(self) -> np.ndarray:
        """Roots of the AR characteristic polynomial (all must lie in |z| < 1)."""
        if not self.ar_coeffs:
            return np.array([])
        return np.roots([1.0, *(-c for c in self.ar_coeffs)])

    def lfilter_ba(self) -> tuple[np.ndarray, np.ndarray]:
        """(b, a) arrays in the transposed-direct-form convention of scipy."""
        b = np.asarray(self.ma_coeffs, dtype=float)
        a = np.concatenate(([1.0], -np.asarray(self.ar_coeffs, dtype=float)))
        return b, a


@dataclass(frozen=True)
class BandpassSpec:
    """Ideal two-sided bandpass spectrum of constant height.

    The PSD is ``amplitude`` for ``omega_low < |omega| < omega_high`` and
    zero elsewhere.

    Parameters
    ----------
    amplitude : float
        PSD level inside the band (rad/s, two-sided convention).
    omega_low, omega_high : float
        Angular-frequency cutoffs (rad/s), ``0 <= omega_low < omega_high``.
    """

    amplitude: float
    omega_low: float
    omega_high: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")
        if not 0 <= self.omega_low < self.omega_high:
            raise ValueError(
                f"need 0 <= omega_low < omega_high, got "
                f"[{self.omega_low}, {self.omega_high}]"
            )


Generator = Union[OuSpec, ArmaSpec, BandpassSpec]


@dataclass(frozen=True)
class NoiseComponent:
    """One weighted, optionally delayed generator inside a channel.

    Components with equal ``name`` in different channels share one
    white-noise stream per realization (the generators must then be
    identical).  Anonymous components (``name=None``) are never shared.
    """

    generator: Generator
    scale: float = 1.0
    delay: float = 0.0
    name: str | None = None

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError(f"delay must be >= 0, got {self.delay}")


@dataclass(frozen=True)
class NoiseProcessSpec:
    """Noise acting on one channel: a sum of components.

    ``label`` is one of ``"qubit1"``, ``"qubit2"``, ``"crosstalk"``.
    """

    label: str
    components: tuple[NoiseComponent, ...]

    def __post_init__(self):
        if self.label not in CHANNELS:
            raise ValueError(f"label must be one of {CHANNELS}, got {self.label!r}")
        object.__setattr__(self, "components", tuple(self.components))


@dataclass
class TrajectorySet:
    """Generated per-step phase angles for all channels.

    ``angles[label]`` has shape ``(n_realizations, n_steps)`` and holds
    ``phi_k = beta_k * dt`` in radians.  Channels without a spec are
    all-zero.  Regenerating with the same specs and ``master_seed``
    reproduces the set bit for bit.
    """

    angles: dict[str, np.ndarray]
    dt: float
    master_seed: int

    @property
    def n_realizations(self) -> int:
        return next(iter(self.angles.values())).shape[0]

    @property
    def n_steps(self) -> int:
        return next(iter(self.angles.values())).shape[1]

    def dump_csv(self, path) -> None:
        """Debug dump with columns step, realization, phi1, phi2, phi12."""
        r, n = self.n_realizations, self.n_steps
        steps = np.tile(np.arange(n), r)
        reals = np.repeat(np.arange(r), n)
        cols = [steps, reals] + [self.angles[c].ravel() for c in CHANNELS]
        header = "step,realization,phi1,phi2,phi12"
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
                   comments="", fmt=["%d", "%d", "%.17g", "%.17g", "%.17g"])


@dataclass
class TargetSpectra:
    """Analytic spectra on a frequency grid: the engineered ground truth."""

    omega: np.ndarray
    s11: np.ndarray
    s22: np.ndarray
    s12: np.ndarray  # complex
    s1212: np.ndarray


# ---------------------------------------------------------------------------
# Analytic PSDs


def lorentzian_psd(spec: OuSpec, omega) -> np.ndarray:
    """Two-sided PSD of an OU process: ``2*theta*sigma**2 / (theta**2 + omega**2)``."""
    omega = np.asarray(omega, dtype=float)
    return 2.0 * spec.theta * spec.sigma**2 / (spec.theta**2 + omega**2)


def bandpass_psd(spec: BandpassSpec, omega) -> np.ndarray:
    """Ideal bandpass PSD; symmetric in omega."""
    w = np.abs(np.asarray(omega, dtype=float))
    return np.where((w > spec.omega_low) & (w < spec.omega_high),
                    spec.amplitude, 0.0)


def arma_psd(spec: ArmaSpec, omega) -> np.ndarray:
    """Two-sided PSD of the ARMA output in continuous-frequency units.

    For unit-variance white driving the discrete-time transfer function
    ``H(z) = B(z)/A(z)`` gives ``S(omega) = dt * |H(exp(i*omega*dt))|**2``,
    so that ``(1/2pi) * integral of S over one Nyquist band`` equals the
    stationary variance.
    """
    b, a = spec.lfilter_ba()
    w = np.asarray(omega, dtype=float) * spec.dt
    _, h = signal.freqz(b, a, worN=w)
    return spec.dt * np.abs(h) ** 2


def generator_psd(gen: Generator, omega) -> np.ndarray:
    """Dispatch to the analytic PSD of any generator type."""
    if isinstance(gen, OuSpec):
        return lorentzian_psd(gen, omega)
    if isinstance(gen, BandpassSpec):
        return bandpass_psd(gen, omega)
    if isinstance(gen, ArmaSpec):
        return arma_psd(gen, omega)
    raise TypeError(f"unknown generator type {type(gen).__name__}")


# ---------------------------------------------------------------------------
# Discretization


def ou_to_ar1(spec: OuSpec, dt: float) -> ArmaSpec:
    """Exact AR(1) discretization of an OU process.

    The pole is ``z1 = exp(-theta*dt)`` and the innovation gain is
    ``sigma * sqrt(1 - z1**2)``, fixed so the stationary variance of the
    recurrence equals ``sigma**2`` (verified against the averaged
    periodogram of generated samples).
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    z1 = float(np.exp(-spec.theta * dt))
    if z1 == 0.0:
        raise ValueError(
            f"theta*dt = {spec.theta * dt:.3g} is too large: the AR(1) pole "
            "underflows to zero, the noise is grossly under-resolved"
        )
    gain = spec.sigma * float(np.sqrt(1.0 - z1**2))
    return ArmaSpec(ar_coeffs=(z1,), ma_coeffs=(gain,), dt=dt)


def bandpass_fir(spec: BandpassSpec, dt: float,
                 transition_frac: float = 0.05) -> ArmaSpec:
    """Windowed-sinc FIR whose output PSD approximates the bandpass step.

    The tap count is chosen so the Hamming-window transition width is
    ``transition_frac`` of the band width, which keeps the realized PSD
    within a few percent of the ideal step away from the immediate edges.
    The passband gain is ``sqrt(amplitude/dt)`` so the output PSD level is
    ``amplitude`` in continuous units.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    nyquist = np.pi / dt
    if spec.omega_high >= nyquist:
        raise ValueError(
            f"omega_high = {spec.omega_high:.3g} rad/s exceeds the Nyquist "
            f"limit {nyquist:.3g} rad/s for dt = {dt:.3g} s"
        )
    width = transition_frac * (spec.omega_high - spec.omega_low)
    # Hamming-window transition width is about 6.6*pi/numtaps (normalized).
    numtaps = int(np.ceil(6.6 * np.pi / (width * dt)))
    numtaps += 1 - numtaps % 2  # firwin bandpass needs odd tap count
    taps = signal.firwin(
        numtaps,
        [spec.omega_low / nyquist, spec.omega_high / nyquist],
        pass_zero=False, window="hamming",
    )
    taps = taps * np.sqrt(spec.amplitude / dt)
    return ArmaSpec(ar_coeffs=(), ma_coeffs=tuple(taps), dt=dt)


def discretize(gen: Generator, dt: float) -> ArmaSpec:
    """Turn any generator into a concrete ARMA filter at step dt."""
    if isinstance(gen, OuSpec):
        return ou_to_ar1(gen, dt)
    if isinstance(gen, BandpassSpec):
        return bandpass_fir(gen, dt)
    if isinstance(gen, ArmaSpec):
        if not np.isclose(gen.dt, dt, rtol=1e-9, atol=0.0):
            raise ValueError(
                f"ArmaSpec dt = {gen.dt:.6g} does not match requested dt = {dt:.6g}"
            )
        return gen
    raise TypeError(f"unknown generator type {type(gen).__name__}")


def _warmup_steps(arma: ArmaSpec) -> int:
    """Steps until filter transients decay below _WARMUP_DECAY."""
    p = arma.poles()
    n_ma = len(arma.ma_coeffs)
    if p.size == 0:
        return n_ma
    pmax = float(np.max(np.abs(p)))
    if pmax == 0.0:
        return n_ma
    n_ar = int(np.ceil(np.log(_WARMUP_DECAY) / np.log(pmax)))
    return min(n_ar, 10**6) + n_ma


# ---------------------------------------------------------------------------
# Trajectory generation


def _delay_steps(delay: float, dt: float) -> int:
    d = delay / dt
    d_int = int(round(d))
    if abs(d - d_int) > 1e-6:
        raise ValueError(
            f"delay {delay:.6g} s is not an integer multiple of dt = {dt:.6g} s"
        )
    return d_int


def _collect_streams(specs):
    """Unique white-noise streams in deterministic first-appearance order.

    Returns (ordered list of (key, generator), mapping key -> stream index).
    Named components shared across channels must carry identical generators.
    """
    order: list[tuple[str, Generator]] = []
    index: dict[str, int] = {}
    for spec in specs:
        for i, comp in enumerate(spec.components):
            key = comp.name if comp.name is not None else f"_{spec.label}_{i}"
            if key in index:
                prev = order[index[key]][1]
                if prev != comp.generator:
                    raise ValueError(
                        f"shared component {key!r} has conflicting generators"
                    )
            else:
                index[key] = len(order)
                order.append((key, comp.generator))
    return order, index


def _check_channel_specs(specs, master_seed):
    specs = list(specs)
    seen = [s.label for s in specs]
    if len(set(seen)) != len(seen):
        raise ValueError(f"duplicate channel labels in specs: {seen}")
    if master_seed < 0:
        raise ValueError("master_seed must be a non-negative integer")
    return specs


def _stream_plan(specs, dt):
    """Discretized filter and warm-up pad for each unique stream."""
    order, index = _collect_streams(specs)
    max_delay = 0
    for spec in specs:
        for comp in spec.components:
            max_delay = max(max_delay, _delay_steps(comp.delay, dt))
    armas = []
    pads = []
    for _key, gen in order:
        arma = discretize(gen, dt)
        armas.append(arma)
        pads.append(_warmup_steps(arma) + max_delay)
    return order, index, armas, pads


def _filter_stream(arma: ArmaSpec, white: np.ndarray) -> np.ndarray:
    """Zero-state filtering of stacked realizations, rows independent.

    Pure-MA filters go through overlap-add FFT convolution, which for
    the long windowed-sinc kernels is orders of magnitude faster than
    the direct form and equal up to roundoff.
    """
    b, a = arma.lfilter_ba()
    if len(a) == 1:
        out = signal.oaconvolve(white, b[None, :] / a[0], axes=1)
        return out[:, :white.shape[1]]
    return signal.lfilter(b, a, white, axis=1)


def _assemble_channels(specs, index, streams, pads, n_steps, n_realizations,
                       dt) -> dict[str, np.ndarray]:
    """Combine filtered streams into per-channel angle trajectories."""
    angles = {label: np.zeros((n_realizations, n_steps)) for label in CHANNELS}
    for spec in specs:
        out = np.zeros((n_realizations, n_steps))
        for i, comp in enumerate(spec.components):
            key = comp.name if comp.name is not None else f"_{spec.label}_{i}"
            s_idx = index[key]
            d = _delay_steps(comp.delay, dt)
            pad = pads[s_idx]
            out += comp.scale * streams[s_idx][:, pad - d:pad - d + n_steps]
        angles[spec.label] = out * dt
    return angles


def generate_trajectories(specs, n_steps: int, n_realizations: int,
                          master_seed: int, dt: float) -> TrajectorySet:
    """Draw per-step phase-angle trajectories for all channels.

    Parameters
    ----------
    specs : iterable of NoiseProcessSpec
        Channel descriptions; channels not present come out all-zero.
    n_steps : int
        Number of emitted steps per realization.
    n_realizations : int
        Number of independent realizations.
    master_seed : int
        Root seed.  Realization ``r`` of stream ``s`` uses the seed
        sequence ``(master_seed, s, r)``, so generation is reproducible
        and parallelizable per realization.
    dt : float
        Step duration in seconds.

    Returns
    -------
    TrajectorySet
        Angles ``phi = beta * dt`` of shape (n_realizations, n_steps) per
        channel.  Each stream is warmed up past its filter transient (and
        past the largest delay) before emission, so outputs are stationary.
    """
    specs = _check_channel_specs(specs, master_seed)
    order, index, armas, pads = _stream_plan(specs, dt)

    # Generate each unique stream once: white noise per (stream, realization),
    # then one vectorized lfilter pass over all realizations.
    streams: dict[int, np.ndarray] = {}
    for s_idx, (_key, gen) in enumerate(order):
        total = pads[s_idx] + n_steps
        white = np.empty((n_realizations, total))
        for r in range(n_realizations):
            rng = np.random.default_rng(
                np.random.SeedSequence([master_seed, s_idx, r]))
            white[r] = rng.standard_normal(total)
        beta = _filter_stream(armas[s_idx], white)
        if isinstance(gen, OuSpec) and gen.mu != 0.0:
            beta = beta + gen.mu
        streams[s_idx] = beta

    angles = _assemble_channels(specs, index, streams, pads, n_steps,
                                n_realizations, dt)
    return TrajectorySet(angles=angles, dt=dt, master_seed=master_seed)


def generate_stratified_trajectories(specs, n_steps: int, n_realizations: int,
                                     master_seed: int, dt: float,
                                     weights) -> TrajectorySet:
    """Draw trajectories whose weighted sums are sampled extra evenly.

    Each realization has exactly the same distribution as one drawn by
    :func:`generate_trajectories`; only the coupling across realizations
    differs.  ``weights`` maps channel labels to per-step weight vectors
    w, and each weighted sum ``sum_k w_k * phi_k`` is linear in the
    underlying white noise, so the handful of white-noise directions
    feeding the sums (at most one per weighted channel) are drawn from
    one jointly scrambled Sobol net instead of independently.  Every
    direction orthogonal to the sums stays independent Gaussian.

    Ensemble averages of any smooth statistic that depends on the noise
    only through the weighted sums then converge at a quasi-Monte-Carlo
    rate instead of 1/sqrt(R); statistics with wider dependence remain
    unbiased but gain less.  Use this when a run is budgeted by
    realization count and the consumer is a switching-weighted phase
    experiment.

    Unlike the iid generator, single realizations are not reproducible
    in isolation (the net ties them together); the set as a whole is
    deterministic in ``master_seed``.
    """
    specs = _check_channel_specs(specs, master_seed)
    weights = {label: np.asarray(w, dtype=float)
               for label, w in weights.items()}
    for label, w in weights.items():
        if label not in CHANNELS:
            raise ValueError(f"unknown channel label {label!r}")
        if w.shape != (n_steps,):
            raise ValueError(
                f"weights for {label} have shape {w.shape}, "
                f"expected ({n_steps},)")
    order, index, armas, pads = _stream_plan(specs, dt)
    totals = [pads[s_idx] + n_steps for s_idx in range(len(order))]
    offsets = np.concatenate([[0], np.cumsum(totals)])

    # Output-side weight vector of each tracked sum, per (stream,
    # channel) pair: the channel's sum reads this stream's output on the
    # slice [pad-d, pad-d+n_steps) with the component's scale.
    raw: dict[tuple[int, str], np.ndarray] = {}
    for spec in specs:
        w = weights.get(spec.label)
        if w is None:
            continue
        for i, comp in enumerate(spec.components):
            key = comp.name if comp.name is not None else f"_{spec.label}_{i}"
            s_idx = index[key]
            d = _delay_steps(comp.delay, dt)
            pad = pads[s_idx]
            g = raw.setdefault((s_idx, spec.label),
                               np.zeros(pad + n_steps))
            g[pad - d:pad - d + n_steps] += comp.scale * w

    # Pull the weight vectors back through each filter (reverse, filter,
    # reverse is the adjoint of the zero-state lfilter) into one column
    # per channel over the concatenated stream inputs, and orthonormalize.
    columns: dict[str, np.ndarray] = {}
    for (s_idx, label), g in raw.items():
        b, a = armas[s_idx].lfilter_ba()
        c = signal.lfilter(b, a, g[::-1])[::-1]
        col = columns.setdefault(label, np.zeros(offsets[-1]))
        col[offsets[s_idx]:offsets[s_idx + 1]] = c
    u_basis = None
    if columns:
        mat = np.stack([columns[label] for label in CHANNELS
                        if label in columns], axis=1)
        norms = np.linalg.norm(mat, axis=0)
        mat = mat[:, norms > 1e-12 * max(float(norms.max()), 1.0)]
        if mat.shape[1]:
            q, r = np.linalg.qr(mat)
            keep = np.abs(np.diag(r)) > 1e-10 * np.abs(r).max()
            if np.any(keep):
                u_basis = q[:, keep]

    # The net over the tracked directions, pushed through the normal
    # quantile; realization r gets row r.
    n_dims = 0 if u_basis is None else u_basis.shape[1]
    if n_dims and n_realizations:
        sampler = qmc.Sobol(d=n_dims, scramble=True,
                            seed=np.random.default_rng(
                                np.random.SeedSequence([master_seed, 2**16])))
        with warnings.catch_warnings():
            # balance is only exact at power-of-two counts; the remaining
            # advantage over iid is still large and is what we are after
            warnings.simplefilter("ignore", UserWarning)
            u = sampler.random(n_realizations)
        z = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))

    whites: dict[int, np.ndarray] = {}
    for s_idx in range(len(order)):
        rng = np.random.default_rng(
            np.random.SeedSequence([master_seed, 2**16 + 1 + s_idx]))
        whites[s_idx] = rng.standard_normal((n_realizations, totals[s_idx]))
    if n_dims and n_realizations:
        # white <- U z + (I - U U^T) white over the concatenation: the
        # net replaces the tracked coordinates, the rest stays
        # independent, and each row keeps the exact N(0, I) law.
        coords = sum(whites[s_idx] @ u_basis[offsets[s_idx]:offsets[s_idx + 1]]
                     for s_idx in range(len(order)))
        shift = z - coords
        for s_idx in range(len(order)):
            block = u_basis[offsets[s_idx]:offsets[s_idx + 1]]
            whites[s_idx] += shift @ block.T

    streams: dict[int, np.ndarray] = {}
    for s_idx, (_key, gen) in enumerate(order):
        beta = _filter_stream(armas[s_idx], whites[s_idx])
        if isinstance(gen, OuSpec) and gen.mu != 0.0:
            beta = beta + gen.mu
        streams[s_idx] = beta

    angles = _assemble_channels(specs, index, streams, pads, n_steps,
                                n_realizations, dt)
    return TrajectorySet(angles=angles, dt=dt, master_seed=master_seed)


# ---------------------------------------------------------------------------
# Analytic targets and empirical verification


def target_spectra(specs, omega_grid) -> TargetSpectra:
    """Analytic spectra implied by the channel specs, on a frequency grid.

    Self-spectra add component PSDs weighted by ``scale**2``.  The cross
    spectrum collects every shared component once per (qubit-1, qubit-2)
    reference pair:

        S12(omega) = scale1*scale2 * S(omega) * exp(+i*omega*(delay2 - delay1))

    A component delayed on qubit 2 therefore produces a positive phase
    slope ``omega*tau``, matching the averaged cross-periodogram of
    generated trajectories.  ``Im S12(0)`` is identically zero.
    """
    return _compose_spectra(specs, np.asarray(omega_grid, dtype=float),
                            generator_psd)


def realized_spectra(specs, omega_grid, dt: float) -> TargetSpectra:
    """Spectra of the discrete synthesis at step dt, not the targets.

    Each generator is replaced by its ARMA discretization and the
    response is divided by ``sinc(omega*dt/2)**2``, the transfer factor
    of holding each step's angle constant over its interval.  Against
    these spectra the continuous filter-function overlaps reproduce the
    simulated decay exponents exactly in law.  Only valid up to the
    Nyquist frequency ``pi/dt``; the ARMA response is periodic beyond it.
    """
    omega = np.asarray(omega_grid, dtype=float)
    if np.any(np.abs(omega) > np.pi / dt * (1 + 1e-12)):
        raise ValueError("realized spectra are undefined beyond pi/dt")
    cache = {}

    def psd(gen, w):
        key = id(gen)
        if key not in cache:
            cache[key] = discretize(gen, dt)
        correction = np.sinc(w * dt / (2 * np.pi)) ** 2
        return arma_psd(cache[key], w) / correction

    return _compose_spectra(specs, omega, psd)


def _compose_spectra(specs, omega, psd_fn) -> TargetSpectra:
    by_label = {spec.label: spec for spec in specs}

    def self_psd(label):
        total = np.zeros_like(omega)
        spec = by_label.get(label)
        if spec is None:
            return total
        for comp in spec.components:
            total += comp.scale**2 * psd_fn(comp.generator, omega)
        return total

    s12 = np.zeros(omega.shape, dtype=complex)
    q1, q2 = by_label.get("qubit1"), by_label.get("qubit2")
    if q1 is not None and q2 is not None:
        for c1 in q1.components:
            if c1.name is None:
                continue
            for c2 in q2.components:
                if c2.name != c1.name:
                    continue
                phase = np.exp(1j * omega * (c2.delay - c1.delay))
                s12 += (c1.scale * c2.scale
                        * psd_fn(c1.generator, omega) * phase)

    return TargetSpectra(
        omega=omega,
        s11=self_psd("qubit1"),
        s22=self_psd("qubit2"),
        s12=s12,
        s1212=self_psd("crosstalk"),
    )


def averaged_periodogram(angles: np.ndarray, dt: float):
    """Averaged periodogram of angle trajectories, in PSD units.

    Parameters
    ----------
    angles : (R, N) array
        Per-step phase angles (``beta * dt``).
    dt : float
        Step duration.

    Returns
    -------
    omega : (N,) array of angular frequencies (fftfreq layout).
    psd : (N,) array, ``dt/N * mean_r |FFT(beta_r)|**2``.
    """
    beta = np.asarray(angles) / dt
    n = beta.shape[1]
    f = np.fft.fft(beta, axis=1)
    psd = (dt / n) * np.mean(np.abs(f) ** 2, axis=0)
    omega = 2.0 * np.pi * np.fft.fftfreq(n, dt)
    return omega, psd


def averaged_cross_periodogram(angles_a: np.ndarray, angles_b: np.ndarray,
                               dt: float):
    """Averaged cross-periodogram ``dt/N * mean_r F_a * conj(F_b)``.

    With channel b lagging channel a by ``tau`` the phase slope is
    ``+omega*tau``, consistent with :func:`target_spectra`.
    """
    beta_a = np.asarray(angles_a) / dt
    beta_b = np.asarray(angles_b) / dt
    n = beta_a.shape[1]
    fa = np.fft.fft(beta_a, axis=1)
    fb = np.fft.fft(beta_b, axis=1)
    cross = (dt / n) * np.mean(fa * np.conj(fb), axis=0)
    omega = 2.0 * np.pi * np.fft.fftfreq(n, dt)
    return omega, cross
