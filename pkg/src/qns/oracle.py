"""Analytic observable predictions from Gaussian phase cumulants.

For purely dephasing noise the accumulated phases on Z1, Z2 and Z1Z2 are
jointly Gaussian, so every measured expectation reduces to deterministic
angles (from the static detunings and coupling) times decay factors built
from four exponents:

    chi_11   = (2/pi) integral G_11  S_11  d omega
    chi_22   = (2/pi) integral G_22  S_22  d omega
    chi_1212 = (2/pi) integral G_1212 S_1212 d omega
    chi_12   = (4/pi) integral Re[G_12 S_12] d omega

All integrals run over omega >= 0.  Correlations between the two-qubit
channel and either single-qubit channel are taken to be absent; the
reconstruction targets the same four spectra and cannot separate such
terms.  The Z-basis preparation is the +1 eigenstate, which fixes the
sign with which the coupling angle adds to a single-qubit phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_legendre

from .filters import FilterFunction, FrequencyGrid
from .noise import NoiseProcessSpec, realized_spectra, target_spectra
from .sequences import ExperimentPlan, PlanSetting, switching_function

__all__ = [
    "StaticParams",
    "StaticAngles",
    "DecayExponents",
    "SpectralModel",
    "static_angles",
    "decay_exponents",
    "expected_observables",
    "oracle_expectations",
]


@dataclass(frozen=True)
class StaticParams:
    """Static detunings and ZZ coupling, all in rad/s.

    A free evolution of total time T accumulates angles ``2*delta1*T``,
    ``2*delta2*T`` and ``2*j_zz*T``.
    """

    delta1: float = 0.0
    delta2: float = 0.0
    j_zz: float = 0.0


@dataclass(frozen=True)
class StaticAngles:
    """Deterministic phase angles of one setting."""

    theta1: float
    theta2: float
    theta12: float


@dataclass(frozen=True)
class DecayExponents:
    """The four quadratic phase cumulants of one setting."""

    chi_11: float
    chi_22: float
    chi_1212: float
    chi_12: float

    @property
    def chi1_zz(self) -> float:
        """Decay of qubit-1 coherence with qubit 2 along Z."""
        return self.chi_11 + self.chi_1212

    @property
    def chi2_zz(self) -> float:
        return self.chi_22 + self.chi_1212

    @property
    def chi_sum(self) -> float:
        """Joint two-qubit decay, insensitive to the ZZ channel."""
        return self.chi_11 + self.chi_22


@dataclass(frozen=True)
class SpectralModel:
    """Continuous one-sided spectra fed to the overlap integrals.

    ``s12`` returns complex values; the self spectra are real.
    ``breakpoints`` lists frequencies where any spectrum is non-smooth so
    quadrature panels can align with them; ``support_max`` bounds the
    support when the spectra vanish identically beyond it.
    """

    s11: Callable[[np.ndarray], np.ndarray]
    s22: Callable[[np.ndarray], np.ndarray]
    s1212: Callable[[np.ndarray], np.ndarray]
    s12: Callable[[np.ndarray], np.ndarray]
    breakpoints: tuple[float, ...] = ()
    support_max: float | None = None

    @classmethod
    def from_noise_specs(cls, specs: Sequence[NoiseProcessSpec],
                         dt: float | None = None) -> "SpectralModel":
        """Wrap the analytic spectra implied by channel noise specs.

        With ``dt`` given the model carries the spectra the discrete
        synthesis at that step actually realizes (ARMA response with the
        step-hold correction, supported up to Nyquist).  Use that mode
        when predicting simulated runs; the default continuous targets
        are what a reconstruction is judged against.
        """
        specs = tuple(specs)
        breakpoints = []
        for spec in specs:
            for comp in spec.components:
                gen = comp.generator
                if hasattr(gen, "omega_low"):
                    breakpoints += [gen.omega_low, gen.omega_high]
        if dt is None:
            evaluate = lambda w: target_spectra(specs, w)
            support = None
        else:
            evaluate = lambda w: realized_spectra(specs, w, dt)
            support = np.pi / dt
        return cls(
            s11=lambda w: evaluate(w).s11,
            s22=lambda w: evaluate(w).s22,
            s1212=lambda w: evaluate(w).s1212,
            s12=lambda w: evaluate(w).s12,
            breakpoints=tuple(sorted(set(breakpoints))),
            support_max=support,
        )

    @classmethod
    def from_bins(cls, grid: FrequencyGrid,
                  spectra: dict[str, np.ndarray]) -> "SpectralModel":
        """Piecewise-constant spectra on reconstruction bins, zero beyond."""
        edges = np.concatenate([[grid.edges[0, 0]], grid.edges[:, 1]])

        def binned(vals):
            vals = np.asarray(vals)

            def f(w):
                w = np.asarray(w, dtype=float)
                idx = np.searchsorted(edges, w, side="right") - 1
                inside = (idx >= 0) & (idx < len(vals))
                return np.where(inside, vals[np.clip(idx, 0, len(vals) - 1)],
                                0.0)

            return f

        re12, im12 = binned(spectra["re_s12"]), binned(spectra["im_s12"])
        return cls(
            s11=binned(spectra["s11"]),
            s22=binned(spectra["s22"]),
            s1212=binned(spectra["s1212"]),
            s12=lambda w: re12(w) + 1j * im12(w),
            breakpoints=tuple(edges),
            support_max=float(edges[-1]),
        )


def static_angles(params: StaticParams, setting: PlanSetting) -> StaticAngles:
    """Deterministic angles ``2*delta*integral(y)`` for one setting."""
    y1 = switching_function(setting.seq1)
    y2 = switching_function(setting.seq2)
    return StaticAngles(
        theta1=2 * params.delta1 * y1.integral(),
        theta2=2 * params.delta2 * y2.integral(),
        theta12=2 * params.j_zz * y1.product(y2).integral(),
    )


def _overlap(ff: FilterFunction, spectrum, real_part: bool,
             omega_max: float, breakpoints, nodes: int) -> float:
    """Gauss-Legendre overlap integral with panels on the breakpoints."""
    cuts = sorted({0.0, omega_max,
                   *(b for b in breakpoints if 0.0 < b < omega_max)})
    max_width = np.pi / ff.total_time
    panel_edges = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(np.ceil((b - a) / max_width)))
        sub = np.linspace(a, b, n + 1)
        panel_edges.append(np.column_stack((sub[:-1], sub[1:])))
    panels = np.vstack(panel_edges)
    x, wts = roots_legendre(nodes)
    a, b = panels[:, 0], panels[:, 1]
    pts = 0.5 * (b - a)[:, None] * x[None, :] + 0.5 * (a + b)[:, None]
    flat = pts.ravel()
    vals = ff(flat) * spectrum(flat)
    vals = (vals.real if real_part else vals.imag).reshape(pts.shape)
    return float(np.sum(vals * wts[None, :] * (0.5 * (b - a))[:, None]))


def decay_exponents(model: SpectralModel, setting: PlanSetting,
                    omega_max: float | None = None,
                    nodes: int = 24) -> DecayExponents:
    """The four cumulants of one setting by panelized quadrature.

    The default cutoff ``800*pi/T_base`` relies on the joint
    ``1/omega**4`` falloff of filter times spectrum; raise it for spectra
    with slower tails.  Bounded-support models integrate over their
    support only, which makes piecewise-constant spectra exact.
    """
    if omega_max is None:
        omega_max = 800 * np.pi / setting.seq1.base_duration
    if model.support_max is not None:
        omega_max = min(omega_max, model.support_max)
    y1 = switching_function(setting.seq1)
    y2 = switching_function(setting.seq2)
    y12 = y1.product(y2)

    def chi(ya, yb, spectrum, factor, real_part=True):
        return factor / np.pi * _overlap(FilterFunction(ya, yb), spectrum,
                                         real_part, omega_max,
                                         model.breakpoints, nodes)

    return DecayExponents(
        chi_11=chi(y1, y1, model.s11, 2.0),
        chi_22=chi(y2, y2, model.s22, 2.0),
        chi_1212=chi(y12, y12, model.s1212, 2.0),
        chi_12=chi(y1, y2, model.s12, 4.0),
    )


def expected_observables(setting: PlanSetting, angles: StaticAngles,
                         exponents: DecayExponents) -> dict[str, float]:
    """Noise-averaged expectation of every observable of a setting.

    Single-qubit observables depend on the partner preparation: along Z
    the coupling angle adds coherently to the qubit phase, along X it
    survives only as a ``cos(theta12)`` visibility factor.  Two-qubit
    products split into co- and counter-rotating parts whose weights
    ``exp(-chi_sum -/+ chi_12)/2`` carry the cross-spectrum.
    """
    th1, th2, th12 = angles.theta1, angles.theta2, angles.theta12
    a_plus = 0.5 * np.exp(-exponents.chi_sum - exponents.chi_12)
    a_minus = 0.5 * np.exp(-exponents.chi_sum + exponents.chi_12)
    out = {}
    for obs in setting.observables:
        if len(obs) == 2:
            qubit = int(obs[1])
            theta = th1 if qubit == 1 else th2
            chi_self = exponents.chi_11 if qubit == 1 else exponents.chi_22
            amp = np.exp(-(chi_self + exponents.chi_1212))
            trig = np.cos if obs[0] == "X" else np.sin
            partner_prep = setting.prep[1] if qubit == 1 else setting.prep[0]
            if partner_prep == "Z":
                val = amp * trig(theta + th12)
            else:
                val = amp * trig(theta) * np.cos(th12)
        elif obs == "X1X2":
            val = a_plus * np.cos(th1 + th2) + a_minus * np.cos(th1 - th2)
        elif obs == "Y1Y2":
            val = a_minus * np.cos(th1 - th2) - a_plus * np.cos(th1 + th2)
        elif obs == "X1Y2":
            val = a_plus * np.sin(th1 + th2) - a_minus * np.sin(th1 - th2)
        elif obs == "Y1X2":
            val = a_plus * np.sin(th1 + th2) + a_minus * np.sin(th1 - th2)
        else:
            raise ValueError(f"unknown observable {obs!r}")
        out[obs] = float(val)
    return out


def oracle_expectations(plan: ExperimentPlan, params: StaticParams,
                        model: SpectralModel,
                        omega_max: float | None = None,
                        nodes: int = 24) -> dict[tuple[int, int], dict[str, float]]:
    """Predicted expectations for every setting of a plan, keyed (combo, k)."""
    out = {}
    for setting in plan.settings:
        angles = static_angles(params, setting)
        exponents = decay_exponents(model, setting, omega_max=omega_max,
                                    nodes=nodes)
        out[setting.key] = expected_observables(setting, angles, exponents)
    return out
