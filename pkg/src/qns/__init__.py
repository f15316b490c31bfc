"""Two-qubit quantum noise spectroscopy toolkit.

Engineer spatiotemporally correlated dephasing and ZZ-crosstalk noise,
simulate fixed-total-time pulse-sequence (FTTPS) experiments, and
reconstruct self-, cross-, and crosstalk spectra together with static
detunings and coupling from the measured decay rates.
"""

__version__ = "0.1.0"
