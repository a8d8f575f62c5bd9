"""Lattice two- and three-boson spectral numerics: resonances, bound-state
dispersions, essential spectra, and Efimov eigenvalue counting."""

from .greens import ThresholdError, lattice_green, watson_integral
from .kernel import CountingCurve, KernelOperator
from .model import build_S_r, channel_symbol, counting_functional, lambda0, s0_closed_form, s_hat, slope_S_r
from .potential import LatticePotential, nearest_neighbor, zero_range
from .threebody import (
    EssentialSpectrumReport,
    ModelOperatorT1,
    apply_H,
    build_T1,
    count_N_model,
    count_three_body_tiny,
    tau,
)
from .torus import SpectralPoint, TorusGrid, dispersion, threebody_band, threebody_symbol, twobody_band, twobody_symbol
from .twobody import (
    BirmanSchwingerMismatch,
    ResonanceCalibration,
    bound_state_energy,
    build_G,
    build_h,
    calibrate_resonance,
    count_two_body,
    expansion_check_G,
    resonance_witness_w,
)

__version__ = "0.1.0"
