"""Classical mode dynamics of the parametric dissipative model.

Closed-form deadlines, thresholds and lifetimes, exact spherical-Bessel
solutions of the damped/amplified oscillator pair, an adaptive integrator to
cross-check them, and memory-record bookkeeping built on top.
"""

__version__ = "0.1.0"

from .errors import (
    CapabilityError,
    ClockError,
    DomainError,
    IntegrationError,
    ModelError,
    NotRecordableError,
    ParameterError,
    PastDeadlineError,
    UnknownRecordError,
)
from .formulas import (
    DomainSnapshot,
    Mode,
    ModelParams,
    RecordingWindow,
    capital_omega,
    capital_omega_sq,
    domain_size,
    domain_snapshot,
    k_threshold,
    lambda_inverse,
    lifetime_lambda,
    omega_n,
    omega_via_lambda,
    recording_deadline,
)
from .specfun import (
    BesselCombination,
    TransformParams,
    analytic_pair,
    conjugate_r,
    sph_bessel_j,
    sph_bessel_y,
)
from .integrator import (
    IntegratorConfig,
    OscillatorSystem,
    Trajectory,
    energy_like_diagnostic,
    integrate,
    residual,
)
from .domains import MemoryRegistry, StimulusSpectrum, fig1_curves, fig2_curves
