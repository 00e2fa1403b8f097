"""Exact simulation and numerical checks for an N-particle energy-tank jump process."""

__version__ = "0.1.0"

from .equilibrium import PiMarginal, ks_y, pi_invariance_test, pi_y_cdf, sample_pi, tail_integral
from .kac import KacState, kac_rotate, kac_simulate, kac_step, v1_squared_cdf
from .lyapunov import (
    C1,
    C2,
    LyapunovParams,
    Q_i,
    RegionLabel,
    classify_region,
    drift_check_one_jump,
    drift_check_Ph,
    generator_V,
    in_B,
    lyapunov_V,
)
from .process import (
    EnergyState,
    JumpEvent,
    ModelParams,
    Trajectory,
    apply_exchange,
    run_ensemble,
    sample_pi_array,
    select_particle,
    simulate,
    step,
    tilted_states,
    total_rate,
)
from .quadrature import gauss_kronrod
from .rng import RngStream
from .stats import (
    ActiveSet,
    DecayFit,
    EmpiricalDist,
    PassageSample,
    VLevelSet,
    clt_batch_means,
    decay_fit,
    first_passage,
    moment_estimate,
    tv_between,
    tv_min_to_pi,
    tv_to_pi,
)
