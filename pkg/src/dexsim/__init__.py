"""dexsim: stochastic simulator and analysis chain for quantum-dot photon
cascades and the heralded dark-exciton spin qubit."""

from .constants import PLANCK_UEV_NS, precession_period
from .scheme import (
    LevelScheme,
    QDState,
    SchemeError,
    Transition,
    build_scheme,
    default_paper_scheme,
    line_emission_rates,
    load_scheme,
    rate_matrix,
    save_scheme,
    scheme_to_config,
    stationary_distribution,
    validate,
)
from .spin import (
    PrecessionParams,
    SpinState,
    analytic_cocircular,
    evolve,
    init_spin,
    measure_helicity,
)
from .trajectory import (
    EngineConfig,
    EventStream,
    SimulationResult,
    concatenate_trajectories,
    run_ensemble,
    run_trajectory,
    simulate,
    step,
)
from .detection import (
    DetectionStream,
    DetectorChannel,
    apply_detector,
    apply_detectors,
    project_polarization,
    spcm_channel,
    sspd_channel,
)
from .correlator import (
    CorrelationCurve,
    CorrelationHistogram,
    CorrelationPair,
    cross_correlate,
    cross_correlate_brute,
    degree_of_correlation,
    merge_histograms,
    normalize,
    start_stop_correlate,
)
from .analysis import (
    BeatFit,
    SpectrumLine,
    SpectrumResult,
    fit_damped_cosine,
    fss_from_period,
    model_damped_cosine,
    synth_spectrum,
)
from .experiments import ExperimentPlan, PlanResult, get_plan, list_plans, run_plan

__version__ = "0.1.0"
