"""Bouc-Wen hysteresis toolkit: simulation, fractional-order dynamics,
identification and feedforward compensation."""
from ._backend import NAME as BACKEND
from .compensate import (
    CompensationReport,
    compensate_cbw,
    compensate_fonbw,
    compensate_zhu,
    evaluate_cascade,
)
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    IdentificationFailure,
    InvalidArgument,
    SolverError,
)
from .fracdiff import GlWeightTable, gl_derivative, gl_history_sum, gl_weights
from .identify import (
    DeConfig,
    IdentificationProblem,
    IdentificationResult,
    evaluate_candidate,
    rms_error,
)
from .loops import LoopMetrics, loop_metrics
from .models import (
    Branch,
    CbwAuxParams,
    CbwParams,
    FonbwParams,
    NbwParams,
    PolynomialGain,
    ZhuParams,
    classify_branch,
    normalize_cbw,
    scale_cbw,
    simulate,
    simulate_anbw,
    simulate_cbw,
    simulate_fonbw,
    simulate_nbw,
    simulate_zhu,
)
from .signals import TimeSeries, gen_multifreq, gen_sine_offset, gen_sweep_eq19, read_csv, write_csv

__version__ = "0.1.0"
