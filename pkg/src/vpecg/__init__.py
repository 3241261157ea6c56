"""Variable-projection ECG beat modeling.

Models single heartbeats as a sum of QRS, T, P, and baseline components
over adaptive Hermite/sigmoid/piecewise-cubic dictionaries, fitted by
variable projection. The fitted model performs simultaneous baseline
removal, beat delineation, and low-dimensional morphology representation.
"""

from .atoms import AtomSpec, atom_param_derivs, atom_value, hermite_fn, hermite_poly, sigmoid
from .beat import BeatSignal
from .baseline import KnotSet, baseline_column, baseline_jacobian, compute_knots, pchip_column
from .delineation import AnnotatedBeat, Delineation, WaveMarks, delineate
from .dictionary import (
    DictionarySet,
    NonlinearParams,
    WaveDictionaryConfig,
    WaveKind,
    build_wave_columns,
    build_wave_jacobian,
    check_ordering,
    default_dictionaries,
)
from .evaluation import (
    DenoiseScore,
    FiducialStats,
    assign_group,
    correlation,
    kp,
    kp_deviation,
    l_operator,
    reference_spline_denoise,
    score_delineation,
    snr_improvement,
    st_window_mask,
)
from .pipeline import (
    EcgRecord,
    GaConfig,
    GateReport,
    GateThresholds,
    PipelineConfig,
    PipelineResult,
    denoise_lead,
    ga_init,
    gate,
    mean_beat,
    median_pre_r,
    process_record,
    slice_beats,
    stitch_baseline,
)
from .synth import (
    BeatTemplate,
    NoiseParams,
    SynthConfig,
    SynthDataset,
    WaveTemplate,
    baseline_noise,
    generate_clean,
    generate_dataset,
    model_template,
    piecewise_template,
    scale_for_snr,
)
from .varpro import (
    AssembledSystem,
    ModelFit,
    OptimizerConfig,
    assemble,
    evaluate_fit,
    fit,
    gradient,
    residual,
    solve_coeffs,
)

__version__ = "0.1.0"
