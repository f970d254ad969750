"""Turn-taking aware conversation simulation for diarization training data."""
from ._kernels import BACKEND
from .corpus_io import (
    Waveform,
    load_params,
    load_pool,
    parse_rttm,
    read_wav,
    save_params,
    write_rttm,
    write_wav,
)
from .extract import classify_transitions, estimate_params
from .metrics import (
    compare_datasets,
    dataset_stats,
    duration_samples,
    emd_1d,
    overlap_ratio,
    silence_ratio,
    similarity_score,
)
from .render import RenderConfig, convolve_rir, mixing_scale, render_mixture
from .sampling import (
    make_rng,
    next_transition,
    sample_categorical,
    sample_exponential,
    sample_truncated_exponential,
)
from .simulator import apply_transition, concat_and_sum_plan, simulate_plan
from .timeline import (
    Annotation,
    MixturePlan,
    PlacedUtterance,
    SimParams,
    TimedSegment,
    TransitionType,
    UtterancePool,
    UtteranceRecord,
    annotation_from_plan,
    callhome1_params,
    speaker_count_intervals,
    validate_params,
)

__version__ = "0.1.0"
