"""Ray-traced vs. 3GPP TDL power delay profile comparison."""

__version__ = "0.1.0"

from .divergence import (
    DelayGrid,
    KlResult,
    ProbabilityMass,
    ResampleMethod,
    compare,
    kl_bits,
    resample,
    to_probability,
)
from .ingest import (
    ParseError,
    PathDataset,
    SyntheticSpec,
    generate_synthetic,
    parse_insite_cir,
    parse_paths_csv,
    read_paths_csv,
    write_paths_csv,
)
from .metrics import (
    DelayMetrics,
    MeanMode,
    effective_max_delay,
    mean_excess_delay,
    rms_delay_spread,
    summarize,
)
from .pdp import (
    CancellationWarning,
    Combine,
    Frame,
    MultipathRecord,
    PdpError,
    PowerDelayProfile,
    Tap,
    apply_threshold,
    build_profile,
    normalize_to_peak,
    process_profile,
    read_pdp,
    rezero_delays,
    write_pdp,
)
from .tdl import (
    PRESETS,
    Scenario,
    ScenarioPreset,
    TdlModel,
    TdlModelTable,
    model_table,
    normalization_check,
    preset_ds,
    scaled_profile,
)
