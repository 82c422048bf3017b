"""UWB radar imaging in dispersive media.

Frequency-domain phase-shift-and-sum image formation with per-frequency
phase, attenuation and multipath compensation, plus time-shift baselines
(DAS, DMAS, multistatic RAR), a refraction path solver for circular
boundaries, a dispersive-media model, a synthetic multistatic data
generator, and image quality metrics.
"""

from .channel import (
    Antenna,
    AntennaModel,
    PathTransfer,
    combined_transfer,
    compensator,
    effective_point,
    forward_channel,
    leg_transfer_sums,
    path_transfer,
    phase_shift,
)
from .dielectric import (
    ComplexWavenumber,
    DielectricSpectrum,
    air,
    complex_permittivity,
    constant_medium,
    dispersive_time_spread,
    glycerin_like,
    load_spectrum_csv,
    perturb_spectrum,
    refractive_index,
    save_spectrum_csv,
    wavenumber,
)
from .errors import (
    ConfigError,
    DegenerateIdeal,
    DegenerateImage,
    FrequencyOutOfRange,
    GridMismatch,
    IncompleteDataset,
    InvalidParameter,
    InvalidRange,
    NoPath,
    NyquistViolation,
    PointNotExterior,
    PointNotInterior,
    SolverError,
    UwbimError,
)
from .forward import (
    ArtifactModel,
    Scatterer,
    Scene,
    default_fgrid,
    disk_footprint,
    rect_footprint,
    simulate,
    simulate_background_only,
)
from .grid import GridSpec, ImageGrid
from .metrics import (
    IdealProfile,
    MetricRow,
    contrast,
    ideal_from_footprints,
    relative_difference,
    snr,
    write_metric_report,
)
from .raypath import (
    CylinderScene,
    PathCountMap,
    RayPath,
    candidate_times,
    least_time_path,
    path_count_map,
    solve_refraction_points,
)
from .reconstruct import (
    ReconstructionConfig,
    channel_phase_spread,
    das,
    dmas,
    ps_compensated_waveform,
    psas,
    rar,
    ts_delay,
    ts_shifted_waveform,
)
from .signal import (
    MultistaticDataset,
    ScanGeometry,
    SpectrumTrace,
    TimeTrace,
    band_3db,
    envelope,
    envelope_fwhm,
    from_spectrum,
    load_dataset,
    remove_artifact,
    save_dataset,
    synthesize_pulse,
    to_spectrum,
)

__version__ = "0.1.0"
