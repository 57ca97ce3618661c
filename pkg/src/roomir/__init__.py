"""Hybrid geometric-wave room impulse response simulation toolkit."""

from .analysis import (
    augment_speech,
    band_response,
    compare_report,
    dataset_stats,
    schroeder_edc,
    third_octave_centers,
)
from .calibrate import (
    CalibrationResult,
    CalibrationSetup,
    calibrate_both,
    calibrate_fdtd,
    calibrate_ga,
    combined_eta,
)
from .fdtd import FdtdConfig, band_limited_impulse, derive_grid_params, free_field_grid
from .ga import EnergyHistogram, GaConfig, eyring_rt60, sabine_rt60, synthesize_ir, trace
from .hybrid import CrossoverSpec, butterworth, combine, dc_remove, lr_crossover
from .ir import ImpulseResponse, read_wav, write_wav
from .materials import (
    EmbeddingTable,
    MaterialRecord,
    ScatteringPrior,
    assignment_distribution,
    fallback_embed,
    load_embedding_table,
    load_material_db,
    sample_assignment,
    sample_scattering,
    save_embedding_table,
)
from .pipeline import ManifestEntry, PipelineConfig, run_pipeline, schedule
from .scene import (
    PlacementSet,
    TriangleMesh,
    VoxelGrid,
    dump_voxels,
    load_mesh,
    load_voxel_dump,
    sample_placements,
    voxelize,
)

__version__ = "0.1.0"
