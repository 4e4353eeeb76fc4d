//! Short-time Fourier transforms, mixed modulation / amalgam norms and the
//! phase-space region analysis of Fresnel functions.

mod checks;
mod portrait;
mod regions;
mod stft;
mod window;

pub use checks::{dilation_factor, dilation_scaling_check, field_norm, window_swap_equivalence, DilationRow};
pub use portrait::{NormAccumulator, NormReport, NormRequest, PhaseSpacePortrait, PortraitSlice};
pub use regions::{
    calibrate_a, decay_exponent_fit, near_region_measure, near_region_sup, operator_norm, region_partition, NOISE_FLOOR,
};
pub use stft::{
    fft_friendly, grid_norms, local_patch_size, stft, stft_grid_stream, stft_local, stft_values_at, strided_centers,
    FresnelStft, XLattice,
};
pub use window::{Window, WindowKind, WINDOW_EPS};
