"""maskcam: mask-based lensless camera toolkit.

Simulates the wave-optics forward model of mask-based cameras, designs
phase masks by near-field phase retrieval, reconstructs scenes with
classical and spatially varying deconvolution, and verifies range/null
space consistency exactly on desk-scale operators.
"""

__version__ = "0.1.0"

from .imaging import (
    ForwardSpec,
    LinearOperator,
    Measurement,
    build_matrix,
    conv_forward,
    quantize,
    replicate_pad,
    sv_forward,
)
from .maskdesign import NfprConfig, TargetPsf, nfpr_optimize, perlin_contour_psf
from .metrics import RegionSpec, psnr, region_psnr, ssim
from .optics import (
    PhaseMask,
    PropagationSpec,
    Psf,
    WaveField,
    direct_huygens_propagate,
    fresnel_propagate,
    psf_similarity,
    similarity_sweep,
    simulate_psf,
)
from .rangenull import (
    DiffusionSchedule,
    PseudoInverse,
    approx_range_project,
    forward_diffuse,
    null_complete,
    null_loss,
    pseudo_inverse,
    range_project,
    schedule_conditionals,
)
from .recon import (
    AdmmConfig,
    PsfSet,
    WeightField,
    admm_tv,
    calibrate_kernels,
    compute_weights,
    interpolation_weights,
    region_grid,
    soft_threshold,
    svdeconv_apply,
    wiener_deconvolve,
)

__all__ = [name for name in dir() if not name.startswith("_")]
