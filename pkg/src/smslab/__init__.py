"""smslab: simulation, synthesis, and reconstruction of undersampled
dynamic simultaneous multi-slice (SMS) MRI on deterministic phantoms."""

from .errors import CorruptFile, InvalidConfig, InvalidInput, SmsLabError
from .metrics import (
    LossWeights,
    SequenceMetrics,
    TTestResult,
    fail_flag,
    loss_eval,
    nmse,
    paired_ttest,
    psnr,
    ssim,
    temporal_tv,
)
from .phantoms import PhantomSpec, bolus_curve, gen_cine_phantom, gen_fpp_phantom
from .recon import (
    DenoiserSpec,
    ReconConfig,
    SliceMode,
    ValidationCase,
    cascade_recon,
    data_consistency,
    denoise,
    grid_search_weights,
    prox_gradient_solve,
    zero_filled,
)
from .sampling import MaskSpec, apply_mask, embed_sms_mask, make_inplane_rows
from .synth import (
    SynthConfig,
    SynthResult,
    csm_circular,
    csm_gaussian,
    grating_phase,
    kmeans3d,
    propagate_majority,
    sample_cluster_phases,
    synthesize_kspace,
)
from .transforms import acquire_sms_lines, apply_csm, fft2, fft3d, rss_combine, slice_dft
from .tv import tv_denoise_axis, tv_prox_1d
from .volfile import read_metadata, read_volume, write_metadata, write_volume

__version__ = "0.1.0"
