"""Surrounding-aware concealed object detection toolkit.

Building blocks for segmenting objects that blend into their background:
surrounding-halo supervision labels, a surrounding-anchored contrastive
loss with a spatially compressed pair-sampling strategy, the standard
segmentation metric suite, and a small CPU-trainable pipeline whose
backward passes are written by hand and checked against finite
differences.

The pairwise inner loops run on a compiled extension when it was built,
with a pure-numpy fallback selected automatically at import (see
``surround_cod.backend``).
"""

from .backend import available_backends, default_backend_name
from .core import (
    concat_channels,
    convolve2d_same,
    downsample_avg,
    finite_diff_grad,
    sigmoid_map,
    upsample_bilinear,
)
from .metrics import bce_loss, e_measure, evaluate_batch, mae, s_measure, weighted_fmeasure
from .refine import constraint_map, fuse_features, group_guidance, refine_chain, refine_step
from .sacloss import (
    SacConfig,
    SamplingMode,
    SignConvention,
    pair_distance,
    partition_regions,
    sacloss_grad,
    sacloss_multi_layer,
    sacloss_value,
)
from .scct import ScctLayout, pair_count_reduction, scct_forward, scct_inverse
from .surround import SurroundingLabel, gaussian_kernel, surrounding_label, surrounding_pyramid
from .synth import SynthSample, synth_sample
from .train import TrainConfig, joint_loss, learning_rate, train

__version__ = "0.1.0"
