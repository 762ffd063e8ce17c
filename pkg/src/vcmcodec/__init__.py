"""Scalable two-layer clip codec.

Layer 0 carries quantized keypoint descriptors (position plus covariance)
that decode on their own for machine analysis; layer 1 carries a coded key
frame from which the remaining frames are synthesized under keypoint-derived
motion guidance.
"""

from .container import (
    Container,
    decode_keyframe_layer,
    encode_keyframe_layer,
    read_container,
    write_container,
)
from .errors import (
    CodecError,
    CorruptStreamError,
    DecodeError,
    EncodeError,
    InvalidClipSpecError,
    InvalidInputError,
    InvalidWeightsError,
    PreconditionError,
)
from .estimators import (
    GaussianHeatmapRenderer,
    KeypointQuantizer,
    MotionFrameSynthesizer,
    SoftArgmaxKeypointExtractor,
)
from .featstream import (
    FeatureStream,
    QuantizedStream,
    bitrate_kbps,
    decode_feature_stream,
    decode_feature_stream_quantized,
    dequantize_stream,
    encode_feature_stream,
    pack_descriptors,
    quantize_stream,
    trajectories,
    unpack_descriptors,
)
from .heatmaps import (
    difference_heatmaps,
    expected_point,
    extract_keypoints,
    gaussian_heatmap,
    point_covariance,
    regularize_covariance,
    softmax_normalize,
)
from .losses import (
    LossWeights,
    feature_matching_loss,
    finite_difference_check,
    lsgan_discriminator_loss,
    lsgan_generator_loss,
    point_loss,
    total_loss,
)
from .metrics import psnr, ssim
from .motion import SynthesisConfig, analytic_flow, synthesize_frame, warp_bilinear
from .nnet import WeightBundle, random_synthesis_weights, random_unet_weights, unet_forward
from .pipeline import (
    EncodeSettings,
    EvalReport,
    decode_clip,
    decode_features,
    encode_clip,
    evaluate,
)
from .synthetic import generate_clip

__version__ = "0.1.0"
