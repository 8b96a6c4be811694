"""
Sparse2Dense - Codec Pipeline Module
End-to-end encoder and decoder.

Encoder: key-reference frame -> keyframe payload; every frame -> keypoints
-> quantized residuals -> arithmetic-coded records in one "S2DC" container.
Decoder: container -> key-reference frame and keypoints -> dense motion ->
refined feature -> reconstructed frame and vertex set per inter frame.
Analysis: q_log2 rate sweeps and per-frame loss evaluation against
reference frames and vertex sets.
"""

import dataclasses
import re
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..analytics.rate_distortion import RDReport, analyze_container, sequence_psnr
from ..config import CodecConfig, KeyframeCodec
from ..utils import Utils
from .container import Container, ContainerHeader
from .errors import ConfigError, ContainerError, FrameError, MalformedInputError
from .frame_io import decode_png, encode_png, quantize_frame
from .keypoint_codec import (
    KeypointStreamDecoder, KeypointStreamEncoder, QuantizedKeypointSet, dequantize,
)
from .keypoint_extractor import ExtractorWeights, KeypointExtractor
from .logger import Logger
from .loss_eval import AffineTransform, LossBreakdown, Transform, evaluate_losses
from .motion_engine import DenseMotion, DenseMotionWeights, estimate_motion
from .synthesis_heads import (
    GeneratorWeights, SynthesisHeads, TextureEncoderWeights, VertexHeadWeights, VertexSet,
)
from .tensor_core import Tensor
from .validator import TensorSpec
from .weights import WeightBundle, init_weights, zero_weights


# ==================== MODELS ====================

def model_specs(config: CodecConfig) -> List[TensorSpec]:
    """Every tensor the pipeline reads, for one configuration."""
    return (ExtractorWeights.specs(config.extractor)
            + DenseMotionWeights.specs(config.motion)
            + TextureEncoderWeights.specs(config.texture)
            + GeneratorWeights.specs(config.generator)
            + VertexHeadWeights.specs(config.vertex_head))


def _count_indexed(bundle: WeightBundle, pattern: str) -> int:
    regex = re.compile(pattern)
    return len({m.group(1) for name in bundle.names() for m in [regex.fullmatch(name)] if m})


def infer_config(bundle: WeightBundle, base: CodecConfig) -> CodecConfig:
    """
    Network widths read off tensor shapes; K, D, q_log2 and fps come from
    `base`. Missing anchor tensors raise TopologyError.
    """
    depth = base.depth
    widths: Dict[str, Any] = {
        'extractor_levels': _count_indexed(bundle, r"extractor\.unet\.down(\d+)\.weight"),
        'extractor_base': bundle.get("extractor.unet.down0.weight").shape[0],
        'feature_levels': _count_indexed(bundle, r"texture\.conv(\d+)\.weight"),
        'texture_hidden': bundle.get("texture.conv0.weight").shape[0],
        'texture_channels': bundle.get("texture.project.weight").shape[0] // depth,
        'motion_levels': _count_indexed(bundle, r"motion\.unet\.down(\d+)\.weight"),
        'motion_base': bundle.get("motion.unet.down0.weight").shape[0],
        'generator_hidden': bundle.get("generator.up0.weight").shape[0],
        'res_blocks': _count_indexed(bundle, r"vertex\.res(\d+)\.conv1\.weight"),
    }
    if widths['res_blocks']:
        conv1 = bundle.get("vertex.res0.conv1.weight")
        widths['res_bottleneck'] = conv1.shape[0]
        widths['res_kernel'] = conv1.shape[-1]
    return base.replace(**widths).validate()


@dataclass(frozen=True)
class CodecModels:
    """Validated weights for every network, plus the configuration they match."""
    config: CodecConfig
    extractor: ExtractorWeights
    motion: DenseMotionWeights
    texture: TextureEncoderWeights
    generator: GeneratorWeights
    vertex_head: VertexHeadWeights

    @classmethod
    def from_bundle(cls, bundle: WeightBundle, config: CodecConfig,
                    infer_widths: bool = True) -> 'CodecModels':
        if infer_widths:
            config = infer_config(bundle, config)
        return cls(
            config=config,
            extractor=ExtractorWeights.from_bundle(bundle, config.extractor),
            motion=DenseMotionWeights.from_bundle(bundle, config.motion),
            texture=TextureEncoderWeights.from_bundle(bundle, config.texture),
            generator=GeneratorWeights.from_bundle(bundle, config.generator),
            vertex_head=VertexHeadWeights.from_bundle(bundle, config.vertex_head),
        )

    @classmethod
    def seeded(cls, config: CodecConfig, seed: int = 0) -> 'CodecModels':
        return cls.from_bundle(build_weights(config, seed), config, infer_widths=False)

    @classmethod
    def load(cls, path: Union[str, Path], config: CodecConfig) -> 'CodecModels':
        return cls.from_bundle(WeightBundle.load(path), config)

    def keypoint_extractor(self) -> KeypointExtractor:
        return KeypointExtractor(self.extractor, self.config.downsample, self.config.max_workers)

    def heads(self) -> SynthesisHeads:
        return SynthesisHeads(self.texture, self.generator, self.vertex_head)


def build_weights(config: CodecConfig, seed: int = 0, zero: bool = False) -> WeightBundle:
    """Seeded He-normal (or all-zero) weights for every network."""
    specs = model_specs(config.validate())
    return zero_weights(specs) if zero else init_weights(specs, seed)


Models = Union[CodecModels, WeightBundle]


WIDTH_FIELDS = ('extractor_base', 'extractor_levels', 'texture_hidden', 'texture_channels',
                'feature_levels', 'motion_base', 'motion_levels', 'generator_hidden',
                'res_blocks', 'res_kernel', 'res_bottleneck')


def _resolve_models(weights: Models, config: CodecConfig) -> CodecModels:
    """Widths come from the weights, every other knob from `config`."""
    if isinstance(weights, CodecModels):
        if weights.config.num_keypoints != config.num_keypoints or weights.config.depth != config.depth:
            raise ConfigError("Weights were built for a different K or depth",
                              weights=f"K={weights.config.num_keypoints} D={weights.config.depth}",
                              stream=f"K={config.num_keypoints} D={config.depth}")
        widths = {name: getattr(weights.config, name) for name in WIDTH_FIELDS}
        return dataclasses.replace(weights, config=config.replace(**widths))
    return CodecModels.from_bundle(weights, config)


# ==================== RESULTS ====================

@dataclass
class EncodeResult:
    data: bytes
    report: RDReport
    header: ContainerHeader
    quantized: List[QuantizedKeypointSet] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)
    stats: Dict[str, Any] = field(default_factory=lambda: {
        'frames': 0,
        'bytes': 0,
        'encode_time_ms': 0,
    })

    def to_dict(self) -> Dict[str, Any]:
        return {
            'header': self.header.to_dict(),
            'report': self.report.to_dict(),
            'errors': list(self.errors),
            'stats': dict(self.stats),
        }


@dataclass
class DecodeResult:
    header: ContainerHeader
    frames: List[Tensor] = field(default_factory=list)
    vertices: List[Optional[VertexSet]] = field(default_factory=list)
    keypoints: List[QuantizedKeypointSet] = field(default_factory=list)
    motions: List[DenseMotion] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)
    stats: Dict[str, Any] = field(default_factory=lambda: {
        'frames': 0,
        'decode_time_ms': 0,
    })

    def to_dict(self) -> Dict[str, Any]:
        return {
            'header': self.header.to_dict(),
            'frames': len(self.frames),
            'vertex_sets': sum(1 for v in self.vertices if v is not None),
            'errors': list(self.errors),
            'stats': dict(self.stats),
        }


# ==================== ENCODER ====================

def _check_frames(frames: Sequence[Tensor], config: CodecConfig) -> Tuple[int, int]:
    if not frames:
        raise FrameError("Sequence has no frames")
    first = frames[0]
    if first.ndim != 3 or first.shape[0] != 3:
        raise FrameError("Frames must be [3, H, W]", frame_index=0, actual=first.shape)
    for index, frame in enumerate(frames[1:], start=1):
        if frame.shape != first.shape:
            raise FrameError("Frame size differs from the key-reference frame",
                             frame_index=index, expected=first.shape, actual=frame.shape)
    _, height, width = first.shape
    config.check_frame_size(width, height)
    return width, height


def encode_sequence(frames: Sequence[Tensor], config: CodecConfig, weights: Models,
                    keyframe_payload: Optional[bytes] = None) -> EncodeResult:
    """
    Code a sequence whose first frame is the key-reference frame.

    With the external keyframe codec, `keyframe_payload` is carried opaque
    and frames[0] must be the image that payload decodes to.
    """
    logger = Logger.get_instance()
    start = datetime.now()
    config = config.validate()
    models = _resolve_models(weights, config)
    config = models.config
    width, height = _check_frames(frames, config)

    codec = KeyframeCodec[config.keyframe_codec.upper()]
    if codec is KeyframeCodec.PNG:
        payload = encode_png(frames[0])
        key_frame = decode_png(payload)
    else:
        if keyframe_payload is None:
            raise ConfigError("External keyframe codec needs a keyframe payload")
        payload = bytes(keyframe_payload)
        key_frame = quantize_frame(frames[0])

    extractor = models.keypoint_extractor()
    stream = KeypointStreamEncoder(config.q_log2)
    quantized = [stream.start(extractor.extract(key_frame))]
    records = []
    for index, kps in enumerate(extractor.extract_many(frames[1:]), start=1):
        bitstream, q = stream.push(kps)
        records.append(bitstream)
        quantized.append(q)
        logger.debug("Encoded frame", frame=index, bits=bitstream.bit_count)

    header = ContainerHeader(
        width=width, height=height,
        num_keypoints=config.num_keypoints, q_log2=config.q_log2, depth=config.depth,
        fps_num=config.fps_num, fps_den=config.fps_den,
        keyframe_codec=codec, keyframe_payload_len=len(payload),
    )
    data = Container(header, payload, records).to_bytes()
    report = analyze_container(data)

    result = EncodeResult(data=data, report=report, header=header, quantized=quantized)
    result.stats['frames'] = len(frames)
    result.stats['bytes'] = len(data)
    result.stats['encode_time_ms'] = int((datetime.now() - start).total_seconds() * 1000)
    logger.info("Encoded sequence", frames=len(frames), bytes=len(data),
                keypoint_bits=report.total_keypoint_bits, kbps=round(report.kbps, 3))
    return result


# ==================== DECODER ====================

def _key_frame(container: Container, keyframe_image: Optional[Tensor]) -> Tensor:
    header = container.header
    if header.keyframe_codec is KeyframeCodec.PNG:
        frame = decode_png(container.keyframe_payload)
    else:
        if keyframe_image is None:
            raise ConfigError("External keyframe payload needs its decoded image")
        frame = quantize_frame(keyframe_image)
    if frame.shape != (3, header.height, header.width):
        raise ContainerError("Key-reference frame size disagrees with header",
                             expected=(3, header.height, header.width), actual=frame.shape)
    return frame


def _stream_config(header: ContainerHeader, base: Optional[CodecConfig]) -> CodecConfig:
    base = base or CodecConfig()
    return base.replace(num_keypoints=header.num_keypoints, q_log2=header.q_log2,
                        depth=header.depth, fps_num=header.fps_num, fps_den=header.fps_den,
                        keyframe_codec=header.keyframe_codec.name.lower())


def _decode_stream(container: Container, models: CodecModels,
                   keyframe_image: Optional[Tensor]) -> Tuple[Tensor, List[QuantizedKeypointSet]]:
    header = container.header
    key_frame = _key_frame(container, keyframe_image)
    stream = KeypointStreamDecoder(header.q_log2, header.num_keypoints)
    keypoints = [stream.start(models.keypoint_extractor().extract(key_frame))]
    for record in container.records:
        keypoints.append(stream.pull(record))
    return key_frame, keypoints


def decode_keypoints(data: bytes, weights: Models, config: Optional[CodecConfig] = None,
                     keyframe_image: Optional[Tensor] = None) -> List[QuantizedKeypointSet]:
    """Quantized keypoints for every frame, key-reference frame first; no synthesis."""
    container = Container.from_bytes(data)
    models = _resolve_models(weights, _stream_config(container.header, config))
    _, keypoints = _decode_stream(container, models, keyframe_image)
    return keypoints


def decode_sequence(data: bytes, weights: Models, config: Optional[CodecConfig] = None,
                    keyframe_image: Optional[Tensor] = None, with_vertices: bool = True,
                    keep_motion: bool = False) -> DecodeResult:
    """
    Reconstruct every frame. Frame 0 is the decoded key-reference frame and
    has no vertex set; inter frames are synthesized frame-parallel.
    """
    logger = Logger.get_instance()
    start = datetime.now()
    container = Container.from_bytes(data)
    header = container.header
    models = _resolve_models(weights, _stream_config(header, config))
    models.config.check_frame_size(header.width, header.height)

    key_frame, keypoints = _decode_stream(container, models, keyframe_image)
    heads = models.heads()
    texture = heads.encode_texture(key_frame)
    kp_ref = dequantize(keypoints[0])
    sigma2 = models.config.sigma2

    def synthesize(q: QuantizedKeypointSet):
        motion = estimate_motion(texture, kp_ref, dequantize(q), models.motion, sigma2)
        frame, vertices = heads.synthesize(texture, motion.flow, motion.occlusion, with_vertices)
        return frame, vertices, motion

    outputs = Utils.parallel_map(synthesize, keypoints[1:], models.config.max_workers)

    result = DecodeResult(header=header, keypoints=keypoints)
    result.frames = [key_frame] + [out[0] for out in outputs]
    result.vertices = [None] + [out[1] for out in outputs]
    if keep_motion:
        result.motions = [out[2] for out in outputs]
    result.stats['frames'] = len(result.frames)
    result.stats['decode_time_ms'] = int((datetime.now() - start).total_seconds() * 1000)
    logger.info("Decoded sequence", frames=len(result.frames),
                time_ms=result.stats['decode_time_ms'])
    return result


# ==================== ANALYSIS ====================

@dataclass(frozen=True)
class RDSweepPoint:
    """One operating point of a q_log2 sweep; quality is mean inter-frame PSNR."""
    q_log2: int
    kbps: float
    keypoint_kbps: float
    psnr: float

    @property
    def point(self) -> Tuple[float, float]:
        return self.kbps, self.psnr

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def rd_sweep(frames: Sequence[Tensor], config: CodecConfig, weights: Models,
             q_values: Sequence[int], keyframe_payload: Optional[bytes] = None) -> List[RDSweepPoint]:
    """Encode and decode the sequence once per q_log2 value, in the given order."""
    logger = Logger.get_instance()
    if len(frames) < 2:
        raise FrameError("A rate sweep needs at least one inter frame", frames=len(frames))
    if not q_values:
        raise ConfigError("A rate sweep needs at least one q_log2 value")
    config = config.validate()
    models = _resolve_models(weights, config)
    reference = [quantize_frame(frame) for frame in frames[1:]]
    key_image = frames[0] if keyframe_payload is not None else None

    points: List[RDSweepPoint] = []
    for q_log2 in q_values:
        q_config = config.replace(q_log2=q_log2).validate()
        encoded = encode_sequence(frames, q_config, models, keyframe_payload)
        decoded = decode_sequence(encoded.data, models, q_config, keyframe_image=key_image,
                                  with_vertices=False)
        psnr = float(np.mean(sequence_psnr(decoded.frames[1:], reference)))
        points.append(RDSweepPoint(q_log2, encoded.report.kbps, encoded.report.keypoint_kbps, psnr))
        logger.info("Rate point", q_log2=q_log2, kbps=round(encoded.report.kbps, 3),
                    psnr=round(psnr, 3))
    return points


def evaluate_sequence(data: bytes, weights: Models, reference_frames: Sequence[Tensor],
                      reference_vertices: Sequence[Optional[VertexSet]],
                      transform: Optional[Transform] = None,
                      config: Optional[CodecConfig] = None,
                      fake_logits: Optional[Tensor] = None,
                      keyframe_image: Optional[Tensor] = None) -> List[LossBreakdown]:
    """
    Decode a container and score every inter frame i against
    reference_frames[i] and reference_vertices[i]. The equivariance term
    uses `transform` (identity by default).
    """
    container = Container.from_bytes(data)
    models = _resolve_models(weights, _stream_config(container.header, config))
    frames = container.frames
    if len(reference_frames) < frames:
        raise FrameError("Fewer reference frames than coded frames",
                         expected=frames, actual=len(reference_frames))
    if len(reference_vertices) < frames:
        raise MalformedInputError("Fewer reference vertex sets than coded frames",
                                  expected=frames, actual=len(reference_vertices))
    missing = [i for i in range(1, frames) if reference_vertices[i] is None]
    if missing:
        raise MalformedInputError("Reference vertex set missing", frame=missing[0])

    decoded = decode_sequence(data, models, config, keyframe_image=keyframe_image)
    transform = transform or AffineTransform.identity()

    def score(index: int) -> LossBreakdown:
        return evaluate_losses(
            reference_frames[index], decoded.frames[index], transform, models.extractor,
            dequantize(decoded.keypoints[index]), fake_logits,
            decoded.vertices[index], reference_vertices[index],
            downsample=models.config.downsample,
        )

    return Utils.parallel_map(score, range(1, frames), models.config.max_workers)
