"""
Sparse2Dense - Frame I/O Module
Reads and writes RGB frames as [3, H, W] float tensors in [0, 1].
"""

import glob
import io
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from ..config import FrameFormat
from .errors import ContainerError, FrameError
from .tensor_core import Tensor, as_tensor

FRAME_EXTENSIONS = {'.png', '.ppm', '.pnm', '.jpg', '.jpeg', '.bmp'}


def image_to_tensor(image: Image.Image) -> Tensor:
    pixels = np.asarray(image.convert('RGB'), dtype=np.float32) / 255.0
    return as_tensor(np.transpose(pixels, (2, 0, 1)))


def tensor_to_image(frame: Tensor) -> Image.Image:
    if frame.ndim != 3 or frame.shape[0] != 3:
        raise FrameError("Frames must be [3, H, W]", shape=frame.shape)
    pixels = np.rint(np.clip(frame.astype(np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    return Image.fromarray(np.ascontiguousarray(np.transpose(pixels, (1, 2, 0))))


def load_frame(path: Union[str, Path], index: int = -1) -> Tensor:
    try:
        with Image.open(path) as image:
            return image_to_tensor(image)
    except (OSError, UnidentifiedImageError) as e:
        raise FrameError(f"Cannot read frame {path}", frame_index=index, reason=str(e)) from e


def save_frame(frame: Tensor, path: Union[str, Path],
               fmt: FrameFormat = FrameFormat.PNG) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensor_to_image(frame).save(path, format=fmt.name)
    return path


def encode_png(frame: Tensor) -> bytes:
    """Lossless 8-bit PNG payload of a frame."""
    buffer = io.BytesIO()
    tensor_to_image(frame).save(buffer, format='PNG', optimize=False)
    return buffer.getvalue()


def decode_png(payload: bytes) -> Tensor:
    try:
        with Image.open(io.BytesIO(payload)) as image:
            image.load()
            return image_to_tensor(image)
    except Exception as e:  # Pillow raises SyntaxError, zlib.error, EOFError on corrupt data
        raise ContainerError("Keyframe payload is not a readable image", reason=str(e)) from e


def quantize_frame(frame: Tensor) -> Tensor:
    """The frame as the decoder will see it after an 8-bit round trip."""
    return image_to_tensor(tensor_to_image(frame))


def list_frames(source: Union[str, Path]) -> List[Path]:
    """Frame files in a directory, or matching a glob pattern, in name order."""
    source_path = Path(source)
    if source_path.is_dir():
        paths = [p for p in source_path.iterdir()
                 if p.is_file() and p.suffix.lower() in FRAME_EXTENSIONS]
    else:
        paths = [Path(p) for p in glob.glob(str(source))]
    paths = sorted(paths)
    if not paths:
        raise FrameError(f"No frames found at {source}")
    return paths


def load_frames(paths: Sequence[Union[str, Path]]) -> List[Tensor]:
    """All frames, checking every size against the first."""
    frames: List[Tensor] = []
    for index, path in enumerate(paths):
        frame = load_frame(path, index)
        if frames and frame.shape != frames[0].shape:
            raise FrameError("Frame size differs from the first frame", frame_index=index,
                             expected=frames[0].shape, actual=frame.shape)
        frames.append(frame)
    return frames


def save_frames(frames: Sequence[Tensor], out_dir: Union[str, Path],
                fmt: FrameFormat = FrameFormat.PNG, stem: str = 'frame') -> List[Path]:
    out_dir = Path(out_dir)
    return [save_frame(frame, out_dir / f"{stem}_{i:05d}.{fmt.value}", fmt)
            for i, frame in enumerate(frames)]
