"""
Sparse2Dense - Exporter Module
Writes decoder outputs: reconstructed frames, "S2DV" vertex files (with
optional CSV), loss reports, motion dumps and JSON reports.

S2DV layout, little-endian: magic "S2DV", vertex count u32,
then count * 2 float32 values in (x, y) row order.
"""

import csv
import struct
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..config import Config, FrameFormat
from ..utils import Utils
from .errors import CodecError, MalformedInputError
from .frame_io import save_frame
from .logger import Logger
from .loss_eval import LossBreakdown
from .motion_engine import DenseMotion, dump_motion
from .synthesis_heads import VertexSet
from .tensor_core import Tensor, check_finite

VERTICES_HEADER = '<4sI'
VERTICES_HEADER_SIZE = struct.calcsize(VERTICES_HEADER)


# ==================== VERTEX FILES ====================

def vertices_to_bytes(vertices: VertexSet) -> bytes:
    coords = np.ascontiguousarray(vertices.coords, dtype='<f4')
    return struct.pack(VERTICES_HEADER, Config.VERTICES_MAGIC, coords.shape[0]) + coords.tobytes()


def vertices_from_bytes(data: bytes) -> VertexSet:
    if len(data) < VERTICES_HEADER_SIZE:
        raise MalformedInputError("Vertex file shorter than its header", actual=len(data))
    magic, count = struct.unpack_from(VERTICES_HEADER, data)
    if magic != Config.VERTICES_MAGIC:
        raise MalformedInputError("Bad vertex file magic", actual=magic)
    if count != Config.NUM_VERTICES:
        raise MalformedInputError("Vertex count must be 10475", actual=count)
    expected = VERTICES_HEADER_SIZE + count * 2 * 4
    if len(data) != expected:
        raise MalformedInputError("Vertex file length mismatch", expected=expected, actual=len(data))
    coords = np.frombuffer(data, dtype='<f4', offset=VERTICES_HEADER_SIZE).reshape(count, 2)
    try:
        check_finite(coords, "Vertex coordinates")
    except CodecError as e:
        raise MalformedInputError(e.message) from e
    return VertexSet(coords)


def write_vertices(vertices: VertexSet, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(vertices_to_bytes(vertices))
    return path


def read_vertices(path: Union[str, Path]) -> VertexSet:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise MalformedInputError(f"Cannot read vertex file {path}", reason=str(e)) from e
    return vertices_from_bytes(data)


def write_vertices_csv(vertices: VertexSet, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(['index', 'x', 'y'])
        for i, (x, y) in enumerate(vertices.coords.tolist()):
            writer.writerow([i, repr(x), repr(y)])
    return path


def loss_report(breakdowns: Sequence[LossBreakdown]) -> Dict[str, Any]:
    """Per-inter-frame breakdowns, numbered from frame 1, and their mean."""
    return {
        'frames': [dict(frame=i, **b.to_dict()) for i, b in enumerate(breakdowns, start=1)],
        'mean': LossBreakdown.mean(breakdowns).to_dict() if breakdowns else None,
    }


# ==================== EXPORTER ====================

@dataclass
class ExportResult:
    """Result of an export operation."""
    success: bool
    output_path: str = ''
    files: List[str] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)
    stats: Dict[str, Any] = field(default_factory=lambda: {
        'files_exported': 0,
        'total_size': 0,
        'export_time_ms': 0,
    })

    def to_dict(self) -> Dict[str, Any]:
        return {
            'success': self.success,
            'output_path': self.output_path,
            'files': list(self.files),
            'errors': list(self.errors),
            'stats': dict(self.stats),
        }


class Exporter:
    """Writes decoded sequences and reports to disk."""

    def __init__(self, frame_format: FrameFormat = FrameFormat.PNG, write_csv: bool = False):
        self.logger = Logger.get_instance()
        self.frame_format = frame_format
        self.write_csv = write_csv

    def _finish(self, result: ExportResult, start: datetime) -> ExportResult:
        result.stats['files_exported'] = len(result.files)
        result.stats['total_size'] = sum(Path(p).stat().st_size for p in result.files
                                         if Path(p).exists())
        result.stats['export_time_ms'] = int((datetime.now() - start).total_seconds() * 1000)
        return result

    def export_sequence(self, frames: Sequence[Tensor],
                        vertices: Sequence[Optional[VertexSet]],
                        frames_dir: Union[str, Path],
                        vertices_dir: Optional[Union[str, Path]] = None) -> ExportResult:
        """
        Frame i goes to frames_dir/frame_{i:05d}.<fmt>; vertices for inter
        frame i go to vertices_dir/vertices_{i:05d}.s2dv.
        """
        start = datetime.now()
        result = ExportResult(success=True, output_path=str(frames_dir))
        try:
            frames_dir = Utils.ensure_directory(frames_dir)
            for i, frame in enumerate(frames):
                path = frames_dir / f"frame_{i:05d}.{self.frame_format.value}"
                result.files.append(str(save_frame(frame, path, self.frame_format)))

            if vertices_dir is not None:
                vertices_dir = Utils.ensure_directory(vertices_dir)
                for i, vertex_set in enumerate(vertices):
                    if vertex_set is None:
                        continue
                    path = vertices_dir / f"vertices_{i:05d}.s2dv"
                    result.files.append(str(write_vertices(vertex_set, path)))
                    if self.write_csv:
                        result.files.append(str(write_vertices_csv(vertex_set, path.with_suffix('.csv'))))
        except (OSError, CodecError) as e:
            result.success = False
            result.errors.append(str(e))
            self.logger.error(f"Export failed: {e}")

        self._finish(result, start)
        self.logger.info("Exported sequence", files=result.stats['files_exported'],
                         path=str(frames_dir))
        return result

    def export_json(self, data: Dict[str, Any], output_path: Union[str, Path]) -> ExportResult:
        start = datetime.now()
        result = ExportResult(success=True, output_path=str(output_path))
        try:
            result.files.append(str(Utils.save_json(output_path, data)))
        except OSError as e:
            result.success = False
            result.errors.append(str(e))
            self.logger.error(f"Export failed: {e}")
        return self._finish(result, start)

    def export_loss_report(self, breakdowns: Sequence[LossBreakdown],
                           output_path: Union[str, Path]) -> ExportResult:
        return self.export_json(loss_report(breakdowns), output_path)

    def export_motion(self, motions: Sequence[DenseMotion],
                      out_dir: Union[str, Path]) -> ExportResult:
        """Raw motion planes for every inter frame, motion_{i:05d}.*."""
        start = datetime.now()
        result = ExportResult(success=True, output_path=str(out_dir))
        try:
            for i, motion in enumerate(motions, start=1):
                result.files += [str(p) for p in dump_motion(motion, out_dir, f"motion_{i:05d}")]
        except OSError as e:
            result.success = False
            result.errors.append(str(e))
            self.logger.error(f"Motion export failed: {e}")
        return self._finish(result, start)
