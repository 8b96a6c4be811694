"""
Sparse2Dense - Charts Module
PNG charts of RD curves and per-frame keypoint bits.
"""

from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..modules.logger import Logger
from .rate_distortion import RDReport

RDPoint = Tuple[float, float]


class ChartGenerator:
    """
    Draws charts with matplotlib's Agg backend.
    When matplotlib is missing every plot returns None with a warning.
    """

    PALETTE_DEFAULT = [
        '#667eea', '#764ba2', '#f59e0b', '#10b981', '#ef4444',
        '#3b82f6', '#8b5cf6', '#ec4899', '#06b6d4', '#84cc16',
    ]

    def __init__(self, palette: Optional[List[str]] = None, dpi: int = 120):
        self.logger = Logger.get_instance()
        self.palette = palette or self.PALETTE_DEFAULT
        self.dpi = dpi
        self._matplotlib_available = self._check_matplotlib()

    def _check_matplotlib(self) -> bool:
        try:
            import matplotlib
            matplotlib.use('Agg')
            return True
        except ImportError:
            return False

    @property
    def available(self) -> bool:
        return self._matplotlib_available

    def _pyplot(self):
        if not self._matplotlib_available:
            self.logger.warning("matplotlib is not installed; skipping chart")
            return None
        import matplotlib.pyplot as plt
        return plt

    def _save(self, plt, fig, output_path: Union[str, Path]) -> Path:
        output_path = Path(output_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        fig.tight_layout()
        fig.savefig(output_path, dpi=self.dpi, format='png')
        plt.close(fig)
        self.logger.debug("Chart written", path=str(output_path))
        return output_path

    def plot_rd_curves(self, curves: Dict[str, Sequence[RDPoint]],
                       output_path: Union[str, Path],
                       quality_label: str = 'PSNR (dB)',
                       title: str = 'Rate-distortion') -> Optional[Path]:
        """One line per named curve of (kbps, quality) points."""
        plt = self._pyplot()
        if plt is None:
            return None
        fig, ax = plt.subplots(figsize=(6, 4))
        for i, (name, points) in enumerate(curves.items()):
            ordered = sorted(points)
            ax.plot([p[0] for p in ordered], [p[1] for p in ordered], marker='o',
                    label=name, color=self.palette[i % len(self.palette)])
        ax.set_xlabel('Bitrate (kbps)')
        ax.set_ylabel(quality_label)
        ax.set_title(title)
        ax.grid(True, alpha=0.3)
        if curves:
            ax.legend()
        return self._save(plt, fig, output_path)

    def plot_frame_bits(self, report: RDReport, output_path: Union[str, Path],
                        title: str = 'Keypoint bits per frame') -> Optional[Path]:
        plt = self._pyplot()
        if plt is None:
            return None
        fig, ax = plt.subplots(figsize=(7, 3))
        frames = list(range(report.frames))
        ax.bar(frames, report.keypoint_bits, color=self.palette[0], width=1.0)
        ax.set_xlabel('Frame')
        ax.set_ylabel('Bits')
        ax.set_title(title)
        return self._save(plt, fig, output_path)
