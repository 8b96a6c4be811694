"""
Sparse2Dense - Analytics Package
Rate-distortion accounting and charts.
"""

from .rate_distortion import (
    RDReport, analyze_container, bd_rate, bitrate_kbps, psnr_sanity, sequence_psnr,
)
from .charts import ChartGenerator

__all__ = ['RDReport', 'analyze_container', 'bd_rate', 'bitrate_kbps', 'psnr_sanity',
           'sequence_psnr', 'ChartGenerator']
