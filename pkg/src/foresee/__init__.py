"""Foreground/background-separated monocular depth estimation toolkit.

Core pieces: log-space depth bins with soft-weighted-sum decoding (core),
region-weighted classification losses with analytic gradients (losses),
dual-decoder logit fusion (fusion), fg/bg/global evaluation metrics
(metrics), dataset distribution analysis (analysis), pseudo-LiDAR
conversion (pointcloud), KITTI-style file formats (dataio), and a
deterministic synthetic training harness (toytrain). The `foresee` CLI
wires these into directory-batch workflows.
"""

__version__ = "0.1.0"
