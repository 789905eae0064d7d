"""
baafseg: BAAF attention U-shaped segmentation networks on a small numpy autodiff
engine, with training, evaluation and synthetic speckle data.
"""

__version__ = "0.1.0"
