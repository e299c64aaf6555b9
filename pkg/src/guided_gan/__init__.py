"""
Guided GAN

Recurrent bidirectional GANs for unsupervised representation learning on
multichannel sequences (wearable sensor windows, row-wise MNIST), with the
baselines and the frozen-feature evaluation battery used to compare them.
"""

__version__ = "0.1.0"
