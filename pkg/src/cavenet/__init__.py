"""CAVE-Net: attention-augmented ensemble classification, built from scratch.

The package is organised by pipeline stage:

* :mod:`cavenet.tensor`      float32 autodiff engine (conv, pooling, losses)
* :mod:`cavenet.data`        datasets, augmentation, class rebalancing
* :mod:`cavenet.autoencoder` convolutional encoder/decoder and latents
* :mod:`cavenet.dnn`         fully connected classifier over latents
* :mod:`cavenet.synxrf`      SVM / random forest / KNN / boosted trees + soft vote
* :mod:`cavenet.cbam`        CBAM attention on a residual backbone
* :mod:`cavenet.fusion`      three-member soft-vote fusion (CAVE-Net)
* :mod:`cavenet.metrics`     confusion matrices, per-class metrics, AUC
* :mod:`cavenet.cli`         stage-per-command pipeline driver

Hot numeric kernels live in :mod:`cavenet.kernels` with a numba JIT backend
and a pure-numpy fallback selected by the ``CAVENET_BACKEND`` env flag.
"""

from .kernels import active_backend
from .rng import Rng

__version__ = "0.1.0"

__all__ = ["Rng", "active_backend", "__version__"]
