"""Age-gap face verification core operations."""

from agfv._agfv import (  # noqa: F401
    Network,
    accuracy,
    align_face,
    contrastive_loss,
    cosine,
    euclidean,
    generate_synth,
    hellinger,
    l2_normalize,
    l2norm_euclidean,
    roc,
)
