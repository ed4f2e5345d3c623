"""Text-guided image colorization toolkit.

Predicts the chroma (A, B) planes of a CIELAB image from its grayscale
channel and a free-text color description, using a text-conditioned
generator trained adversarially against a patch discriminator.  Ships the
color math, text encoding, models, losses, trainer, evaluation metrics,
an inference HTTP service and a CLI.
"""

__version__ = "0.1.0"
