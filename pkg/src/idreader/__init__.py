"""Identity-document photo pipeline.

Synthetic dataset generation, document localization, classification with a
small convolutional network, text-field extraction with a glyph-template
recognizer, and end-to-end evaluation.
"""

__version__ = "0.1.0"
