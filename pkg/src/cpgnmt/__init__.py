"""Multilingual neural machine translation with contextual parameter generation.

Language embeddings drive a generator that emits the encoder and decoder
weights of a shared attention-based recurrent translation model.
"""

__version__ = "0.1.0"
