"""From-scratch Bi-LSTM + CRF sequence labeling toolkit.

Pure numpy implementation of a neural tagger: character and word level
bidirectional LSTMs with optional highway layers feed per-token emission
scores into a linear-chain CRF. Gradients are derived by hand and verified
against finite differences; training, evaluation and tagging are exposed
both as a library and through the ``sekira`` command line tool.
"""

__version__ = "0.1.0"
