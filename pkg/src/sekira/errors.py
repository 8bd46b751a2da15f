"""Exception types shared across the toolkit."""


class DataError(Exception):
    """Malformed input data: corpora, embedding files, checkpoints."""


class CorpusError(DataError):
    """Column-format corpus could not be parsed."""


class EmbeddingError(DataError):
    """Pretrained word-vector file could not be parsed."""


class CheckpointError(DataError):
    """Checkpoint file is corrupt, truncated or incompatible."""
