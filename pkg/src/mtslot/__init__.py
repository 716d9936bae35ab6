"""Multi-task bi-LSTM slot tagger with open-vocabulary character embeddings."""

__version__ = "0.1.0"
