"""Learning from label proportions: bag-level losses, learners and experiments."""

__version__ = "0.1.0"
