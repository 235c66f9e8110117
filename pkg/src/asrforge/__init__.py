"""asrforge: audio corpus preparation, augmentation, CTC decoding and scoring."""

__version__ = "0.1.0"
