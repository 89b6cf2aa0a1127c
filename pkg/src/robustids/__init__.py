"""robustids: an intrusion-detection pipeline hardened against adversarial flows."""

__version__ = "0.1.0"
