"""
meterguard: adversarial attacks on smart-meter energy-theft detectors.

Trains feed-forward, convolutional and recurrent theft classifiers on daily
48-reading load profiles, attacks them with white-box and black-box
adversarial measurement generators, and reports detection recall against
billed-energy cost.
"""

__version__ = "0.1.0"
