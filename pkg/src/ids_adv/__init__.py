"""Train a dense binary intrusion detector, attack it with four white-box
evasion algorithms, harden it with adversarial training, and report the
before-attack / after-attack / after-defence evaluation."""

__version__ = "0.1.0"
