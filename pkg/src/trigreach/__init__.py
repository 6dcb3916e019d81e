"""Backdoor trigger reachability for car-following systems with Koopman surrogates."""

__version__ = "0.1.0"
