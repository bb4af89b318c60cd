"""Hybrid analog/digital precoding for multiuser MIMO downlink.

Analog precoders are built from the channel's left singular subspace (or the
covariance eigenspace) and the baseband stage runs a reduced K x K WMMSE.
"""

__version__ = "0.1.0"
