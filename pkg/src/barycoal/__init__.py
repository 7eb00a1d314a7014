"""Continual learning of generative models via Wasserstein-1 barycenter coalescence."""

__version__ = "0.1.0"
