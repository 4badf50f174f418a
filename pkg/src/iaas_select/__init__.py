"""Long-term IaaS provider selection from short trials and past trial users."""

__version__ = "0.1.0"
