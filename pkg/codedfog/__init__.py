"""
codedfog - coding schemes for distributed fog/edge computing
Minimum Bandwidth Codes, Minimum Latency Codes and the unified latency-load tradeoff
"""

__version__ = "1.0.0"
