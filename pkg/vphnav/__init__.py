"""
VPH+ / MPC reactive navigation stack
"""

__version__ = "1.0.0"
