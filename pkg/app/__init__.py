"""
Varying Window Attention Lab
Windowed attention with enlarged context, a MAC/memory cost model, autodiff and the VWFormer decoder
"""

__version__ = "1.0.0"
