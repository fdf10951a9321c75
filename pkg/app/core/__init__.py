"""
Tensor Core
Dense float64 tensors, the op set, the tape and the cost counters
"""
