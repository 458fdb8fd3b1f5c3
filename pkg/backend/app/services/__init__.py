"""
Services Package Initialization

Kernels, cell means, the S-K engine, segmentation, I_tb, benchmark,
pipeline and file I/O.
"""
