"""
horizon-eval: temporally local evaluation of multi-object tracking.

Computes DetF1, IDF1, ATA, LIDF1(r), ALTA(r), a reference MOTA and the
four-way (FN / FP / split / merge) decomposition of tracking error.
"""

__version__ = "0.3.0"
