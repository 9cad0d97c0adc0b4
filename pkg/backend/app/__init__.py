"""
Backend package for combinatorial intersection cohomology of fans.
"""
