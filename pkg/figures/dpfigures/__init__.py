"""Rendering scripts for the mean-estimation benchmark CSV outputs.

This package consumes only the documented CSV contracts (sweep reports
and histogram tables, including their header comments) and never
recomputes statistics; the numbers on a figure are exactly the numbers
in the file.
"""

__version__ = "0.1.0"
