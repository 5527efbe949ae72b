"""Bias correction of the working sub-model: instruments and partially linear fits."""
