"""
.. include:: README.md
"""
from Gradient_Reversal_Adaptation.Visualizations.Visualize import *
from Gradient_Reversal_Adaptation.Visualizations.VisualizeResults import *
