"""
.. include:: README.md
"""
from Gradient_Reversal_Adaptation.Experiments.Tables import *
from Gradient_Reversal_Adaptation.Experiments.LogSetup import *
from Gradient_Reversal_Adaptation.Experiments.RunDirectory import *
from Gradient_Reversal_Adaptation.Experiments.Metrics import *
from Gradient_Reversal_Adaptation.Experiments.Harness import *
