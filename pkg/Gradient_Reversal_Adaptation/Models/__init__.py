"""
.. include:: README.md
"""
from Gradient_Reversal_Adaptation.Models.Types import *
from Gradient_Reversal_Adaptation.Models.Layers import *
from Gradient_Reversal_Adaptation.Models.Network import *
from Gradient_Reversal_Adaptation.Models.Optimizers import *
from Gradient_Reversal_Adaptation.Models.Adaptation import *
from Gradient_Reversal_Adaptation.Models.Checkpoint import *
