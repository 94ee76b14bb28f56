"""
.. include:: README.md
"""
from Gradient_Reversal_Adaptation.Speech.Channels import *
from Gradient_Reversal_Adaptation.Speech.Features import *
from Gradient_Reversal_Adaptation.Speech.Generator import *
