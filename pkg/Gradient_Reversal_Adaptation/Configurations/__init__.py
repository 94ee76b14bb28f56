"""
.. include:: README.md
"""
from Gradient_Reversal_Adaptation.Configurations.LoadConfig import *
from Gradient_Reversal_Adaptation.Configurations.StoreConfig import *
from Gradient_Reversal_Adaptation.Configurations.ConfigExceptions import *
