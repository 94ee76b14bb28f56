"""
.. include:: ../README.md
"""
from Gradient_Reversal_Adaptation.Models import *
from Gradient_Reversal_Adaptation.Speech import *
from Gradient_Reversal_Adaptation.Corpus import *

from Gradient_Reversal_Adaptation.Configurations import *
from Gradient_Reversal_Adaptation.Visualizations import *
from Gradient_Reversal_Adaptation.Experiments import *
from Gradient_Reversal_Adaptation.Project import *

import Gradient_Reversal_Adaptation.Models.Exceptions as Exceptions
