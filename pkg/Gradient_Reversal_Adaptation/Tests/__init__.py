"""
.. include:: README.md
"""
from Gradient_Reversal_Adaptation.Tests.Test_Types import *
from Gradient_Reversal_Adaptation.Tests.Test_Layers import *
from Gradient_Reversal_Adaptation.Tests.Test_Network import *
from Gradient_Reversal_Adaptation.Tests.Test_Optimizers import *
from Gradient_Reversal_Adaptation.Tests.Test_Adaptation import *
from Gradient_Reversal_Adaptation.Tests.Test_Checkpoint import *
from Gradient_Reversal_Adaptation.Tests.Test_Speech import *
from Gradient_Reversal_Adaptation.Tests.Test_Corpus import *
from Gradient_Reversal_Adaptation.Tests.Test_Configurations import *
from Gradient_Reversal_Adaptation.Tests.Test_Tables import *
from Gradient_Reversal_Adaptation.Tests.Test_Experiments import *
from Gradient_Reversal_Adaptation.Tests.Test_Cli import *
from Gradient_Reversal_Adaptation.Tests.Test_Visualize import *
from Gradient_Reversal_Adaptation.Tests.Test_Acceptance import *
