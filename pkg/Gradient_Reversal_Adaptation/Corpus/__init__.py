"""
.. include:: README.md
"""
from Gradient_Reversal_Adaptation.Corpus.Dataset import *
from Gradient_Reversal_Adaptation.Corpus.Batches import *
from Gradient_Reversal_Adaptation.Corpus.Storage import *
from Gradient_Reversal_Adaptation.Corpus.Builder import *
