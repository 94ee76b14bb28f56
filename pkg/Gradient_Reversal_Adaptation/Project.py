"""
.. include:: ../assets/Structure/README.md
"""
