"""Predict which members of an online community stop interacting.

Modules: ``graph`` (node measures), ``ingest`` (events, snapshots, labels),
``features`` (feature matrices), ``stm`` (threshold models), ``classifier``
(logistic regression, linear SVM, random forest), ``evaluation`` (horizon,
cross-dataset and k-fold experiments), ``synth`` (planted-rule corpora) and
``cli``.
"""

__version__ = "0.1.0"
