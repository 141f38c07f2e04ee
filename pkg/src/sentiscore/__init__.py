"""Sentiment-intensity regression for Chinese review text.

Cleaning, dictionary segmentation, a NumPy BiLSTM regressor with exact
gradients, Gaussian-process hyperparameter search, a naive-Bayes lexicon
baseline and the regression metrics used to compare them.
"""

__version__ = "0.1.0"
