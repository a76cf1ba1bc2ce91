"""Feature Vectors: global interpretability for tabular models.

Train random-subspace decision trees, read every root-to-leaf path as a
sentence of split features, count windowed co-occurrences and take the
rank-2 SVD. Each feature becomes a 2-D vector whose length is its
importance and whose direction groups it with interchangeable features.
"""

__version__ = "0.1.0"
