"""simquery: intent classification as query similarity search.

Labeled queries are embedded, indexed under a class-balanced sampling
scheme, and new queries are classified by majority vote over their top-k
nearest neighbors in embedding space. A frozen-embedding logistic
regression head is included as the comparison baseline, plus an
experiment runner that makes every run reproducible from its manifest.
"""

__version__ = "0.1.0"

from .errors import DataError, FormatError

__all__ = ["DataError", "FormatError", "__version__"]
