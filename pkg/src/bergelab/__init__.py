"""bergelab: weak and Berge Hamiltonicity laboratory for r-uniform hypergraphs."""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    BergePath,
    Hypergraph,
    ParameterError,
    complete_hypergraph,
    gen_random_hypergraph,
    validate_walk,
)
