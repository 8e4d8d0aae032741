"""Training and evaluation machinery for e-commerce product mapping."""

__version__ = "0.1.0"

from . import backends, dataset, judges, optim, parsing, pipelines, retrieval, reward  # noqa: E402,F401
