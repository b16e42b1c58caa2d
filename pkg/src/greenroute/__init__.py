"""greenroute: synthetic logistics data, model zoo, clustering, and serving."""

__version__ = "0.1.0"
