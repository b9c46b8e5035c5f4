"""Node-augmentation defense against link stealing on graph neural networks."""
__version__ = "0.1.0"
