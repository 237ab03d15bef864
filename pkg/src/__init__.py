# Near-field/far-field effective capacity engine
__version__ = "0.1.0"
