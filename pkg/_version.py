__title__ = "ion_grover_search"
__version__ = "0.1.0"
