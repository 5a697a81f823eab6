# Logging, metrics and output helpers for the ion Grover search tools
