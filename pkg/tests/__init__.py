# Test suite for the ion Grover search simulator
