"""
Experiment harness: seeded run matrices, aggregation and file output.
"""
