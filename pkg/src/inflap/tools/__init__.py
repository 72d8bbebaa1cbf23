"""
Experiment runner: config parsing, pipeline execution and report emission.
"""
