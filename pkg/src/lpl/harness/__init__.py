"""Experiment orchestration, configuration files, output formats and the command line."""
