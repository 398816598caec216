"""Experiment configs, scenario runners and the ``ria`` command line."""
