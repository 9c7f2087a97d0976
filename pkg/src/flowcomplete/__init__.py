"""Flowsheet autocompletion toolkit.

Represents chemical process flowsheets as directed graphs and as SFILES 2.0
strings, generates synthetic flowsheet corpora, trains a decoder-only
language model on them, and completes partial flowsheets with beam search
or nucleus sampling.
"""

__version__ = "0.1.0"
