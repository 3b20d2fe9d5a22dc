"""Topic selection for IR test collections via learning to rank, plus
judging-budget simulation on TREC-style runs and qrels."""

__version__ = "0.1.0"
