"""Local-first title/abstract screening engine.

Subsystems: bibliographic ingestion (ingest), the auditable CSV project store
(store), TF-IDF naive-Bayes active learning (ranker), stopping rules
(stopping), batch LLM screening (llm), the evaluation harness (evaluation),
and the CLI/HTTP surface (cli, service).
"""

__version__ = "0.1.0"
