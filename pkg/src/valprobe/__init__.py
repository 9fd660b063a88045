"""Remote identification of DNSSEC-validating resolvers.

Deliberately misconfigured signed zones are served by an authoritative
observatory that logs every query; resolvers are probed through them and
labeled by response code, and the log's query pattern feeds a small
decision tree that then classifies resolvers nobody can query directly.
"""

__version__ = "0.1.0"
