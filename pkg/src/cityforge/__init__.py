"""Smart-city stream annotation stack.

One process hosts four cooperating services: a minimal NGSI-style context
broker, an annotation job engine running online ML executors, a tag/annotation
knowledge warehouse, and a historical series store with correlation analytics.
A synthetic city simulator generates Santander-like sensor streams to drive
the whole pipeline at desk scale.
"""

__version__ = "0.1.0"
