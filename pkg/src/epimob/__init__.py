"""Epidemic mobility analytics toolkit.

Subpackages cover the full pipeline: a spatial grid model (`geo`), a
temporal mobility-fact store with derivation rules (`kgraph`), cascading
and co-occurrence pattern mining (`patterns`), spatial autocorrelation of
case counts (`moran`), location/temporal embeddings (`embeddings`), a
recurrent hotspot classifier (`hotspotnet`), closed-form fog/edge cost
models (`fog`), at-home health checks (`health`), dataset ingestion and
synthetic scenario generation (`dataio`), and a command-line front end
(`cli`).
"""

__version__ = "0.1.0"
