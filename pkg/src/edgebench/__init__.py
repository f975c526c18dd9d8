"""Benchmarking harness and SHM data tools for edge devices.

Modules:

- ``sampler``: fixed-cadence system CPU and process-tree RSS sampling
- ``harness``: idle-padded repeated benchmark runs
- ``metrics``: idle-baseline CPU delta, latency and peak memory
- ``tdms``: TDMS reader/writer
- ``shm``: windowed RMS and trailing z-score anomaly detection
- ``spool``: journaled store-and-forward uploads
- ``report``: tables, radar and time-series SVGs
"""

__version__ = "0.1.0"
