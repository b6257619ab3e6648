"""Simulated LiDAR-guided interrogation of retroreflective leaf sensors.

Modules, in pipeline order: ``scene`` (synthetic LiDAR frames), ``isolate``
(intensity gate + DBSCAN), ``steer`` (mirror pointing), ``focus`` (liquid-lens
power), ``spectral`` (filter-wheel readings and peak fit) and ``pipeline``.
"""

__version__ = "0.1.0"
