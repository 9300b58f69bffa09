"""SLA-aware closed-loop monitoring of network slices.

Change-triggered in-band telemetry data plane, analytical accuracy/overhead
models, an epoch-driven threshold controller, baselines and an experiment
harness, all running on a deterministic packet-level simulator.
"""

__version__ = "0.1.0"
