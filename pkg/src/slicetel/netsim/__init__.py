from slicetel.netsim.forwarding import ForwardingConfig, Trace, forward
from slicetel.netsim.measure import ResultSet, measure, p90_intervals, truth_values
from slicetel.netsim.replay import ReplayConfig, StaticPolicy, replay
from slicetel.netsim.sim import Prepared, SimConfig, prepare, run, run_scheme, static_thresholds
from slicetel.netsim.traffic import OnOff, PacketStream, gen_traffic

__all__ = [
    "ForwardingConfig",
    "OnOff",
    "PacketStream",
    "Prepared",
    "ReplayConfig",
    "ResultSet",
    "SimConfig",
    "StaticPolicy",
    "Trace",
    "forward",
    "gen_traffic",
    "measure",
    "p90_intervals",
    "prepare",
    "replay",
    "run",
    "run_scheme",
    "static_thresholds",
    "truth_values",
]
