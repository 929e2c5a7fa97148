"""Permissioned EHR ledger simulator with anonymous credentials and private data."""

from .chaincode import EHRRecord, PublicRecordView
from .network import Network, NetworkConfig, init_network, query, run_workload, submit_proposal

__version__ = "0.1.0"

__all__ = [
    "EHRRecord", "PublicRecordView", "Network", "NetworkConfig", "init_network",
    "query", "run_workload", "submit_proposal",
]
