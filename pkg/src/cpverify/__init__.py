"""Control-plane verification over multilayer hedge graphs."""

from .errors import VerifyError
from .graph import build_base_graph, build_traffic_class_graph
from .model import NetworkSpec, load_spec, load_spec_file, validate_spec
from .taint import propagate_taints
from .verdict import Verdict

__version__ = "0.1.0"

__all__ = [
    "NetworkSpec",
    "Verdict",
    "VerifyError",
    "build_base_graph",
    "build_traffic_class_graph",
    "load_spec",
    "load_spec_file",
    "propagate_taints",
    "validate_spec",
]
