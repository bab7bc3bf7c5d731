# Imports the trace objects from the Trace module.
from .Trace import Trace, RunTrace, TRACE_COLUMNS
