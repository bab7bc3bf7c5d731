# Imports the oracle abstraction and its companions from the Oracle module.
from .Oracle import Oracle, ProblemConstants, RandomStreams, ScriptedStream, HELD_OUT_SAMPLES
