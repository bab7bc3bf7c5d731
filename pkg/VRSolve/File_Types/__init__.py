# Imports all the different file types from the file_reader module.
from .file_reader import LIBSVM_File, Trace_File
