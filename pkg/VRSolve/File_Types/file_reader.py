'''
This module contains the readers for the file types VRSolve consumes:
LIBSVM sparse text files (logistic regression data) and the trace CSV files written by the cli.
'''

import csv
import numpy as np
import scipy.sparse
from sklearn.datasets import load_svmlight_file

from ..Trace import RunTrace
from ..Trace.Trace import TRACE_COLUMNS, INTEGER_COLUMNS
from ..errors import DataError, LIBSVMParseError


class LIBSVM_File:
    '''
    Description:
    This class is used to read a LIBSVM file, one sample per line: `label idx:val idx:val ...`
    with 1-based feature indices. Labels are mapped to {-1, +1}.
    '''
    def __init__(self, *file_name, n_features=None):
        '''
        Arguments:
        - *file_name: str (optional)
            The path of the file to be read.
        - n_features: int (optional)
            Force the feature dimension (otherwise the largest index seen).

        Methodology:
        - self.data_type is set to 'LIBSVM_File'.
        - The rows are parsed into a CSR matrix self.X and a label vector self.y.
        '''
        self.data_type = 'LIBSVM_File'
        self.file_name = ''
        self.n_features = n_features
        self.X = scipy.sparse.csr_matrix((0, n_features or 0))
        self.y = np.array([])
        self.raw_labels = np.array([])
        if file_name: self.extract_data(file_name[0])

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def extract_data(self, file_name):
        '''
        Description:
        INTERNAL FUNCTION CALLED DURING INITIALIZATION.

        Arguments:
        - file_name: str
            The path of the LIBSVM file to be read.

        Methodology:
        - The file is parsed by sklearn's load_svmlight_file with 1-based indices; blank lines and
          anything after a '#' are ignored.
        - When sklearn rejects the file, the lines are rescanned to find the first malformed one
          and LIBSVMParseError names it.
        - An empty file, a feature beyond n_features or a label set that is not binary raises DataError.
        '''
        self.file_name = file_name
        try:
            X, labels = load_svmlight_file(file_name, zero_based=False, dtype=np.float64)
        except ValueError as error:
            line_number, line, reason = locate_malformed_line(file_name)
            if line_number is not None: raise LIBSVMParseError(line_number, line, reason) from None
            raise DataError(f'LIBSVM file {file_name} could not be read: {error}') from None

        if X.shape[0] == 0: raise DataError(f'LIBSVM file {file_name} contains no samples.')
        n_features = self.n_features or X.shape[1]
        if X.shape[1] > n_features:
            raise DataError(f'LIBSVM file {file_name} uses feature {X.shape[1]} but n_features={n_features}.')

        self.X = scipy.sparse.csr_matrix((X.data, X.indices, X.indptr), shape=(X.shape[0], n_features))
        self.raw_labels = np.asarray(labels, dtype=np.float64)
        self.y = binary_labels(self.raw_labels, file_name)


def locate_malformed_line(file_name):
    '''
    Returns:
    - (line_number, line, reason)
        The first line a LIBSVM reader must reject, 1-based, or (None, '', '') if every line is valid.
    '''
    with open(file_name) as file:
        for line_number, line in enumerate(file, start=1):
            tokens = line.split('#', 1)[0].split()
            if not tokens: continue
            try:
                float(tokens[0])
            except ValueError:
                return line_number, line, f'label {tokens[0]!r} is not a number'
            previous_index = 0
            for token in tokens[1:]:
                index, separator, value = token.partition(':')
                try:
                    if not separator: raise ValueError
                    index = int(index)
                    float(value)
                except ValueError:
                    return line_number, line, f'token {token!r} is not idx:val'
                if index < 1: return line_number, line, f'feature index {index} is not 1-based'
                if index <= previous_index: return line_number, line, 'feature indices are not increasing'
                previous_index = index
    return None, '', ''


def binary_labels(raw_labels, source=''):
    # {-1, +1} and {0, 1} keep their obvious meaning; any other pair maps smaller -> -1, larger -> +1.
    distinct = np.unique(raw_labels)
    if len(distinct) > 2:
        raise DataError(f'Labels in {source} are not binary: found {distinct.tolist()}.')
    if set(distinct) <= {-1.0, 1.0}: return raw_labels.astype(np.float64)
    if set(distinct) <= {0.0, 1.0}: return np.where(raw_labels > 0, 1.0, -1.0)
    if len(distinct) == 1:
        raise DataError(f'Single label {distinct[0]} in {source} cannot be mapped to -1/+1.')
    return np.where(raw_labels == distinct[1], 1.0, -1.0)


class Trace_File(RunTrace):
    '''
    Description:
    This class is used to read a trace CSV written by RunTrace.to_csv back into a RunTrace,
    so that checks can be re-evaluated from persisted runs.

    Parent Class:
    RunTrace
    '''
    def __init__(self, *file_name):
        '''
        Arguments:
        - *file_name: str (optional)
            The path of the CSV file to be read.
        '''
        RunTrace.__init__(self)
        self.data_type = 'Trace_File'
        self.run_id = None
        self.seed = None
        self.wall_time = None
        if file_name: self.extract_data(file_name[0])
        self.set_commonly_accessed_attributes()

    def extract_data(self, file_name):
        # Empty fields were NaN when written. The run_id, seed and solver columns are constant per file.
        with open(file_name, newline='') as file:
            reader = csv.DictReader(file)
            rows = list(reader)
        for data_name in TRACE_COLUMNS:
            if data_name in INTEGER_COLUMNS:
                self.data[data_name] = np.array([int(row[data_name]) for row in rows], dtype=np.int64)
            else:
                self.data[data_name] = np.array([float(row[data_name]) if row[data_name] else np.nan for row in rows])
        if rows:
            self.run_id = int(rows[0]['run_id'])
            self.seed = int(rows[0]['seed'])
            self.solver = rows[0]['solver']
            self.total_count = int(self.data['grad_evals'][-1])
            if 'wall_time' in rows[0]: self.wall_time = float(rows[0]['wall_time'])
