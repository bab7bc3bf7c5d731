import csv
import numpy as np

# Columns every RunTrace carries, in CSV order, and the short attribute aliases they are exposed as.
TRACE_COLUMNS   = ['stage', 't', 'grad_evals', 'v_norm_sq', 'grad_norm_sq', 'F']
TRACE_ALIASES   = ['s',     't', 'evals',      'v',         'g',            'F']
INTEGER_COLUMNS = ('stage', 't', 'grad_evals')


class Trace:
    def __init__(self):
        # This is the generic column object.
        # self.data maps a data_name to a numpy array, every array has the same length.
        self.data = {}
        self.data_names = []
        self.data_type = 'Trace'
        self.counter_data_name = '' # If the data contains a cumulative counter, set this to its data_name.
        self.total_count = 0


    def __add__(self, other):
        # This function is used to combine two Trace objects of the same type with the same data_names.
        # Rows of other are appended after the rows of self.
        if self.data_names != other.data_names:
            raise ValueError(
                f'Cannot combine traces with different data_names: {self.data_names} and {other.data_names}.'
            )
        combined = type(self)()
        combined.data_names = list(self.data_names)

        # A cumulative counter in other restarts from zero, so it is shifted by everything
        # self has already consumed.
        for data_name in combined.data_names:
            other_values = other.data[data_name]
            if data_name == self.counter_data_name: other_values = other_values + self.total_count
            combined.data[data_name] = np.concatenate((self.data[data_name], other_values))
        combined.total_count = self.total_count + other.total_count

        combined.set_commonly_accessed_attributes()
        return combined


    def __len__(self):
        if not self.data_names: return 0
        return len(self.data[self.data_names[0]])


    def set_attributes(self, data_names, attribute_aliases):
        # Exposes each present column under its short alias (trace.v for 'v_norm_sq').
        for data_name, attribute_alias in zip(data_names, attribute_aliases):
            if data_name in self.data_names: setattr(self, attribute_alias, self.data[data_name])


    def set_commonly_accessed_attributes(self):
        # Each child class has its own commonly accessed attributes and overwrites this.
        self.set_attributes([], [])


    def column(self, name):
        # A column by data_name or by alias, e.g. 'stage' or 's'.
        if name in self.data_names: return self.data[name]
        values = getattr(self, name, None)
        if values is None:
            raise ValueError(f'{name} is neither a column nor a column alias of the {self.data_type} object.')
        if not isinstance(values, np.ndarray):
            raise ValueError(f'{name} attribute is not a column of rows.')
        return values


    def in_data_range(self, data_name, start, end):
        '''
        Returns:
        - Trace of the same type
            The rows whose `data_name` column lies in [start, end], e.g. one stage with ('s', s, s)
            or an iteration window with ('t', 0, 9). The cumulative evaluation counter is kept
            unchanged, so selected rows still report work from the start of the run.
        '''
        mask = (self.column(data_name) >= start) & (self.column(data_name) <= end)
        selected = type(self)()
        selected.data_names = list(self.data_names)
        for name in self.data_names: selected.data[name] = self.data[name][mask]
        selected.total_count = self.total_count
        selected.set_commonly_accessed_attributes()
        return selected


class RunTrace(Trace):
    '''
    Description:
    The record of one solver run. Every recorded inner step is a row
    (stage s, iteration t, cumulative gradient evaluations, ||v_t||^2, ||grad F(w_t)||^2, F(w_t)).
    Quantities that were not computed are stored as NaN.
    Alongside the rows the trace keeps the selected indices t_tilde (one per stage), the output
    w_tilde, and the outer records (s, ||grad F(w_tilde_s)||^2).

    Parent Class:
    Trace
    '''
    def __init__(self, solver=''):
        '''
        Arguments:
        - solver: str (optional)
            Name of the solver that produced the trace, written into CSV rows.
        '''
        Trace.__init__(self)
        self.data_type = 'RunTrace'
        self.counter_data_name = 'grad_evals'
        self.solver = solver
        self.data_names = list(TRACE_COLUMNS)
        for data_name in self.data_names: self.data[data_name] = np.array([])
        self.t_tilde = []
        self.w_tilde = None
        self.outer_stages = []
        self.outer_grad_norm_sq = []
        self._pending_rows = []
        self.set_commonly_accessed_attributes()

    def set_commonly_accessed_attributes(self):
        self.set_attributes(TRACE_COLUMNS, TRACE_ALIASES)

    @property
    def grad_evals(self):
        # Total stochastic gradient evaluations consumed by the run.
        return self.total_count

    def consume(self, evaluations):
        self.total_count += evaluations

    def record(self, stage, t, v_norm_sq, grad_norm_sq=np.nan, value=np.nan):
        # Rows are buffered in a list while a loop runs and turned into arrays by finalise.
        self._pending_rows.append((stage, t, self.total_count, v_norm_sq, grad_norm_sq, value))

    def record_stage(self, stage, grad_norm_sq):
        self.outer_stages.append(stage)
        self.outer_grad_norm_sq.append(grad_norm_sq)

    def finalise(self):
        if self._pending_rows:
            columns = list(zip(*self._pending_rows))
            for data_name, column in zip(TRACE_COLUMNS, columns):
                dtype = np.int64 if data_name in INTEGER_COLUMNS else np.float64
                self.data[data_name] = np.concatenate((self.data[data_name].astype(dtype), np.array(column, dtype=dtype)))
            self._pending_rows = []
        self.set_commonly_accessed_attributes()
        return self

    def __add__(self, other):
        self.finalise()
        other.finalise()
        combined = Trace.__add__(self, other)
        combined.solver = self.solver or other.solver
        combined.t_tilde = self.t_tilde + other.t_tilde
        combined.w_tilde = other.w_tilde if other.w_tilde is not None else self.w_tilde
        combined.outer_stages = self.outer_stages + other.outer_stages
        combined.outer_grad_norm_sq = self.outer_grad_norm_sq + other.outer_grad_norm_sq
        return combined

    def in_data_range(self, data_name, start, end):
        self.finalise()
        new_data = Trace.in_data_range(self, data_name, start, end)
        new_data.solver = self.solver
        return new_data

    def stage(self, s):
        '''
        Arguments:
        - s: int
            The outer stage to be extracted.

        Returns:
        - RunTrace
            The rows recorded during stage s.
        '''
        return self.in_data_range('s', s, s)

    def rows(self, every=1):
        '''
        Arguments:
        - every: int (optional)
            Keep every `every`-th row plus the first and last.

        Returns:
        - list of tuples
            The trace rows in TRACE_COLUMNS order.
        '''
        self.finalise()
        length = len(self)
        keep = range(length)
        if every > 1 and length: keep = sorted(set(range(0, length, every)) | {length - 1})
        return [tuple(self.data[name][i] for name in TRACE_COLUMNS) for i in keep]

    def to_csv(self, path, run_id, seed, every=1, wall_time=None):
        '''
        Arguments:
        - path: str
            The CSV file to write.
        - run_id: int
        - seed: int
        - every: int (optional)
            Thinning stride (see rows).
        - wall_time: float (optional)
            Seconds spent in the run. When given a wall_time column is added; leave it out for
            byte-identical re-runs.

        Methodology:
        - Floats are written with 17 significant digits so values round-trip exactly.
        - NaN (not computed) is written as an empty field.
        '''
        header = ['run_id', 'seed', 'solver'] + TRACE_COLUMNS
        if wall_time is not None: header.append('wall_time')
        with open(path, 'w', newline='') as file:
            writer = csv.writer(file, lineterminator='\n')
            writer.writerow(header)
            for row in self.rows(every):
                values = [run_id, seed, self.solver] + [format_value(value) for value in row]
                if wall_time is not None: values.append(format_value(wall_time))
                writer.writerow(values)


def format_value(value):
    if isinstance(value, (int, np.integer)): return str(int(value))
    if np.isnan(value): return ''
    return format(float(value), '.17g')
