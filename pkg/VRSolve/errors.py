'''
This module contains the exceptions raised across VRSolve.
All of them derive from VRSolveError so that callers (mainly the cli) can catch the whole family,
while the ValueError/ArithmeticError parents keep them catchable in the usual way.
'''


class VRSolveError(Exception):
    pass


class InvalidArgumentError(VRSolveError, ValueError):
    pass


class ContractViolationError(VRSolveError, ValueError):
    # Raised when a vector with the wrong shape or a bad SampleId reaches an oracle.
    pass


class UnsupportedOperationError(VRSolveError, NotImplementedError):
    # Raised when an exact finite-sum quantity is requested from an expectation-form problem.
    pass


class MissingConstantError(VRSolveError, ValueError):
    def __init__(self, name, purpose=''):
        '''
        Arguments:
        - name: str
            The ProblemConstants field (or derived input) that is missing.
        - purpose: str (optional)
            What the constant was needed for, appended to the message.
        '''
        self.name = name
        message = f'Constant {name} is required but was not provided.'
        if purpose: message = f'Constant {name} is required for {purpose} but was not provided.'
        super().__init__(message)


class DivergenceError(VRSolveError, ArithmeticError):
    def __init__(self, message, trace=None, stage=None):
        '''
        Arguments:
        - message: str
        - trace: RunTrace (optional)
            The trace recorded up to (and excluding) the non-finite iterate.
        - stage: int (optional)
            The outer stage s in which the divergence happened.
        '''
        self.trace = trace
        self.stage = stage
        super().__init__(message)

    def annotate_stage(self, stage, trace=None):
        # Used by the outer loops to attach s and the concatenated trace prefix.
        self.stage = stage
        if trace is not None: self.trace = trace
        self.args = (f'{self.args[0]} (outer stage s={stage})',)
        return self


class ScheduleInvalidError(VRSolveError, ValueError):
    pass


class ResourceError(VRSolveError, RuntimeError):
    pass


class NonConvergenceError(VRSolveError, RuntimeError):
    pass


class DataError(VRSolveError, ValueError):
    pass


class LIBSVMParseError(DataError):
    def __init__(self, line_number, line, reason):
        self.line_number = line_number
        super().__init__(f'Malformed LIBSVM line {line_number}: {reason} ({line.strip()!r})')


class ConfigError(VRSolveError, ValueError):
    pass
