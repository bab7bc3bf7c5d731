import os
import tempfile
import numpy as np
import pytest

from ..File_Types import LIBSVM_File
from ..File_Types.file_reader import binary_labels
from ..errors import DataError, LIBSVMParseError


def read_text(content, **options):
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, 'data.libsvm')
        with open(path, 'w') as file: file.write(content)
        return LIBSVM_File(path, **options)


def test_reading_LIBSVM_Files():
    # This test ensures that LIBSVM_File builds the sparse matrix and labels correctly.
    data_file = read_text('# header comment\n+1 1:0.5 3:2\n\n-1 2:1.5  # trailing comment\n1 1:1 2:1 3:1\n')

    assert (data_file.n, data_file.d) == (3, 3), f'Shape should be (3, 3) but is {(data_file.n, data_file.d)}.'
    expected = np.array([[0.5, 0.0, 2.0], [0.0, 1.5, 0.0], [1.0, 1.0, 1.0]])
    assert np.array_equal(data_file.X.toarray(), expected), f'Features are {data_file.X.toarray()}.'
    assert np.array_equal(data_file.y, [1.0, -1.0, 1.0]), f'Labels are {data_file.y}.'


def test_n_features_pads_the_matrix():
    data_file = read_text('1 1:1\n-1 2:1\n', n_features=5)
    assert data_file.d == 5, f'n_features=5 should give 5 columns, got {data_file.d}.'

    with pytest.raises(DataError):
        read_text('1 1:1\n-1 4:1\n', n_features=2)


def test_malformed_lines_name_the_line():
    # Test 1: a token without a colon.
    with pytest.raises(LIBSVMParseError) as error:
        read_text('1 1:1\n-1 2:1\n1 3\n')
    assert error.value.line_number == 3, f'The bad line is 3, reported {error.value.line_number}.'
    assert 'line 3' in str(error.value), f'The message should name the line: {error.value}.'

    # Test 2: the remaining failure modes.
    for content in ('abc 1:1\n', '1 0:1\n', '1 2:1 1:1\n', '1 1:x\n'):
        with pytest.raises(LIBSVMParseError):
            read_text(content)


def test_empty_file_is_a_data_error():
    with pytest.raises(DataError):
        read_text('# nothing here\n\n')


def test_binary_labels():
    # Test 1: {0, 1} maps 0 to -1.
    assert np.array_equal(binary_labels(np.array([0.0, 1.0, 0.0])), [-1.0, 1.0, -1.0]), '{0, 1} labels were not mapped.'

    # Test 2: any other pair maps the smaller label to -1.
    assert np.array_equal(binary_labels(np.array([2.0, 4.0])), [-1.0, 1.0]), '{2, 4} labels were not mapped.'

    # Test 3: more than two labels, or a single unusual label, cannot be mapped.
    for labels in ([1.0, 2.0, 3.0], [5.0, 5.0]):
        with pytest.raises(DataError):
            binary_labels(np.array(labels))


def test_rejected_file_reports_the_first_bad_line():
    # Test 1: comments and blank lines still count towards the line number.
    with pytest.raises(LIBSVMParseError) as error:
        read_text('# header\n1 1:1\n\n-1 1:1 1:2\n1 2:x\n')
    assert error.value.line_number == 4, f'The repeated index is on line 4, reported {error.value.line_number}.'

    # Test 2: a parse error is a DataError, so loaders can catch both together.
    with pytest.raises(DataError):
        read_text('1 1:1\n-1 -3:1\n')
