import pickle

from twistloop.errors import (
    GridPointFailure,
    NotInBigCell,
    RejectionError,
    TruncationResidual,
    TwistLoopError,
)


def test_errors_are_value_errors():
    """Test that every twistloop error is a ValueError."""
    assert issubclass(TwistLoopError, ValueError)
    assert issubclass(NotInBigCell, RejectionError)


def test_pickle_keeps_diagnostics():
    """Test that errors with required diagnostics survive pickling."""
    error = TruncationResidual("dropped 1e-3", residual=1e-3, tol=1e-9)
    restored = pickle.loads(pickle.dumps(error))
    assert type(restored) is TruncationResidual
    assert str(restored) == "dropped 1e-3"
    assert restored.residual == 1e-3
    assert restored.tol == 1e-9


def test_pickle_nested_cause():
    """Test that a grid point failure keeps its point and cause."""
    cause = NotInBigCell("singular Toeplitz system")
    error = GridPointFailure("failed at (1, 2)", point=(1, 2), cause=cause)
    restored = pickle.loads(pickle.dumps(error))
    assert restored.point == (1, 2)
    assert isinstance(restored.cause, NotInBigCell)
    assert restored.cause.report is None
