"""
contracts.py

Contract checks shared by every module. A violated precondition is a
caller bug, so it raises instead of being silently corrected.
"""


class ContractViolationError(ValueError):
    """Raised when an operation is called outside its preconditions"""


def require(condition: bool, message: str):
    """
    Raise a ContractViolationError with `message` when `condition` is false

    Example:

    ```python
    >>> require(len(values) == 4, f"expected 4 values, got {len(values)}")
    ```
    """
    if not condition:
        raise ContractViolationError(message)
