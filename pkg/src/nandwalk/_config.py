import os

DEFAULT_DENSE_CAP = 4096
DEFAULT_DIM_CAP = 2**16
CLASSICAL_DEPTH_CAP = 20


def dense_cap():
    """Dimension cap for dense reference computations.

    Overridable through the ``NANDWALK_DENSE_CAP`` environment variable.
    """
    raw = os.environ.get("NANDWALK_DENSE_CAP")
    if raw is None or raw.strip() == "":
        return DEFAULT_DENSE_CAP
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"NANDWALK_DENSE_CAP must be an integer, got {raw!r}") from exc
    if value <= 0:
        raise ValueError("NANDWALK_DENSE_CAP must be positive")
    return value
