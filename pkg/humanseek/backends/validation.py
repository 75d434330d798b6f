from loguru import logger

__all__ = ["validate_dtype"]


def validate_dtype(obj, dtypes) -> None:
    """Raise TypeError (after logging) unless `obj` is an instance of `dtypes` (a type or a tuple of types)."""
    if isinstance(obj, dtypes):
        return
    logger.exception(f"Cannot serialise {type(obj).__name__}: expected {dtypes}")
    raise TypeError(f"Expected {dtypes}, got {type(obj).__name__}")
