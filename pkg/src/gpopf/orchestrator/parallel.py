from __future__ import annotations

import logging
from typing import Any, Callable, Iterable, Sequence, TypeVar

from joblib import Parallel, delayed

logger = logging.getLogger(__name__)

T = TypeVar("T")


def ordered_map(fn: Callable[..., T], arg_tuples: Iterable[Sequence[Any]], jobs: int = 1) -> list[T]:
    """fn(*args) for every tuple, results in input order.

    jobs == 1 runs in-process; otherwise joblib's process pool, so `fn` must be a module-level function.
    """
    items = list(arg_tuples)
    if jobs == 1 or len(items) < 2:
        return [fn(*args) for args in items]
    logger.debug("dispatching %d tasks of %s to %s workers", len(items), fn.__name__, jobs)
    return list(Parallel(n_jobs=jobs)(delayed(fn)(*args) for args in items))
