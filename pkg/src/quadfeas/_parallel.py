"""Order-preserving map over independent work units."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def _star(args):
    fn, a = args
    return fn(*a)


def ordered_map(fn, arg_tuples, jobs: int = 1) -> list:
    """``[fn(*a) for a in arg_tuples]``, optionally across `jobs` processes.

    Results come back in input order regardless of completion order.
    """
    arg_tuples = list(arg_tuples)
    if jobs <= 1 or len(arg_tuples) <= 1:
        return [fn(*a) for a in arg_tuples]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_star, [(fn, a) for a in arg_tuples], chunksize=max(1, len(arg_tuples) // (4 * jobs))))
