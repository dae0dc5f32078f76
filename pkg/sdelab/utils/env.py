import logging
import os

import joblib

logger = logging.getLogger(__name__)

_THREADS = 1


def init_threads(opt):
    """Resolve the ``--threads`` budget and pin BLAS pools to one thread each."""
    threads = getattr(opt, 'threads', 1) if not isinstance(opt, int) else opt
    if threads is None:
        threads = 1
    if threads == 0 or threads < -1:
        raise ValueError('Invalid thread count: {}'.format(threads))
    if threads == -1:
        threads = joblib.cpu_count()

    _init_blas_env()
    set_threads(threads)
    logger.info('thread budget: {}'.format(threads))
    return threads


def _init_blas_env():
    # worker threads share one process; nested BLAS pools only oversubscribe
    for key in ('OMP_NUM_THREADS', 'OPENBLAS_NUM_THREADS', 'MKL_NUM_THREADS'):
        os.environ.setdefault(key, '1')


def set_threads(threads):
    global _THREADS
    _THREADS = max(1, int(threads))


def get_threads():
    return _THREADS


def parallel_map(func, items, threads=None):
    """Apply ``func`` to every item on the joblib thread backend, keeping input order."""
    items = list(items)
    n_jobs = get_threads() if threads is None else max(1, int(threads))
    if n_jobs == 1 or len(items) <= 1:
        return [func(item) for item in items]
    return joblib.Parallel(n_jobs=n_jobs, prefer='threads')(
        joblib.delayed(func)(item) for item in items)
