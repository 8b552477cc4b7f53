from __future__ import annotations

import logging
import queue
import threading
from concurrent.futures import Future, ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence

from .models import CheckResult


logger = logging.getLogger(__name__)

Task = Callable[[], CheckResult]


class SweepController:
    """Runs checks on a worker pool and reports them in submission order."""

    def __init__(self, on_result: Callable[[CheckResult], None], on_done: Callable[[], None], threads: int = 1):
        self.on_result = on_result
        self.on_done = on_done
        self.threads = max(1, threads)
        self._stop_event = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start_sweep(self, tasks: Sequence[Task]) -> None:
        self.stop()
        self._stop_event.clear()
        self._thread = threading.Thread(target=self._run_sweep, args=(list(tasks),), daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop_event.set()
        if self._thread and self._thread.is_alive():
            self._thread.join(timeout=0.2)

    def wait(self) -> None:
        if self._thread:
            self._thread.join()

    def _run_sweep(self, tasks: List[Task]) -> None:
        q: queue.Queue[Optional[Future]] = queue.Queue(maxsize=2 * self.threads)
        pool = ThreadPoolExecutor(max_workers=self.threads, thread_name_prefix="sweep")

        def producer() -> None:
            try:
                for task in tasks:
                    if self._stop_event.is_set():
                        break
                    q.put(pool.submit(task))
            finally:
                q.put(None)

        def consumer() -> None:
            try:
                while True:
                    future = q.get()
                    if future is None:
                        break
                    if self._stop_event.is_set():
                        future.cancel()
                        continue
                    try:
                        result = future.result()
                    except Exception as exc:
                        logger.exception("check crashed")
                        result = CheckResult("crashed", type(exc).__name__, "FAIL")
                    self.on_result(result)
            finally:
                self.on_done()

        t_prod = threading.Thread(target=producer, daemon=True)
        t_cons = threading.Thread(target=consumer, daemon=True)
        t_prod.start()
        t_cons.start()
        t_prod.join()
        t_cons.join()
        pool.shutdown(wait=True, cancel_futures=True)


def run_sweep(tasks: Sequence[Task], threads: int = 1,
              on_result: Optional[Callable[[CheckResult], None]] = None) -> List[CheckResult]:
    """Blocking helper: every result, in task order."""
    results: List[CheckResult] = []
    done = threading.Event()

    def collect(result: CheckResult) -> None:
        results.append(result)
        if on_result is not None:
            on_result(result)

    controller = SweepController(collect, done.set, threads=threads)
    controller.start_sweep(tasks)
    controller.wait()
    done.wait()
    return results
