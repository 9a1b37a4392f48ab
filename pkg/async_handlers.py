import asyncio
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, Mapping, Optional, TypeVar
import logging
import threading

from config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")

_END = object()


class AsyncTrainingHandler:
    """Runs independent training jobs side by side in a thread pool."""

    def __init__(self, max_workers: Optional[int] = None):
        self.max_workers = max_workers

    async def arun(self, jobs: Mapping[str, Callable[[], T]]) -> Dict[str, T]:
        """Results keyed like `jobs`, in the same order."""
        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=self.max_workers or max(1, len(jobs))) as pool:
            futures = [loop.run_in_executor(pool, job) for job in jobs.values()]
            results = await asyncio.gather(*futures)
        return dict(zip(jobs.keys(), results))


class ReplayStreamer:
    """Hands records from a producer thread to a consumer through a bounded queue.

    The producer blocks while the queue is full; errors raised by the producer reach the caller.
    """

    def __init__(self, maxsize: Optional[int] = None):
        self.maxsize = settings.replay_queue_size if maxsize is None else maxsize
        if self.maxsize < 1:
            raise ValueError(f"queue size must be >= 1, got {self.maxsize}")

    async def astream(self, records: Iterable[Any], consume: Callable[[Any], None]) -> int:
        loop = asyncio.get_running_loop()
        queue: asyncio.Queue = asyncio.Queue(maxsize=self.maxsize)

        stop = threading.Event()

        def produce() -> None:
            try:
                for record in records:
                    if stop.is_set():
                        return
                    asyncio.run_coroutine_threadsafe(queue.put(record), loop).result()
            except BaseException as e:
                asyncio.run_coroutine_threadsafe(queue.put((_END, e)), loop).result()
                return
            asyncio.run_coroutine_threadsafe(queue.put((_END, None)), loop).result()

        producer = loop.run_in_executor(None, produce)
        count = 0
        try:
            while True:
                item = await queue.get()
                if isinstance(item, tuple) and len(item) == 2 and item[0] is _END:
                    if item[1] is not None:
                        raise item[1]
                    break
                consume(item)
                count += 1
        except BaseException:
            stop.set()
            while not producer.done():
                while not queue.empty():
                    queue.get_nowait()
                await asyncio.sleep(0)
            raise
        await producer
        logger.debug(f"Streamed {count} records")
        return count


def run_training_jobs(jobs: Mapping[str, Callable[[], T]], max_workers: Optional[int] = None) -> Dict[str, T]:
    """Run zero-argument jobs concurrently and return their results by key."""
    return asyncio.run(AsyncTrainingHandler(max_workers).arun(jobs))


def stream_records(records: Iterable[Any], consume: Callable[[Any], None], maxsize: Optional[int] = None) -> int:
    """Feed `records` to `consume` in order; returns how many were consumed."""
    return asyncio.run(ReplayStreamer(maxsize).astream(records, consume))
