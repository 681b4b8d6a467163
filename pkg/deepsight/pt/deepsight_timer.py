"""
Request and throughput timers for the segmentation server and frame scans.
"""

import time

import psutil

from deepsight.pt.log_utils import logger


class RequestTimer(object):
    """Context manager measuring a single request in milliseconds."""
    def __init__(self):
        self.start_time = None
        self.elapsed_ms = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed_ms = (time.perf_counter() - self.start_time) * 1000.0
        return False


class ThroughputTimer():
    """Frames per second over a scan, with optional memory figures."""
    def __init__(self,
                 batch_size=1,
                 steps_per_output=50,
                 monitor_memory=False,
                 logging_fn=None):
        self.start_time = 0
        self.end_time = 0
        self.started = False
        self.batch_size = batch_size
        if batch_size is None:
            self.batch_size = 1
        self.total_step_count = 0
        self.total_elapsed_time = 0
        self.steps_per_output = steps_per_output
        self.monitor_memory = monitor_memory
        self.logging = logging_fn
        if self.logging is None:
            self.logging = logger.info

    def start(self):
        self.started = True
        self.start_time = time.perf_counter()

    def stop(self, report_speed=True):
        if not self.started:
            return
        self.started = False
        self.total_step_count += 1
        self.end_time = time.perf_counter()
        self.total_elapsed_time += self.end_time - self.start_time
        if self.total_step_count % self.steps_per_output == 0:
            if report_speed:
                self.logging("{} steps, FramesPerSec={:.2f}".format(
                    self.total_step_count,
                    self.avg_samples_per_sec()))
            if self.monitor_memory:
                virt_mem = psutil.virtual_memory()
                swap = psutil.swap_memory()
                self.logging("vm percent: {}, swap percent: {}".format(
                    virt_mem.percent,
                    swap.percent))

    def avg_samples_per_sec(self):
        if self.total_step_count > 0 and self.total_elapsed_time > 0:
            avg_time_per_step = self.total_elapsed_time / self.total_step_count
            return self.batch_size / avg_time_per_step
        return float("-inf")
