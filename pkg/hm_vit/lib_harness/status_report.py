#!/usr/bin/env python3


"""
Name: Status Report
Description: Responsible for tracking training statistics and printing status reports
"""


import sys
import time


class StatusReport:
    """
    Used to keep track of a training session's status
    """

    def __init__(self, stage, regime, total_steps):
        """
        Basic initialization function

        Inputs:
            stage: Training stage, 1 or 2

            regime: Regime the session trains on

            total_steps: Number of optimizer steps planned

        Returns:
            StatusReport
        """
        self.stage = stage
        self.regime = regime
        self.total_steps = total_steps

        # Optimizer steps taken so far, restored on resume
        self.step = 0
        self.epoch = 0

        # Loss of the latest step
        self.loss_cls = 0.0
        self.loss_reg = 0.0

        # Validation losses, one per finished epoch
        self.val_history = []

        # The start time of the current run
        self.start_time = time.perf_counter()

    def update(self, step, loss_cls, loss_reg):
        self.step = step
        self.loss_cls = loss_cls
        self.loss_reg = loss_reg

    def best_val(self):
        return min(self.val_history) if self.val_history else None

    def epochs_since_best(self):
        """
        Number of finished epochs after the best validation loss
        """
        if not self.val_history:
            return 0
        best = self.val_history.index(min(self.val_history))
        return len(self.val_history) - 1 - best

    def print_status(self):
        """
        Prints a status report to stderr

        Inputs:
            None

        Returns:
            None
        """
        print("Status Report:", file=sys.stderr)
        print(f"Stage: {self.stage}   Regime: {self.regime}", file=sys.stderr)
        print(f"Steps: {self.step:,} / {self.total_steps:,}   Epoch: {self.epoch}", file=sys.stderr)
        print(f"Last Loss: cls {self.loss_cls:.5f}  reg {self.loss_reg:.5f}", file=sys.stderr)
        if self.val_history:
            print(f"Validation Loss: {self.val_history[-1]:.5f} (best {self.best_val():.5f})", file=sys.stderr)

        print("Session Training Time: ", end='', file=sys.stderr)
        self._print_time(self._calc_running_time())

    def _print_time(self, session_time):
        """
        Prints the Hours, Minutes and Seconds from a total number of seconds to stderr

        Inputs:
            session_time: Number of seconds this has been running

        Returns:
            None
        """
        hours = session_time // 3600
        remainder = session_time % 3600
        minutes = remainder // 60
        seconds = remainder % 60

        # Print Minutes if there was an Hours field before it
        print_rest = False

        if hours != 0:
            print_rest = True
            print(str(hours) + (" Hour, " if hours == 1 else " Hours, "), end='', file=sys.stderr)

        if print_rest or minutes != 0:
            print(str(minutes) + (" Minute, " if minutes == 1 else " Minutes, "), end='', file=sys.stderr)

        print(str(seconds) + (" Second" if seconds == 1 else " Seconds"), file=sys.stderr)

    def _calc_running_time(self):
        """
        Seconds since this session started, rounded down
        """
        return int(time.perf_counter() - self.start_time)

    def to_meta(self):
        """
        What a checkpoint needs to restore this report. Wall time is left
        out so reruns write identical files
        """
        return {
            'step': self.step,
            'epoch': self.epoch,
            'val_history': list(self.val_history),
        }

    def load(self, meta):
        """
        Restores counters saved by to_meta()
        """
        self.step = int(meta.get('step', 0))
        self.epoch = int(meta.get('epoch', 0))
        self.val_history = [float(value) for value in meta.get('val_history', [])]
