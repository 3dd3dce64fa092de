"""
Batch experiment harness: task planning, execution and result files.
"""

from .experiment import RunSummary, plan_tasks, run_experiment, run_task

__all__ = ['RunSummary', 'plan_tasks', 'run_experiment', 'run_task']
