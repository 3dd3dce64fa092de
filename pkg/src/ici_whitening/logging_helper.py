"""
Logging Helper Module
Structured event records for experiment runs.

Events are JSON objects written to the 'ici_whitening.events' logger, so they
can be routed to their own handler (or silenced) independently of the
module loggers.
"""

import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)
event_logger = logging.getLogger("ici_whitening.events")

EVENTS_ENABLED = os.getenv('ICI_EVENTS_ENABLED', 'true').lower() == 'true'


def log_event(event_type: str, payload: Optional[Dict[str, Any]] = None) -> bool:
    """
    Emit one structured event.

    Args:
        event_type: Type of event (e.g. 'experiment_started', 'iw_fallback')
        payload: Event-specific data; non-JSON values are rendered with str()

    Returns:
        bool: True if the event was emitted (or events are disabled)

    Examples:
        >>> log_event('task_completed', {'kind': 'f1_vs_nt', 'grid_value': 30, 'drop': 2})
    """
    if not EVENTS_ENABLED:
        return True

    record = {
        'event_type': event_type,
        'payload': payload or {},
        'timestamp': datetime.now().isoformat(),
    }
    try:
        event_logger.info(json.dumps(record, default=str, sort_keys=True))
        return True
    except (TypeError, ValueError) as e:
        logger.debug(f"Error logging event {event_type}: {str(e)}")
        return False


def log_experiment_started(kind: str, n_tasks: int, master_seed: int, output_dir: str) -> bool:
    """Log when an experiment run starts."""
    return log_event(
        event_type='experiment_started',
        payload={
            'kind': kind,
            'n_tasks': n_tasks,
            'master_seed': master_seed,
            'output_dir': output_dir,
        }
    )


def log_task_completed(kind: str, grid_value: float, drop_index: int, seconds: float) -> bool:
    """Log when one (grid point, drop) task finishes."""
    return log_event(
        event_type='task_completed',
        payload={
            'kind': kind,
            'grid_value': grid_value,
            'drop': drop_index,
            'seconds': round(seconds, 3),
        }
    )


def log_iw_fallback(policy: str, position: int, drop_seed: int, reason: str) -> bool:
    """Log when whitening could not be applied and the receiver fell back to plain MRC."""
    return log_event(
        event_type='iw_fallback',
        payload={
            'policy': policy,
            'position': position,
            'drop_seed': drop_seed,
            'reason': reason,
        }
    )


def log_experiment_completed(kind: str, files: Dict[str, str], seconds: float) -> bool:
    """Log when an experiment run completes."""
    return log_event(
        event_type='experiment_completed',
        payload={
            'kind': kind,
            'files': files,
            'seconds': round(seconds, 3),
        }
    )
