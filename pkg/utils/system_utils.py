"""System utilities for memory checks and runtime information."""

import sys
import psutil
from typing import Dict, Any

try:
    import numba
    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

from config.settings import BYTES_PER_PAIR, MIN_AVAILABLE_MEMORY_GB


def get_system_info() -> Dict[str, Any]:
    """Get basic system information."""
    info = {
        'python_version': sys.version.split()[0],
        'platform': sys.platform,
        'cpu_count': psutil.cpu_count(logical=True),
        'available_memory_gb': psutil.virtual_memory().available / (1024**3)
    }
    if NUMBA_AVAILABLE:
        info['numba_version'] = numba.__version__
        info['numba_threads'] = numba.get_num_threads()
    return info


def get_memory_usage() -> Dict[str, float]:
    """Get current memory usage in GB."""
    memory = psutil.virtual_memory()
    return {
        'total_gb': memory.total / (1024**3),
        'available_gb': memory.available / (1024**3),
        'used_gb': memory.used / (1024**3),
        'percent': memory.percent
    }


def estimate_space_memory_gb(n: int, multiplier: float = 1.0) -> float:
    """Memory held by the dense n x n distance and ordering matrices."""
    return n * n * BYTES_PER_PAIR * multiplier / (1024**3)


def check_available_memory_for_space(n: int, logger=None, multiplier: float = 1.5) -> bool:
    """Check if there's enough memory to hold the dense matrices of an n-point space.

    Args:
        n: Number of points
        logger: Optional logger for the shortage warning
        multiplier: Headroom for temporaries (argsort copies, masks)

    Returns:
        True if enough memory is available
    """
    try:
        required_gb = estimate_space_memory_gb(n, multiplier) + MIN_AVAILABLE_MEMORY_GB
        available_gb = psutil.virtual_memory().available / (1024**3)
        if available_gb < required_gb:
            if logger:
                logger.warning(f"{n}-point space needs about {required_gb:.2f} GB, "
                               f"only {available_gb:.2f} GB available")
            return False
        if logger:
            logger.debug(f"Memory check for {n} points: {required_gb:.2f} GB of {available_gb:.2f} GB")
        return True
    except Exception:
        # If we can't check, assume it's okay to proceed
        return True
