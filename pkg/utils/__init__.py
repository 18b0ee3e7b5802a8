from .logging_utils import Logger, StageTimer
from .system_utils import check_available_memory_for_space, get_memory_usage, get_system_info
from .file_utils import read_field, read_space, write_audit_reports, write_field, write_space
