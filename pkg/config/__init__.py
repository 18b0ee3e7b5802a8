from .registry import AUDITS, DEFAULT_AUDITS, DEFAULT_GENERATOR, GENERATORS, INPUT_FUNCTIONS, SCHEDULES
from .settings import *
