from .app import create_app
from .store import DuplicateSubmissionError, StudyStore, UnknownExpertError

__all__ = ["DuplicateSubmissionError", "StudyStore", "UnknownExpertError", "create_app"]
