"""gazeground: harness for gaze-grounded chest X-ray report generation and evaluation.

Fuses bounding-box, eye-fixation, and dictated-report annotations into a
canonical corpus, assembles grounded multimodal prompts, drives external
chat-completion endpoints, scores the generated reports, and runs blinded
expert error review.
"""

__version__ = "0.1.0"

from .corpus import BoundingBox, DictatedReport, Fixation, StudyRecord  # noqa: F401
from .grounding import aggregate_fixation_times, map_fixation  # noqa: F401
from .promptkit import MethodFlags, PromptBundle, build_prompt  # noqa: F401
