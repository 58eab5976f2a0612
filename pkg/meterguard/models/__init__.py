from .architectures import ArchitectureId, Family, Side, all_architectures, build_model, layer_stack, scaled_width
from .distillation import DistillResult, distill
from .metrics import confusion_counts, evaluate_classifier

__all__ = [
    "ArchitectureId",
    "Family",
    "Side",
    "all_architectures",
    "build_model",
    "layer_stack",
    "scaled_width",
    "DistillResult",
    "distill",
    "confusion_counts",
    "evaluate_classifier",
]
