"""Grade-crossing decision core.

Detection-ensemble fusion, segmentation scoring, evaluation metrics,
the crossing-control state machine, and a deterministic scenario
simulator that drives the whole pipeline.
"""

from .controller import (
    INITIAL_STATE,
    Action,
    Bar,
    ControlEvent,
    ControllerConfig,
    CrossingState,
    Mode,
    TickInput,
    render_event,
    roi_is_clear,
    run_episode,
    step,
)
from .fusion import (
    Detection,
    FusedDetection,
    ModelWeights,
    calibrate_confidence,
    ensemble_loss,
    fuse_frame,
    update_model_weights,
)
from .geometry import BBox, intersection_area, iou, overlaps_roi
from .metrics import (
    ClassMetrics,
    ConfusionMatrix,
    GroundTruthObject,
    average_precision,
    build_confusion_matrix,
    class_metrics,
    evaluate_detections,
    match_detections,
    pr_curve,
    render_report,
)
from .segmentation import (
    BinaryMask,
    ProbMask,
    TrainSignalState,
    bce_loss,
    mask_mean_iou,
    threshold_mask,
    train_presence_score,
    update_train_signal,
)
from .simulator import (
    DetectorNoise,
    MaskNoise,
    ObjectTrack,
    Scenario,
    ground_truth_at,
    run_simulation,
    simulate_detections,
    simulate_masks,
)

__version__ = "0.1.0"
