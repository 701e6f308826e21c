"""Detection evaluation: matching, confusion matrix, precision/recall, AP.

Predictions are matched greedily to ground truth in descending
confidence order. A same-class match at IoU >= 0.5 is a true positive;
a cross-class match lands in an off-diagonal confusion cell; everything
else is a false positive or a missed truth.

Run: python3 demos/02_detection_metrics.py
"""

from crossguard import (
    BBox,
    Detection,
    GroundTruthObject,
    average_precision,
    class_metrics,
    evaluate_detections,
    pr_curve,
    render_report,
)

truths = [
    GroundTruthObject(0, "car", BBox(100, 100, 200, 180)),
    GroundTruthObject(0, "truck", BBox(300, 100, 420, 200)),
    GroundTruthObject(1, "car", BBox(50, 50, 150, 130)),
    GroundTruthObject(1, "person", BBox(400, 120, 430, 200)),
]
preds = [
    # frame 0: the car is found; the truck is mislabelled as a car
    Detection(0, "ens", "car", 0.95, BBox(102, 101, 198, 179)),
    Detection(0, "ens", "car", 0.70, BBox(305, 102, 418, 198)),
    # frame 1: the car is found twice (the duplicate becomes a FP);
    # the person is missed entirely
    Detection(1, "ens", "car", 0.90, BBox(51, 50, 149, 131)),
    Detection(1, "ens", "car", 0.60, BBox(48, 52, 152, 128)),
    # and a hallucinated detection over empty road
    Detection(1, "ens", "bus", 0.40, BBox(500, 300, 560, 360)),
]

cm = evaluate_detections(preds, truths)
print("=== Full report ===")
print(render_report(cm, preds, truths))

m = class_metrics(cm, "car")
print("=== Reading the car line ===")
print(f"tp={m.tp:.0f}  fp={m.fp:.0f}  fn={m.fn:.0f}")
print(f"precision = tp/(tp+fp) = {m.precision:.4f}")
print(f"recall    = tp/(tp+fn) = {m.recall:.4f}")
print(f"f1        = {m.f1:.4f}")
print("The mislabelled truck counts against car precision (off-diagonal")
print("truck->car cell) and the duplicate box is a plain false positive.")

print()
print("=== PR curve and average precision ===")
curve = pr_curve(preds, truths, "car")
for recall, precision in curve:
    print(f"  recall {recall:.3f}  precision {precision:.3f}")
print(f"average precision (all-points interpolation): "
      f"{average_precision(curve):.4f}")
