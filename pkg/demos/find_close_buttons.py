"""Plant small close crosses into synthetic ad creatives and locate them
with the multi-scale template detector."""

import time

from madroid.detectors.boxes import iou
from madroid.detectors.cross import TemplateCrossDetector
from madroid.detectors.synth import DEFAULT_SCALE_RANGE, cross_symbols, embed_cross, make_ad_image, scale_sides, template_bank

symbols = cross_symbols()
detector = TemplateCrossDetector(template_bank(symbols, scale_sides(DEFAULT_SCALE_RANGE, (250, 300))))

start = time.perf_counter()
for seed in range(8):
    image, truth = embed_cross(make_ad_image(seed), symbols[seed % len(symbols)], seed)
    boxes = detector.detect(image)
    best = max((iou(b, truth) for b in boxes), default=0.0)
    print(f"seed {seed}: cross {truth.w:.0f}px at ({truth.x:.0f},{truth.y:.0f})  "
          f"{len(boxes)} detections, best IoU {best:.2f}")
print(f"{time.perf_counter() - start:.2f} s")
