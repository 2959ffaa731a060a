# -*- coding: utf-8 -*-
"""Saliency evaluation measures: mean absolute error, maximum F-measure, structure measure and maximum enhanced
alignment measure, and their aggregation over a dataset.

Predictions are soft masks in [0, 1] and ground truths binary masks. The threshold sweeps visit the 256 values
``k / 255`` and binarize a prediction with ``pred > t``.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import os
import numpy as np
import pandas as pd
import popnet.settings as settings
from popnet.exceptions import ValidationError, DataError
from popnet.readwrite import list_stems, read_soft_mask, read_mask, write_json, read_json


logger = logging.getLogger(__name__)

_EPS = np.spacing(1)


def get_thresholds() -> np.ndarray:
    return np.arange(settings.NB_THRESHOLDS) / 255.0


def _as_pair(pred, g) -> tuple:
    pred = np.asarray(pred.detach().cpu() if hasattr(pred, "detach") else pred, dtype=np.float64)
    g = np.asarray(g.detach().cpu() if hasattr(g, "detach") else g)
    if pred.shape != g.shape:
        raise ValidationError("Shape mismatch between prediction %s and ground truth %s"
                              % (str(pred.shape), str(g.shape)))
    if pred.ndim != 2:
        raise ValidationError("Metrics expect HxW masks, got shape %s" % str(pred.shape))
    if not np.all(np.isfinite(pred)) or pred.min() < 0 or pred.max() > 1:
        raise ValidationError("Prediction values must be finite and lie in [0, 1]")
    if g.dtype != bool:
        if not np.all((g == 0) | (g == 1)):
            raise ValidationError("Ground truth must be a binary mask")
        g = g > 0.5
    return pred, g


def prepare_prediction(pred, normalize=True) -> np.ndarray:
    """Return a prediction as float64, min-max rescaled to [0, 1] when ``normalize`` is set and it is not
    constant."""
    pred = np.asarray(pred, dtype=np.float64)
    if normalize:
        low, high = pred.min(), pred.max()
        if high > low:
            pred = (pred - low) / (high - low)
    return pred


def mae(pred, g) -> float:
    """Mean absolute error between a soft prediction and a binary mask."""
    pred, g = _as_pair(pred, g)
    return float(np.mean(np.abs(pred - g)))


def _count_above(values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Number of ``values`` strictly above each threshold."""
    return values.size - np.searchsorted(np.sort(values), thresholds, side="right")


def f_measure_curve(pred, g) -> np.ndarray:
    """F-measure (``beta^2 = 0.3``) at each of the 256 thresholds; 0 where precision and recall are both 0.

    Raises
    ------
    ValidationError
        If the ground truth has no foreground pixel.
    """
    pred, g = _as_pair(pred, g)
    nb_foreground = np.count_nonzero(g)
    if nb_foreground == 0:
        raise ValidationError("The F-measure is undefined for an empty ground truth")
    thresholds = get_thresholds()
    true_positives = _count_above(pred[g], thresholds).astype(np.float64)
    predicted = true_positives + _count_above(pred[~g], thresholds)
    precision = np.divide(true_positives, predicted, out=np.zeros_like(true_positives), where=predicted > 0)
    recall = true_positives / nb_foreground
    numerator = (1 + settings.F_BETA_SQUARED) * precision * recall
    denominator = settings.F_BETA_SQUARED * precision + recall
    return np.divide(numerator, denominator, out=np.zeros_like(numerator), where=denominator > 0)


def max_f_measure(pred, g) -> float:
    """Maximum over the threshold sweep of the F-measure.

    Examples
    --------
    >>> import numpy as np
    >>> import popnet as pn
    >>> g = np.zeros((4, 4))
    >>> g[:2] = 1
    >>> round(pn.max_f_measure(np.ones((4, 4)), g), 6)
    0.565217
    """
    return float(f_measure_curve(pred, g).max())


def _dispersion(values: np.ndarray) -> float:
    if values.size < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def _object_similarity(pred: np.ndarray, g: np.ndarray) -> float:
    region = pred[g]
    if region.size == 0:
        return 0.0
    mean = region.mean()
    return float(2 * mean / (mean ** 2 + 1 + _dispersion(region) + _EPS))


def _object_score(pred: np.ndarray, g: np.ndarray) -> float:
    foreground_ratio = np.mean(g)
    foreground = pred * g
    background = (1 - pred) * ~g
    return float(foreground_ratio * _object_similarity(foreground, g)
                 + (1 - foreground_ratio) * _object_similarity(background, ~g))


def _centroid(g: np.ndarray) -> tuple:
    """One-based split position ``(x, y)`` at the rounded centroid of the foreground, the center if empty."""
    height, width = g.shape
    if np.count_nonzero(g) == 0:
        return int(np.round(width / 2)) + 1, int(np.round(height / 2)) + 1
    y, x = np.argwhere(g).mean(axis=0).round()
    return int(x) + 1, int(y) + 1


def _block_similarity(pred: np.ndarray, g: np.ndarray) -> float:
    n = pred.size
    if n == 0:
        return 0.0
    x = pred.mean()
    y = g.mean()
    if n < 2:
        sigma_x = sigma_y = sigma_xy = 0.0
    else:
        sigma_x = np.sum((pred - x) ** 2) / (n - 1)
        sigma_y = np.sum((g - y) ** 2) / (n - 1)
        sigma_xy = np.sum((pred - x) * (g - y)) / (n - 1)
    alpha = 4 * x * y * sigma_xy
    beta = (x ** 2 + y ** 2) * (sigma_x + sigma_y)
    if alpha != 0:
        return float(alpha / (beta + _EPS))
    if beta == 0:
        return 1.0
    return 0.0


def _region_score(pred: np.ndarray, g: np.ndarray) -> float:
    height, width = g.shape
    x, y = _centroid(g)
    x, y = min(x, width), min(y, height)
    area = float(height * width)
    weights = [x * y / area, y * (width - x) / area, (height - y) * x / area]
    weights.append(1 - sum(weights))
    blocks = [(slice(0, y), slice(0, x)), (slice(0, y), slice(x, width)),
              (slice(y, height), slice(0, x)), (slice(y, height), slice(x, width))]
    g = g.astype(np.float64)
    return float(sum(w * _block_similarity(pred[b], g[b]) for w, b in zip(weights, blocks)))


def s_measure(pred, g, alpha=settings.S_ALPHA) -> float:
    """Structure measure ``alpha * S_object + (1 - alpha) * S_region``, clamped to [0, 1].

    The object term compares the prediction on the foreground and on the background with the mean and dispersion
    of each region; the region term splits both masks in four blocks at the foreground centroid and averages a
    block structural similarity weighted by block areas. An all-background ground truth scores
    ``1 - mean(pred)`` and an all-foreground one ``mean(pred)``.
    """
    pred, g = _as_pair(pred, g)
    foreground_ratio = np.mean(g)
    if foreground_ratio == 0:
        score = 1 - np.mean(pred)
    elif foreground_ratio == 1:
        score = np.mean(pred)
    else:
        score = alpha * _object_score(pred, g) + (1 - alpha) * _region_score(pred, g)
    return float(np.clip(score, 0.0, 1.0))


def e_measure_curve(pred, g) -> np.ndarray:
    """Enhanced alignment measure at each of the 256 thresholds.

    With ``phi = map - mean(map)`` for the binarized prediction and for the ground truth, the alignment is
    ``xi = 2 phi_g phi_p / (phi_g^2 + phi_p^2)`` and the score the mean of ``(xi + 1)^2 / 4`` over pixels. Binary
    maps only take four ``(phi_p, phi_g)`` combinations, so the mean is computed from their counts. An
    all-background ground truth scores the fraction of predicted background, an all-foreground one the fraction of
    predicted foreground.
    """
    pred, g = _as_pair(pred, g)
    size = float(g.size)
    thresholds = get_thresholds()
    fg_fg = _count_above(pred[g], thresholds).astype(np.float64)
    bg_fg = _count_above(pred[~g], thresholds).astype(np.float64)
    nb_foreground = float(np.count_nonzero(g))
    if nb_foreground == 0:
        return (size - bg_fg) / size
    if nb_foreground == size:
        return fg_fg / size
    fg_bg = nb_foreground - fg_fg
    bg_bg = (size - nb_foreground) - bg_fg
    mean_pred = (fg_fg + bg_fg) / size
    mean_gt = nb_foreground / size
    total = np.zeros_like(fg_fg)
    for count, pred_value, gt_value in ((fg_fg, 1.0, 1.0), (fg_bg, 0.0, 1.0), (bg_fg, 1.0, 0.0), (bg_bg, 0.0, 0.0)):
        phi_p = pred_value - mean_pred
        phi_g = gt_value - mean_gt
        alignment = 2 * phi_p * phi_g / (phi_p ** 2 + phi_g ** 2 + _EPS)
        total += count * (alignment + 1) ** 2 / 4
    return total / size


def max_e_measure(pred, g) -> float:
    return float(np.clip(e_measure_curve(pred, g).max(), 0.0, 1.0))


def image_metrics(pred, g, normalize=True) -> dict:
    """Return the four measures of one image keyed by ``settings.METRIC_NAMES``."""
    pred, g = _as_pair(pred, g)
    pred = prepare_prediction(pred, normalize)
    return {"M": mae(pred, g), "Fm": max_f_measure(pred, g), "Sm": s_measure(pred, g), "Em": max_e_measure(pred, g)}


@dataclass
class MetricsReport:
    """Per-image measures and their dataset means.

    ``skipped`` lists ``{"stem", "reason"}`` records of images left out of the means, ``errors`` the problems that
    prevented any evaluation, and ``alongside`` holds other reports (as dictionaries) computed on the same images,
    e.g. for the hard separation masks.
    """
    per_image: list = field(default_factory=list)
    mean: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    alongside: dict = field(default_factory=dict)

    @classmethod
    def from_records(cls, records, skipped=(), errors=()):
        """Build a report from per-image records, sorting them by stem and averaging every measure."""
        records = sorted((dict(r) for r in records), key=lambda r: r["stem"])
        report = cls(per_image=records, skipped=list(skipped), errors=list(errors))
        if records:
            report.mean = {name: float(value) for name, value in
                           report.to_frame()[list(settings.METRIC_NAMES)].mean(axis=0).items()}
        return report

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.per_image, columns=["stem"] + list(settings.METRIC_NAMES))

    def to_dict(self) -> dict:
        return {"per_image": self.per_image, "mean": self.mean, "skipped": self.skipped, "errors": self.errors,
                "alongside": self.alongside}

    @classmethod
    def from_dict(cls, data: dict, path="<memory>"):
        """Rebuild a report, checking its structure.

        Raises
        ------
        DataError
            If ``data`` does not have the report structure or holds values outside [0, 1].
        """
        if not isinstance(data, dict) or not isinstance(data.get("per_image"), list) \
                or not isinstance(data.get("mean"), dict):
            raise DataError("Malformed report '%s': 'per_image' list and 'mean' table expected" % str(path))
        for record in data["per_image"]:
            if not isinstance(record, dict) or "stem" not in record \
                    or any(not isinstance(record.get(name), (int, float)) for name in settings.METRIC_NAMES):
                raise DataError("Malformed report '%s': bad per-image record %s" % (str(path), str(record)))
            if any(not 0 <= record[name] <= 1 for name in settings.METRIC_NAMES):
                raise DataError("Malformed report '%s': measure out of [0, 1] for '%s'" % (str(path), record["stem"]))
        return cls(per_image=data["per_image"], mean=data["mean"], skipped=data.get("skipped", []),
                   errors=data.get("errors", []), alongside=data.get("alongside", {}))

    def write(self, path):
        """Write the report as JSON and a CSV mirror of the per-image table next to it."""
        write_json(self.to_dict(), path)
        self.to_frame().to_csv(os.path.splitext(str(path))[0] + ".csv", index=False)

    @classmethod
    def read(cls, path):
        return cls.from_dict(read_json(path), path)


def evaluate_pairs(items, normalize=True, workers=None) -> MetricsReport:
    """Evaluate ``(stem, pred, g)`` items and aggregate them into a report.

    Images whose ground truth makes a measure undefined (no foreground pixel) are skipped with a warning. Items are
    evaluated concurrently by ``workers`` threads; records are sorted by stem, so the result does not depend on the
    completion order.
    """
    items = list(items)

    def evaluate(item):
        stem, pred, g = item
        try:
            return dict(stem=stem, **image_metrics(pred, g, normalize)), None
        except ValidationError as e:
            return None, {"stem": stem, "reason": str(e)}

    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(evaluate, items))
    skipped = [s for _, s in results if s is not None]
    for record in skipped:
        logger.warning("Skipping '%s': %s", record["stem"], record["reason"])
    return MetricsReport.from_records([r for r, _ in results if r is not None], skipped=skipped)


def evaluate_dataset(pred_dir, gt_dir, normalize=True, workers=None) -> MetricsReport:
    """Evaluate the predictions of a directory against the ground truth masks of another one.

    Files are matched by stem. Stems present on one side only are skipped and listed in the report; when no stem
    matches, the report holds an error and no measure.

    Parameters
    ----------
    pred_dir : str
        Directory of gray PNG soft masks.
    gt_dir : str
        Directory of gray PNG binary masks.
    normalize : bool
        Min-max rescale each prediction before evaluation. (Default value = True)
    workers : int
        Number of evaluation threads (Default value = None, the executor default)

    Returns
    -------
    MetricsReport
    """
    pred_stems = set(list_stems(pred_dir))
    gt_stems = set(list_stems(gt_dir))
    skipped = [{"stem": s, "reason": "no ground truth"} for s in sorted(pred_stems - gt_stems)]
    skipped += [{"stem": s, "reason": "no prediction"} for s in sorted(gt_stems - pred_stems)]
    for record in skipped:
        logger.warning("Unmatched stem '%s': %s", record["stem"], record["reason"])
    common = sorted(pred_stems & gt_stems)
    if not common:
        return MetricsReport(skipped=skipped, errors=["No matching stem between '%s' and '%s'"
                                                      % (str(pred_dir), str(gt_dir))])

    def load(stem):
        return (stem, read_soft_mask(os.path.join(str(pred_dir), stem + settings.IMAGE_EXTENSION)),
                read_mask(os.path.join(str(gt_dir), stem + settings.IMAGE_EXTENSION)))

    report = evaluate_pairs((load(stem) for stem in common), normalize, workers)
    report.skipped = skipped + report.skipped
    return report


def compare_reports(baseline: MetricsReport, candidate: MetricsReport, metric="Fm") -> dict:
    """Count the images on which ``candidate`` improves on ``baseline`` for one measure (lower is better for
    ``"M"``, higher for the others).

    Returns
    -------
    dict
        ``{"metric", "improved": [stems], "nb_improved", "nb_compared"}`` over the stems present in both reports.
    """
    if metric not in settings.METRIC_NAMES:
        raise ValidationError("Unknown metric '%s', expected one of %s" % (str(metric), str(settings.METRIC_NAMES)))
    merged = baseline.to_frame().merge(candidate.to_frame(), on="stem", suffixes=("_base", "_cand"))
    if metric == "M":
        better = merged[metric + "_cand"] < merged[metric + "_base"]
    else:
        better = merged[metric + "_cand"] > merged[metric + "_base"]
    improved = sorted(merged.loc[better, "stem"].tolist())
    return {"metric": metric, "improved": improved, "nb_improved": len(improved), "nb_compared": int(len(merged))}


def object_counts(manifest: dict) -> dict:
    """Map the stems of a dataset manifest to the number of objects of their scene.

    Raises
    ------
    DataError
        If the manifest does not list scenes with their object counts.
    """
    try:
        return {scene["stem"]: int(scene["scene_object_count"]) for scene in manifest["scenes"]}
    except (KeyError, TypeError, ValueError) as e:
        raise DataError("Manifest without per-scene object counts: %s" % str(e))


def split_by_object_count(report: MetricsReport, counts: dict) -> dict:
    """Split the per-image records of a report between single-object and multi-object scenes.

    Returns
    -------
    dict
        Reports keyed by ``settings.OBJECT_COUNT_GROUPS``. Stems missing from ``counts`` or without any object belong
        to neither group.
    """
    single, multi = settings.OBJECT_COUNT_GROUPS
    groups = {single: [], multi: []}
    for record in report.per_image:
        count = counts.get(record["stem"], 0)
        if count == 1:
            groups[single].append(record)
        elif count > 1:
            groups[multi].append(record)
    return {name: MetricsReport.from_records(records) for name, records in groups.items()}


def add_object_count_split(report: MetricsReport, counts: dict) -> MetricsReport:
    """Store the single-object and multi-object reports of ``report`` in its ``alongside`` table."""
    for name, group in split_by_object_count(report, counts).items():
        report.alongside[name] = group.to_dict()
        logger.info("%s: %d images, mean %s", name, len(group.per_image), str(group.mean))
    return report
