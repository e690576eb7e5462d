"""Image-similarity metrics, over/under-estimation diff maps, and reports.

All metrics take 8-bit single-channel images (any numeric dtype is
accepted and promoted to float64). SSIM has two modes: ``global``
computes the statistics over the whole image, which is the default used
in reports; ``windowed`` uses an 11x11 Gaussian window and averages the
local map. The ``covariance`` flag selects the standard structure term
(2*cov + C2); disabling it substitutes 2*sigma_a*sigma_b, a variant kept
for comparability with sources that print the formula that way.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ContractError

C1 = (0.01 * 255.0) ** 2
C2 = (0.03 * 255.0) ** 2

# ratio rules explode near zero; pixels this dim are never colored
DIFF_MAP_MIN_LEVEL = 10

BLUE = (40, 70, 255)
RED = (255, 50, 40)


def _as_pair(model_img, truth_img):
    a = np.asarray(model_img, dtype=np.float64)
    b = np.asarray(truth_img, dtype=np.float64)
    if a.shape != b.shape:
        raise ContractError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ContractError(f"expected single-channel 2-D images, got {a.shape}")
    return a, b


def nrmse(model_img, truth_img) -> float:
    """Root-mean-square error over the truth image's dynamic range.

    A constant truth image has no range; fall back to the full 8-bit
    range so the metric stays finite and predictor-independent.
    """
    model, truth = _as_pair(model_img, truth_img)
    rmse = math.sqrt(np.mean((model - truth) ** 2))
    span = float(truth.max() - truth.min())
    if span == 0.0:
        span = 255.0
    return rmse / span


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x**2) / (2 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim(
    model_img,
    truth_img,
    mode: str = "global",
    covariance: bool = True,
) -> float:
    """Structural similarity with luminance/contrast/structure terms."""
    model, truth = _as_pair(model_img, truth_img)
    if mode == "global":
        mu_a, mu_b = truth.mean(), model.mean()
        var_a, var_b = truth.var(), model.var()
        cov = ((truth - mu_a) * (model - mu_b)).mean()
        structure = 2 * cov + C2 if covariance else 2 * math.sqrt(var_a * var_b) + C2
        num = (2 * mu_a * mu_b + C1) * structure
        den = (mu_a**2 + mu_b**2 + C1) * (var_a + var_b + C2)
        return float(num / den)
    if mode == "windowed":
        kernel = _gaussian_kernel()
        pad = kernel.shape[0] // 2

        def filt(img):
            padded = np.pad(img, pad, mode="reflect")
            windows = np.lib.stride_tricks.sliding_window_view(padded, kernel.shape)
            return np.einsum("ijkl,kl->ij", windows, kernel)

        mu_a, mu_b = filt(truth), filt(model)
        var_a = filt(truth * truth) - mu_a**2
        var_b = filt(model * model) - mu_b**2
        cov = filt(truth * model) - mu_a * mu_b
        structure = (
            2 * cov + C2
            if covariance
            else 2 * np.sqrt(np.clip(var_a * var_b, 0, None)) + C2
        )
        num = (2 * mu_a * mu_b + C1) * structure
        den = (mu_a**2 + mu_b**2 + C1) * (var_a + var_b + C2)
        return float((num / den).mean())
    raise ValueError(f"unknown ssim mode: {mode!r}")


def psnr(model_img, truth_img) -> float:
    """Peak signal-to-noise ratio in dB against the 8-bit peak.

    Identical images have infinite PSNR; callers aggregating means
    should exclude the +inf sentinel (see EvalReport).
    """
    model, truth = _as_pair(model_img, truth_img)
    mse = float(np.mean((model - truth) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


@dataclass
class DiffMap:
    """Color-coded error map: blue = model at most half of truth,
    red = model at least double. Pixels dimmer than DIFF_MAP_MIN_LEVEL in
    the relevant image are left as grayscale truth."""

    image: np.ndarray  # (H, W, 3) uint8
    zoom: np.ndarray | None  # enlarged crop of the worst region, or None
    n_under: int
    n_over: int


def diff_map(pred, truth, zoom_factor: int = 4, zoom_margin: int = 4) -> DiffMap:
    pred_f, truth_f = _as_pair(pred, truth)
    under = (pred_f <= 0.5 * truth_f) & (truth_f > DIFF_MAP_MIN_LEVEL)
    over = (pred_f >= 2.0 * truth_f) & (pred_f > DIFF_MAP_MIN_LEVEL)
    gray = np.asarray(truth, dtype=np.uint8)
    image = np.stack([gray, gray, gray], axis=-1)
    image[under] = BLUE
    image[over] = RED

    zoom = None
    colored = under | over
    if colored.any():
        region = _largest_component(colored)
        rs, cs = np.nonzero(region)
        r0 = max(0, rs.min() - zoom_margin)
        r1 = min(colored.shape[0], rs.max() + 1 + zoom_margin)
        c0 = max(0, cs.min() - zoom_margin)
        c1 = min(colored.shape[1], cs.max() + 1 + zoom_margin)
        crop = image[r0:r1, c0:c1]
        zoom = np.repeat(np.repeat(crop, zoom_factor, axis=0), zoom_factor, axis=1)
    return DiffMap(
        image=image, zoom=zoom, n_under=int(under.sum()), n_over=int(over.sum())
    )


def _largest_component(mask: np.ndarray) -> np.ndarray:
    """Largest 4-connected component of a boolean mask (BFS flood fill)."""
    labels = np.zeros(mask.shape, dtype=np.int32)
    sizes = {}
    next_label = 0
    rows, cols = mask.shape
    for r0 in range(rows):
        for c0 in range(cols):
            if not mask[r0, c0] or labels[r0, c0]:
                continue
            next_label += 1
            stack = [(r0, c0)]
            labels[r0, c0] = next_label
            count = 0
            while stack:
                r, c = stack.pop()
                count += 1
                for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if (
                        0 <= nr < rows
                        and 0 <= nc < cols
                        and mask[nr, nc]
                        and not labels[nr, nc]
                    ):
                        labels[nr, nc] = next_label
                        stack.append((nr, nc))
            sizes[next_label] = count
    best = max(sizes, key=sizes.get)
    return labels == best


@dataclass
class EntryResult:
    entry_id: str
    nrmse: float
    ssim: float
    psnr: float
    error: str | None = None


@dataclass
class EvalReport:
    model_tag: str
    manifest_hash: str
    entries: list = field(default_factory=list)
    diff_map_paths: dict = field(default_factory=dict)

    @property
    def ok_entries(self) -> list:
        return [e for e in self.entries if e.error is None]

    def means(self) -> dict:
        rows = self.ok_entries
        if not rows:
            return {
                "nrmse": math.nan,
                "ssim": math.nan,
                "psnr": math.nan,
                "n": 0,
                "psnr_inf_excluded": 0,
            }
        finite_psnr = [e.psnr for e in rows if math.isfinite(e.psnr)]
        return {
            "nrmse": sum(e.nrmse for e in rows) / len(rows),
            "ssim": sum(e.ssim for e in rows) / len(rows),
            "psnr": (
                sum(finite_psnr) / len(finite_psnr) if finite_psnr else math.inf
            ),
            "n": len(rows),
            "psnr_inf_excluded": len(rows) - len(finite_psnr),
        }

    def to_json(self) -> dict:
        return {
            "model_tag": self.model_tag,
            "manifest_hash": self.manifest_hash,
            "entries": [
                {
                    "id": e.entry_id,
                    "nrmse": e.nrmse,
                    "ssim": e.ssim,
                    "psnr": "inf" if math.isinf(e.psnr) else e.psnr,
                    "error": e.error,
                }
                for e in self.entries
            ],
            "means": {
                k: ("inf" if isinstance(v, float) and math.isinf(v) else v)
                for k, v in self.means().items()
            },
            "diff_maps": self.diff_map_paths,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))


def render_table(rows: list[tuple[str, dict]]) -> str:
    """Fixed-width comparison table: one row per (id, means) pair."""
    header = f"{'ID':<12} {'Mean NRMSE':>12} {'Mean SSIM':>12} {'Mean PSNR':>12}"
    lines = [header, "-" * len(header)]
    for run_id, means in rows:
        psnr_txt = "inf" if math.isinf(means["psnr"]) else f"{means['psnr']:.2f}"
        lines.append(
            f"{run_id:<12} {means['nrmse']:>12.4f} {means['ssim']:>12.4f} "
            f"{psnr_txt:>12}"
        )
    return "\n".join(lines)


def evaluate(
    entries,
    predictor,
    truth_loader,
    model_tag: str = "",
    manifest_hash: str = "",
    diff_map_dir=None,
) -> EvalReport:
    """Score a predictor against ground-truth heatmaps.

    ``entries`` is an iterable of objects with an ``entry_id``;
    ``predictor(entry)`` returns a uint8 heatmap; ``truth_loader(entry)``
    returns the matching ground truth. Entry-level failures are recorded
    and the run continues.
    """
    report = EvalReport(model_tag=model_tag, manifest_hash=manifest_hash)
    for entry in entries:
        entry_id = getattr(entry, "entry_id", str(entry))
        try:
            truth = truth_loader(entry)
            pred = predictor(entry)
            result = EntryResult(
                entry_id=entry_id,
                nrmse=nrmse(pred, truth),
                ssim=ssim(pred, truth),
                psnr=psnr(pred, truth),
            )
            if diff_map_dir is not None:
                dm = diff_map(pred, truth)
                out = Path(diff_map_dir)
                out.mkdir(parents=True, exist_ok=True)
                path = out / f"{entry_id}_diff.png"
                Image.fromarray(dm.image).save(path)
                report.diff_map_paths[entry_id] = str(path)
                if dm.zoom is not None:
                    zoom_path = out / f"{entry_id}_diff_zoom.png"
                    Image.fromarray(dm.zoom).save(zoom_path)
        except Exception as exc:  # noqa: BLE001 - entry-level isolation
            result = EntryResult(
                entry_id=entry_id,
                nrmse=math.nan,
                ssim=math.nan,
                psnr=math.nan,
                error=f"{type(exc).__name__}: {exc}",
            )
        report.entries.append(result)
    return report
