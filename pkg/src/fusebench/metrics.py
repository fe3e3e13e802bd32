"""The 15 conventional fusion-quality metrics.

Every metric is a pure function of a fused plane F and the two source
planes A (visible) and B (infrared); EN/AG/SD/SF ignore the sources.
Aggregation conventions: SSIM and MI sum their two per-source terms,
FMI/CC/PSNR average them. Values are always finite: PSNR is capped at
100 dB and every Pearson/SSIM denominator is guarded.

Size preconditions: windowed metrics need min dimension >= 16 (Q_VIFF
>= 17 for its largest analysis window); histogram, pointwise, and
difference based metrics only require their structural minima so that
small-plane oracle checks stay expressible. `evaluate_all` applies the
strictest bound (>= 17).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.signal import convolve2d

from .errors import ContractError
from .imaging import ImagePlane, sobel_responses

METRIC_ORDER = ("EN", "MI", "FMI", "PSNR", "AG", "QABF", "SD", "SF",
                "QC", "SCD", "CC", "SSIM", "QCB", "QCV", "QVIFF")
LOWER_BETTER = frozenset({"QCV"})

# SSIM stabilizers for 8-bit dynamic range (K1=0.01, K2=0.03, L=255).
_SSIM_C1 = (0.01 * 255.0) ** 2
_SSIM_C2 = (0.03 * 255.0) ** 2

# Edge-preservation sigmoid calibration (strength, then orientation).
_QABF_GAMMA_G, _QABF_KAPPA_G, _QABF_SIGMA_G = 0.9994, -15.0, 0.5
_QABF_GAMMA_A, _QABF_KAPPA_A, _QABF_SIGMA_A = 0.9879, -22.0, 0.8

_PSNR_PEAK_SQ = 255.0 ** 2
_PSNR_CAP_DB = 100.0

_VIF_NOISE_VAR = 2.0
_VIF_EPS = 1e-10

_QCV_REGION = 16
_QCV_ALPHA = 5.0

_QCB_MASK_Z = 1e-4


@dataclass(frozen=True)
class MetricResult:
    """One metric value, with the per-source terms where the metric has them."""

    metric: str
    value: float
    value_vs_a: float | None = None
    value_vs_b: float | None = None


def metric_polarity(metric: str) -> str:
    """'lower-better' for QCV, 'higher-better' for everything else."""
    if metric not in METRIC_ORDER:
        raise ContractError(f"unknown metric id {metric!r}")
    return "lower-better" if metric in LOWER_BETTER else "higher-better"


# ---------------------------------------------------------------------------
# Shared validation and numeric helpers

def _check_plane(p, min_dim: int, op: str) -> np.ndarray:
    if not isinstance(p, ImagePlane):
        raise ContractError(f"{op} expects ImagePlane inputs, got {type(p).__name__}")
    if min(p.shape) < min_dim:
        raise ContractError(f"{op} needs min dimension >= {min_dim}, got {p.shape}")
    return p.as_float()


def _check_triple(f, a, b, min_dim: int, op: str):
    planes = [_check_plane(p, min_dim, op) for p in (f, a, b)]
    if not (f.shape == a.shape == b.shape):
        raise ContractError(
            f"{op} needs matching dimensions, got {f.shape}, {a.shape}, {b.shape}")
    return planes


def _hist256(plane: ImagePlane) -> np.ndarray:
    return np.bincount(plane.pixels.ravel(), minlength=256).astype(np.float64)


def _entropy_bits(counts: np.ndarray) -> float:
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log2(p)))


def _joint_hist(x_codes: np.ndarray, y_codes: np.ndarray, bins: int = 256) -> np.ndarray:
    flat = x_codes.ravel().astype(np.int64) * bins + y_codes.ravel().astype(np.int64)
    return np.bincount(flat, minlength=bins * bins).astype(np.float64).reshape(bins, bins)


def _mi_bits(joint: np.ndarray) -> float:
    """Mutual information in bits from a joint histogram of counts."""
    total = joint.sum()
    if total <= 0:
        return 0.0
    rows, cols = np.nonzero(joint)
    p = joint[rows, cols] / total
    px = joint.sum(axis=1) / total
    py = joint.sum(axis=0) / total
    terms = p * (np.log2(p) - np.log2(px[rows]) - np.log2(py[cols]))
    return float(np.sum(terms))


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson r; either operand having zero variance yields 0."""
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sum(xc * xc))
    sy = float(np.sum(yc * yc))
    if sx <= 0.0 or sy <= 0.0:
        return 0.0
    return float(np.sum(xc * yc) / np.sqrt(sx * sy))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _window_stats(x: np.ndarray, y: np.ndarray, kernel: np.ndarray):
    """Weighted window means, variances (clamped >= 0), and covariance,
    valid placement only."""
    mu_x = convolve2d(x, kernel, mode="valid")
    mu_y = convolve2d(y, kernel, mode="valid")
    var_x = np.maximum(convolve2d(x * x, kernel, mode="valid") - mu_x * mu_x, 0.0)
    var_y = np.maximum(convolve2d(y * y, kernel, mode="valid") - mu_y * mu_y, 0.0)
    cov = convolve2d(x * y, kernel, mode="valid") - mu_x * mu_y
    return mu_x, mu_y, var_x, var_y, cov


def _ssim_map(x: np.ndarray, y: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    mu_x, mu_y, var_x, var_y, cov = _window_stats(x, y, kernel)
    num = (2.0 * mu_x * mu_y + _SSIM_C1) * (2.0 * cov + _SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + _SSIM_C1) * (var_x + var_y + _SSIM_C2)
    return num / den


# ---------------------------------------------------------------------------
# Single-plane metrics

def entropy(f: ImagePlane) -> MetricResult:
    """EN: Shannon entropy of the 256-bin intensity histogram, in bits."""
    _check_plane(f, 1, "entropy")
    return MetricResult("EN", _entropy_bits(_hist256(f)))


def average_gradient(f: ImagePlane) -> MetricResult:
    """AG: mean over interior pixels of sqrt((dx^2 + dy^2)/2), forward
    differences."""
    values = _check_plane(f, 2, "average_gradient")
    dx = values[:, 1:] - values[:, :-1]
    dy = values[1:, :] - values[:-1, :]
    grad = np.sqrt((dx[:-1, :] ** 2 + dy[:, :-1] ** 2) / 2.0)
    return MetricResult("AG", float(grad.mean()))


def standard_deviation(f: ImagePlane) -> MetricResult:
    """SD: population standard deviation of intensities."""
    values = _check_plane(f, 1, "standard_deviation")
    return MetricResult("SD", float(values.std()))


def spatial_frequency(f: ImagePlane) -> MetricResult:
    """SF: sqrt(RF^2 + CF^2), the RMS of horizontal/vertical forward
    differences."""
    values = _check_plane(f, 2, "spatial_frequency")
    rf = float(np.sqrt(np.mean((values[:, 1:] - values[:, :-1]) ** 2)))
    cf = float(np.sqrt(np.mean((values[1:, :] - values[:-1, :]) ** 2)))
    return MetricResult("SF", math.hypot(rf, cf))


# ---------------------------------------------------------------------------
# Information metrics

def mutual_information(f: ImagePlane, a: ImagePlane, b: ImagePlane) -> MetricResult:
    """MI: MI(F,A) + MI(F,B) from 256x256 joint histograms of raw
    intensities, log base 2."""
    _check_triple(f, a, b, 1, "mutual_information")
    mi_a = _mi_bits(_joint_hist(f.pixels, a.pixels))
    mi_b = _mi_bits(_joint_hist(f.pixels, b.pixels))
    return MetricResult("MI", mi_a + mi_b, mi_a, mi_b)


def _gradient_feature_codes(plane: ImagePlane) -> np.ndarray:
    """Sobel magnitude, min-max normalized per image, quantized to 0..255."""
    gx, gy = sobel_responses(plane.as_float())
    mag = np.hypot(gx, gy)
    lo, hi = float(mag.min()), float(mag.max())
    if hi <= lo:
        return np.zeros(mag.shape, dtype=np.int64)
    return np.floor((mag - lo) * (255.0 / (hi - lo)) + 0.5).astype(np.int64)


def _nmi_bits(x_codes: np.ndarray, y_codes: np.ndarray) -> float:
    """Normalized MI 2*MI/(H(x)+H(y)) on 256-level codes; both-constant
    inputs are trivially redundant and score 1."""
    joint = _joint_hist(x_codes, y_codes)
    hx = _entropy_bits(joint.sum(axis=1))
    hy = _entropy_bits(joint.sum(axis=0))
    if hx + hy == 0.0:
        return 1.0
    return 2.0 * _mi_bits(joint) / (hx + hy)


def feature_mutual_information(f: ImagePlane, a: ImagePlane, b: ImagePlane) -> MetricResult:
    """FMI: mean over sources of normalized MI between gradient-magnitude
    feature maps."""
    _check_triple(f, a, b, 3, "feature_mutual_information")
    codes_f = _gradient_feature_codes(f)
    nmi_a = _nmi_bits(codes_f, _gradient_feature_codes(a))
    nmi_b = _nmi_bits(codes_f, _gradient_feature_codes(b))
    return MetricResult("FMI", (nmi_a + nmi_b) / 2.0, nmi_a, nmi_b)


# ---------------------------------------------------------------------------
# Error metrics

def _psnr_db(mse: float) -> float:
    if mse < _PSNR_PEAK_SQ * 1e-10:
        return _PSNR_CAP_DB
    return min(10.0 * math.log10(_PSNR_PEAK_SQ / mse), _PSNR_CAP_DB)


def psnr(f: ImagePlane, a: ImagePlane, b: ImagePlane) -> MetricResult:
    """PSNR: 10*log10(255^2 / mean of the two per-source MSEs), capped at
    100 dB."""
    vf, va, vb = _check_triple(f, a, b, 1, "psnr")
    mse_a = float(np.mean((vf - va) ** 2))
    mse_b = float(np.mean((vf - vb) ** 2))
    value = _psnr_db((mse_a + mse_b) / 2.0)
    return MetricResult("PSNR", value, _psnr_db(mse_a), _psnr_db(mse_b))


def scd(f: ImagePlane, a: ImagePlane, b: ImagePlane) -> MetricResult:
    """SCD: r(F-B, A) + r(F-A, B), Pearson correlations of difference
    images."""
    vf, va, vb = _check_triple(f, a, b, 1, "scd")
    r1 = _pearson(vf - vb, va)
    r2 = _pearson(vf - va, vb)
    return MetricResult("SCD", r1 + r2, r1, r2)


def correlation_coefficient(f: ImagePlane, a: ImagePlane, b: ImagePlane) -> MetricResult:
    """CC: mean of Pearson r(F,A) and r(F,B)."""
    vf, va, vb = _check_triple(f, a, b, 1, "correlation_coefficient")
    r_a = _pearson(vf, va)
    r_b = _pearson(vf, vb)
    return MetricResult("CC", (r_a + r_b) / 2.0, r_a, r_b)


# ---------------------------------------------------------------------------
# Structural metrics

def ssim_fusion(f: ImagePlane, a: ImagePlane, b: ImagePlane) -> MetricResult:
    """SSIM: SSIM(F,A) + SSIM(F,B), each the mean map over 11x11 Gaussian
    windows (sigma 1.5), valid placement."""
    vf, va, vb = _check_triple(f, a, b, 16, "ssim_fusion")
    kernel = _gaussian_kernel(11, 1.5)
    ssim_a = float(_ssim_map(vf, va, kernel).mean())
    ssim_b = float(_ssim_map(vf, vb, kernel).mean())
    return MetricResult("SSIM", ssim_a + ssim_b, ssim_a, ssim_b)


def q_c(f: ImagePlane, a: ImagePlane, b: ImagePlane) -> MetricResult:
    """Q_C: covariance-weighted blend of windowed SSIM against each source,
    8x8 sliding windows (step 1)."""
    vf, va, vb = _check_triple(f, a, b, 16, "q_c")
    kernel = np.full((8, 8), 1.0 / 64.0)
    mu_f = convolve2d(vf, kernel, mode="valid")
    mu_a = convolve2d(va, kernel, mode="valid")
    mu_b = convolve2d(vb, kernel, mode="valid")
    var_f = np.maximum(convolve2d(vf * vf, kernel, mode="valid") - mu_f * mu_f, 0.0)
    var_a = np.maximum(convolve2d(va * va, kernel, mode="valid") - mu_a * mu_a, 0.0)
    var_b = np.maximum(convolve2d(vb * vb, kernel, mode="valid") - mu_b * mu_b, 0.0)
    cov_af = convolve2d(va * vf, kernel, mode="valid") - mu_a * mu_f
    cov_bf = convolve2d(vb * vf, kernel, mode="valid") - mu_b * mu_f

    # Both weights are divided out (rather than lam and 1-lam) so swapping
    # the sources permutes the terms bit-exactly.
    total = cov_af + cov_bf
    safe = np.where(total != 0.0, total, 1.0)
    lam_a = np.clip(np.where(total != 0.0, cov_af / safe, 0.5), 0.0, 1.0)
    lam_b = np.clip(np.where(total != 0.0, cov_bf / safe, 0.5), 0.0, 1.0)

    def windowed_ssim(mu_x, var_x, cov_xf):
        num = (2.0 * mu_x * mu_f + _SSIM_C1) * (2.0 * cov_xf + _SSIM_C2)
        den = (mu_x * mu_x + mu_f * mu_f + _SSIM_C1) * (var_x + var_f + _SSIM_C2)
        return num / den

    score = lam_a * windowed_ssim(mu_a, var_a, cov_af) \
        + lam_b * windowed_ssim(mu_b, var_b, cov_bf)
    return MetricResult("QC", float(np.clip(score.mean(), 0.0, 1.0)))


# ---------------------------------------------------------------------------
# Edge preservation (Q_ABF)

def _edge_strength_orientation(values: np.ndarray):
    gx, gy = sobel_responses(values)
    strength = np.hypot(gx, gy)
    # The published calibration folds opposite directions together:
    # arctan(gy/gx) in (-pi/2, pi/2], vertical edges at pi/2.
    with np.errstate(divide="ignore", invalid="ignore"):
        orientation = np.where(gx == 0.0, math.pi / 2.0, np.arctan(gy / np.where(gx == 0.0, 1.0, gx)))
    return strength, orientation


def _preservation(g_x, a_x, g_f, a_f):
    hi = np.maximum(g_x, g_f)
    lo = np.minimum(g_x, g_f)
    rel_strength = np.where(hi > 0.0, lo / np.where(hi > 0.0, hi, 1.0), 0.0)
    rel_orientation = 1.0 - np.abs(a_x - a_f) / (math.pi / 2.0)
    q_g = _QABF_GAMMA_G / (1.0 + np.exp(_QABF_KAPPA_G * (rel_strength - _QABF_SIGMA_G)))
    q_a = _QABF_GAMMA_A / (1.0 + np.exp(_QABF_KAPPA_A * (rel_orientation - _QABF_SIGMA_A)))
    return np.sqrt(q_g * q_a)


def q_abf(f: ImagePlane, a: ImagePlane, b: ImagePlane) -> MetricResult:
    """Q_ABF: sigmoid-weighted edge strength/orientation preservation from
    each source to the fused image, weighted by source edge strength."""
    vf, va, vb = _check_triple(f, a, b, 3, "q_abf")
    g_f, o_f = _edge_strength_orientation(vf)
    g_a, o_a = _edge_strength_orientation(va)
    g_b, o_b = _edge_strength_orientation(vb)
    q_af = _preservation(g_a, o_a, g_f, o_f)
    q_bf = _preservation(g_b, o_b, g_f, o_f)
    weight_total = float(np.sum(g_a + g_b))
    if weight_total == 0.0:
        return MetricResult("QABF", 0.0)
    value = float(np.sum(q_af * g_a + q_bf * g_b) / weight_total)
    return MetricResult("QABF", value)


# ---------------------------------------------------------------------------
# Perceptual metrics (Q_CB, Q_CV)

def _csf_filter(values: np.ndarray, grid_divisor: float) -> np.ndarray:
    """Band-pass contrast-sensitivity filter applied in the frequency domain
    over a mirrored 2h x 2w extension of the plane."""
    h, w = values.shape
    padded = np.pad(values, ((0, h), (0, w)), mode="symmetric")
    fy = np.fft.fftfreq(2 * h)[:, None] * (2.0 * h / grid_divisor)
    fx = np.fft.fftfreq(2 * w)[None, :] * (2.0 * w / grid_divisor)
    radius = np.hypot(fy, fx)
    response = 2.6 * (0.0192 + 0.144 * radius) * np.exp(-((0.144 * radius) ** 1.1))
    filtered = np.fft.ifft2(np.fft.fft2(padded) * response).real
    return filtered[:h, :w]


def _masked_contrast(values: np.ndarray) -> np.ndarray:
    blur_fine = ndimage.gaussian_filter(values, sigma=2.0, radius=15, mode="nearest")
    blur_coarse = ndimage.gaussian_filter(values, sigma=4.0, radius=15, mode="nearest")
    contrast = np.abs(blur_fine - blur_coarse) / (np.abs(blur_coarse) + _QCB_MASK_Z)
    return contrast ** 3 / (contrast ** 2 + _QCB_MASK_Z)


def q_cb(f: ImagePlane, a: ImagePlane, b: ImagePlane) -> MetricResult:
    """Q_CB: saliency-weighted preservation of masked local contrast after
    contrast-sensitivity filtering."""
    vf, va, vb = _check_triple(f, a, b, 16, "q_cb")
    c_f = _masked_contrast(_csf_filter(vf, 30.0))
    c_a = _masked_contrast(_csf_filter(va, 30.0))
    c_b = _masked_contrast(_csf_filter(vb, 30.0))

    def preserved(c_x):
        hi = np.maximum(c_x, c_f)
        lo = np.minimum(c_x, c_f)
        return np.where(hi > 0.0, lo / np.where(hi > 0.0, hi, 1.0), 1.0)

    # Both saliency weights are divided out (rather than lam and 1-lam) so
    # swapping the sources permutes the terms bit-exactly.
    sal = c_a * c_a + c_b * c_b
    safe = np.where(sal > 0.0, sal, 1.0)
    lam_a = np.where(sal > 0.0, c_a * c_a / safe, 0.5)
    lam_b = np.where(sal > 0.0, c_b * c_b / safe, 0.5)
    score = lam_a * preserved(c_a) + lam_b * preserved(c_b)
    return MetricResult("QCB", float(score.mean()))


def _block_sums(values: np.ndarray, size: int) -> np.ndarray:
    h = values.shape[0] // size * size
    w = values.shape[1] // size * size
    blocks = values[:h, :w].reshape(h // size, size, w // size, size)
    return blocks.sum(axis=(1, 3))


def q_cv(f: ImagePlane, a: ImagePlane, b: ImagePlane) -> MetricResult:
    """Q_CV (lower better): edge-saliency-weighted mean-squared CSF-filtered
    difference between the fused image and each source, over 16x16 regions."""
    vf, va, vb = _check_triple(f, a, b, _QCV_REGION, "q_cv")

    def saliency(values):
        gx, gy = sobel_responses(values)
        return _block_sums(np.hypot(gx, gy) ** _QCV_ALPHA, _QCV_REGION)

    def region_error(values):
        filtered = _csf_filter(values - vf, 8.0)
        return _block_sums(filtered ** 2, _QCV_REGION) / float(_QCV_REGION ** 2)

    lam_a, lam_b = saliency(va), saliency(vb)
    weight_total = float(np.sum(lam_a + lam_b))
    if weight_total == 0.0:
        return MetricResult("QCV", 0.0)
    value = float(np.sum(lam_a * region_error(va) + lam_b * region_error(vb)) / weight_total)
    return MetricResult("QCV", value)


# ---------------------------------------------------------------------------
# Visual information fidelity (Q_VIFF)

def _vif_terms(x: np.ndarray, f: np.ndarray, kernel: np.ndarray):
    """Per-window visual-information terms of the GSM channel model:
    (information in the fused view of x, information in x, covariance)."""
    mu_x = convolve2d(x, kernel, mode="valid")
    mu_f = convolve2d(f, kernel, mode="valid")
    var_x = convolve2d(x * x, kernel, mode="valid") - mu_x * mu_x
    var_f = convolve2d(f * f, kernel, mode="valid") - mu_f * mu_f
    cov = convolve2d(x * f, kernel, mode="valid") - mu_x * mu_f

    gain = cov / (var_x + _VIF_EPS)
    noise = var_f - gain * cov
    gain = np.where(var_x < _VIF_EPS, 0.0, gain)
    noise = np.where(var_x < _VIF_EPS, var_f, noise)
    var_x = np.where(var_x < _VIF_EPS, 0.0, var_x)
    noise = np.where(var_f < _VIF_EPS, 0.0, noise)
    gain = np.where(var_f < _VIF_EPS, 0.0, gain)
    noise = np.where(gain < 0.0, var_f, noise)
    gain = np.where(gain < 0.0, 0.0, gain)
    noise = np.maximum(noise, _VIF_EPS)

    vid = np.log(1.0 + gain * gain * var_x / (noise + _VIF_NOISE_VAR))
    vind = np.log(1.0 + var_x / _VIF_NOISE_VAR)
    return vid, vind, cov


def q_viff(f: ImagePlane, a: ImagePlane, b: ImagePlane) -> MetricResult:
    """Q_VIFF: four-scale visual information fidelity adapted to fusion.

    Per scale, each sliding window is attributed to the source with the
    larger covariance with F (exact ties average both sources, keeping the
    A/B swap symmetric); the scale score is the ratio of summed fused-view
    information to summed source information, and scales contribute with
    uniform weight. Equals 1 when F matches both sources.
    """
    vf, va, vb = _check_triple(f, a, b, 17, "q_viff")
    ratios = []
    for scale in range(1, 5):
        size = 2 ** (4 - scale + 1) + 1
        kernel = _gaussian_kernel(size, size / 5.0)
        if scale > 1:
            if min(va.shape) < size:
                break
            va = convolve2d(va, kernel, mode="valid")[::2, ::2]
            vb = convolve2d(vb, kernel, mode="valid")[::2, ::2]
            vf = convolve2d(vf, kernel, mode="valid")[::2, ::2]
        if min(va.shape) < size:
            continue
        vid_a, vind_a, cov_a = _vif_terms(va, vf, kernel)
        vid_b, vind_b, cov_b = _vif_terms(vb, vf, kernel)
        tie = cov_a == cov_b
        take_a = cov_a > cov_b
        vid = np.where(tie, 0.5 * (vid_a + vid_b), np.where(take_a, vid_a, vid_b))
        vind = np.where(tie, 0.5 * (vind_a + vind_b), np.where(take_a, vind_a, vind_b))
        fvind = float(vind.sum())
        if fvind > 0.0:
            ratios.append(float(vid.sum()) / fvind)
    if not ratios:
        raise ContractError("q_viff: no analysis scale has usable windows")
    return MetricResult("QVIFF", float(np.mean(ratios)))


# ---------------------------------------------------------------------------
# Suite driver

_SINGLE_PLANE = {"EN": entropy, "AG": average_gradient,
                 "SD": standard_deviation, "SF": spatial_frequency}
_TRIPLE = {"MI": mutual_information, "FMI": feature_mutual_information,
           "PSNR": psnr, "QABF": q_abf, "QC": q_c, "SCD": scd,
           "CC": correlation_coefficient, "SSIM": ssim_fusion,
           "QCB": q_cb, "QCV": q_cv, "QVIFF": q_viff}


def evaluate_all(f: ImagePlane, a: ImagePlane, b: ImagePlane) -> list[MetricResult]:
    """All 15 metrics in canonical column order. Requires min dimension
    >= 17 (the largest analysis window in the suite)."""
    _check_triple(f, a, b, 17, "evaluate_all")
    results = []
    for metric in METRIC_ORDER:
        try:
            if metric in _SINGLE_PLANE:
                results.append(_SINGLE_PLANE[metric](f))
            else:
                results.append(_TRIPLE[metric](f, a, b))
        except ContractError as exc:
            raise ContractError(f"{metric}: {exc}") from exc
    return results
