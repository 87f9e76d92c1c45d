"""Multi-view implicit occupancy: feature extraction, view-averaged
features, occupancy scoring, and in-segment offset scoring.

Two interchangeable backends:
  - AnalyticOccupancyField: logistic(-sdf / tau) over an analytic scene;
    the correctness oracle. Offsets come from bisecting the 0.5 level.
  - MultiViewMlpField: per-view feature maps + small MLPs for the
    occupancy head (logistic output) and offset head (tanh output).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .cameras import Camera, project_many
from .errors import ConfigError, InputError, NoCrossingError, ParseError, ShapeError

FEATURE_CHANNELS = 7
BISECTION_ITERS = 20

_MLP_MAGIC = b"MLPW"
_ACT_CODES = {"logistic": 0, "tanh": 1}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


def logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


@dataclass(frozen=True)
class FeatureMap:
    values: np.ndarray  # (H, W, C) float64

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.ndim != 3 or vals.shape[2] < 1:
            raise ShapeError("feature map must be (H, W, C) with C >= 1")
        if not np.all(np.isfinite(vals)):
            raise InputError("feature map contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def channels(self):
        return self.values.shape[2]


def extract_features(image: np.ndarray, mask: np.ndarray) -> FeatureMap:
    """Hand-crafted 7-channel reference feature extractor.

    Channels: RGB, foreground flag, distance-to-silhouette (euclidean
    distance transform of the foreground, normalized by the image
    diagonal), and |dI/dx|, |dI/dy| of the luminance.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        image = np.repeat(image[:, :, None], 3, axis=2)
    mask = np.asarray(mask).astype(bool)
    if image.shape[:2] != mask.shape:
        raise ConfigError(f"image {image.shape[:2]} vs mask {mask.shape} dimension mismatch")
    h, w = mask.shape
    fg = mask.astype(np.float64)
    dist = ndimage.distance_transform_edt(mask) / np.hypot(w, h)
    lum = image @ np.array([0.299, 0.587, 0.114])
    gx = np.zeros_like(lum)
    gy = np.zeros_like(lum)
    gx[:, 1:-1] = np.abs(lum[:, 2:] - lum[:, :-2]) * 0.5
    gy[1:-1, :] = np.abs(lum[2:, :] - lum[:-2, :]) * 0.5
    return FeatureMap(np.stack([image[:, :, 0], image[:, :, 1], image[:, :, 2], fg, dist, gx, gy], axis=2))


def bilinear_sample(raster: np.ndarray, pixels: np.ndarray):
    """Bilinear sample of an (H, W[, C]) raster at (N, 2) pixel coords.

    Returns (values, valid); valid is False where the sample point lies
    outside [0, W-1] x [0, H-1]. Out-of-range points are clamped before
    the gather so the returned values stay finite.
    """
    raster = np.asarray(raster, dtype=np.float64)
    squeeze = raster.ndim == 2
    if squeeze:
        raster = raster[:, :, None]
    h, w, _ = raster.shape
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    u = pixels[:, 0]
    v = pixels[:, 1]
    valid = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    uc = np.clip(u, 0, w - 1)
    vc = np.clip(v, 0, h - 1)
    u0 = np.clip(np.floor(uc).astype(np.int64), 0, w - 2) if w > 1 else np.zeros(len(u), np.int64)
    v0 = np.clip(np.floor(vc).astype(np.int64), 0, h - 2) if h > 1 else np.zeros(len(v), np.int64)
    fu = (uc - u0)[:, None]
    fv = (vc - v0)[:, None]
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    vals = (
        raster[v0, u0] * (1 - fu) * (1 - fv)
        + raster[v0, u1] * fu * (1 - fv)
        + raster[v1, u0] * (1 - fu) * fv
        + raster[v1, u1] * fu * fv
    )
    if squeeze:
        vals = vals[:, 0]
    return vals, valid


@dataclass(frozen=True)
class MlpWeights:
    matrices: tuple  # layer i: (dims[i+1], dims[i]) float32
    biases: tuple  # layer i: (dims[i+1],) float32
    final_activation: str  # "logistic" | "tanh"

    def __post_init__(self):
        if self.final_activation not in _ACT_CODES:
            raise ConfigError(f"unknown final activation '{self.final_activation}'")
        mats = tuple(np.ascontiguousarray(m, dtype=np.float32) for m in self.matrices)
        biases = tuple(np.ascontiguousarray(b, dtype=np.float32) for b in self.biases)
        if len(mats) != len(biases) or not mats:
            raise ConfigError("need one bias vector per weight matrix")
        for i, (m, b) in enumerate(zip(mats, biases)):
            if m.ndim != 2 or b.ndim != 1 or m.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {i}: matrix {m.shape} incompatible with bias {b.shape}")
            if i > 0 and m.shape[1] != mats[i - 1].shape[0]:
                raise ShapeError(f"layer {i}: input dim {m.shape[1]} != previous output {mats[i-1].shape[0]}")
            if not (np.all(np.isfinite(m)) and np.all(np.isfinite(b))):
                raise InputError(f"layer {i}: non-finite weights")
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "biases", biases)

    @property
    def layer_dims(self):
        return [self.matrices[0].shape[1]] + [m.shape[0] for m in self.matrices]


def mlp_forward(weights: MlpWeights, inputs: np.ndarray) -> np.ndarray:
    """Affine + rectifier chain; final activation per the weight record."""
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    x = x.reshape(1, -1) if single else x
    if x.shape[1] != weights.layer_dims[0]:
        raise ShapeError(f"input dim {x.shape[1]} != first layer dim {weights.layer_dims[0]}")
    n_layers = len(weights.matrices)
    for i, (m, b) in enumerate(zip(weights.matrices, weights.biases)):
        x = x @ m.T.astype(np.float64) + b.astype(np.float64)
        if i < n_layers - 1:
            x = np.maximum(x, 0.0)
    out = logistic(x) if weights.final_activation == "logistic" else np.tanh(x)
    return out[0] if single else out


def save_mlp(weights: MlpWeights, path) -> None:
    dims = weights.layer_dims
    with open(path, "wb") as f:
        f.write(_MLP_MAGIC)
        f.write(struct.pack("<IB", 1, _ACT_CODES[weights.final_activation]))
        f.write(struct.pack("<I", len(weights.matrices)))
        f.write(struct.pack(f"<{len(dims)}I", *dims))
        for m, b in zip(weights.matrices, weights.biases):
            f.write(m.astype("<f4").tobytes())
            f.write(b.astype("<f4").tobytes())


def load_mlp(path) -> MlpWeights:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != _MLP_MAGIC:
        raise ParseError(f"{path}: bad magic {blob[:4]!r}")
    try:
        version, act_code = struct.unpack_from("<IB", blob, 4)
        if version != 1:
            raise ParseError(f"{path}: unsupported version {version}")
        if act_code not in _ACT_NAMES:
            raise ParseError(f"{path}: unknown activation code {act_code}")
        (n_layers,) = struct.unpack_from("<I", blob, 9)
        dims = struct.unpack_from(f"<{n_layers + 1}I", blob, 13)
        offset = 13 + 4 * (n_layers + 1)
        matrices = []
        biases = []
        for i in range(n_layers):
            m_count = dims[i + 1] * dims[i]
            m = np.frombuffer(blob, dtype="<f4", count=m_count, offset=offset)
            offset += 4 * m_count
            b = np.frombuffer(blob, dtype="<f4", count=dims[i + 1], offset=offset)
            offset += 4 * dims[i + 1]
            matrices.append(m.reshape(dims[i + 1], dims[i]))
            biases.append(b)
    except (struct.error, ValueError) as e:
        raise ParseError(f"{path}: truncated or malformed weight file: {e}") from e
    if offset != len(blob):
        raise ParseError(f"{path}: {len(blob) - offset} trailing bytes")
    return MlpWeights(tuple(matrices), tuple(biases), _ACT_NAMES[act_code])


class OccupancyField:
    """Interface: batched occupancy in [0,1] and segment offsets in [-1,1].

    Implementations count occupancy evaluations (eval_count) so pruning
    and early-termination tests can audit the work done.
    """

    backend = "abstract"

    def __init__(self):
        self.eval_count = 0

    def reset_eval_count(self):
        self.eval_count = 0

    def occupancy_many(self, points: np.ndarray, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def offset_many(self, x_a: np.ndarray, x_b: np.ndarray):
        """Per-segment offset o in [-1, 1] plus an ok flag per segment."""
        raise NotImplementedError


class AnalyticOccupancyField(OccupancyField):
    backend = "analytic-oracle"

    def __init__(self, scene, tau: float):
        super().__init__()
        if tau <= 0:
            raise ConfigError("tau must be positive")
        self.scene = scene
        self.tau = tau

    def occupancy_many(self, points, z=None):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise InputError("occupancy requires finite query points")
        self.eval_count += len(points)
        from .scenes import scene_sdf

        return logistic(-scene_sdf(self.scene, points) / self.tau)

    def offset_many(self, x_a, x_b):
        """Bisect the 0.5-occupancy crossing on each segment.

        The crossing fraction u in [0, 1] maps linearly to o = 2u - 1.
        Segments without a sign change are flagged not-ok.
        """
        x_a = np.asarray(x_a, dtype=np.float64).reshape(-1, 3)
        x_b = np.asarray(x_b, dtype=np.float64).reshape(-1, 3)
        s_a = self.occupancy_many(x_a)
        s_b = self.occupancy_many(x_b)
        ok = (s_a < 0.5) & (s_b >= 0.5)
        lo = np.zeros(len(x_a))
        hi = np.ones(len(x_a))
        for _ in range(BISECTION_ITERS):
            mid = 0.5 * (lo + hi)
            pts = x_a + mid[:, None] * (x_b - x_a)
            inside = self.occupancy_many(pts) >= 0.5
            hi = np.where(inside, mid, hi)
            lo = np.where(inside, lo, mid)
        u = 0.5 * (lo + hi)
        return 2.0 * u - 1.0, ok


class MultiViewMlpField(OccupancyField):
    """Pixel-aligned occupancy from per-view features and loaded MLPs."""

    backend = "multi-view-mlp"

    def __init__(self, cameras, feature_maps, f_weights: MlpWeights, h_weights: MlpWeights):
        super().__init__()
        if len(cameras) < 1 or len(cameras) != len(feature_maps):
            raise ConfigError("need one feature map per camera")
        channels = feature_maps[0].channels
        for fm in feature_maps:
            if fm.channels != channels:
                raise ConfigError("feature maps disagree on channel count")
        if f_weights.final_activation != "logistic":
            raise ConfigError("occupancy head must end in a logistic")
        if h_weights.final_activation != "tanh":
            raise ConfigError("offset head must end in a tanh")
        if f_weights.layer_dims[0] != channels + 1:
            raise ShapeError(f"occupancy head expects {channels + 1} inputs, has {f_weights.layer_dims[0]}")
        if h_weights.layer_dims[0] != channels:
            raise ShapeError(f"offset head expects {channels} inputs, has {h_weights.layer_dims[0]}")
        self.cameras = tuple(cameras)
        self.feature_maps = tuple(feature_maps)
        self.f_weights = f_weights
        self.h_weights = h_weights
        self.channels = channels

    def mean_features(self, points: np.ndarray) -> np.ndarray:
        """View-averaged pixel-aligned features (phi).

        Views where a point projects out of bounds or behind the camera
        are excluded from the mean; points no view sees get zeros.
        """
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        total = np.zeros((len(points), self.channels))
        count = np.zeros(len(points))
        for cam, fmap in zip(self.cameras, self.feature_maps):
            pixels, z, in_front = project_many(cam, points)
            vals, in_bounds = bilinear_sample(fmap.values, pixels)
            use = in_front & in_bounds
            total[use] += vals[use]
            count[use] += 1.0
        seen = count > 0
        total[seen] /= count[seen, None]
        total[~seen] = 0.0
        return total

    def occupancy_many(self, points, z):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise InputError("occupancy requires finite query points")
        z = np.broadcast_to(np.asarray(z, dtype=np.float64), (len(points),))
        self.eval_count += len(points)
        feats = self.mean_features(points)
        seen = np.abs(feats).sum(axis=1) > 0
        out = np.zeros(len(points))
        if seen.any():
            x = np.concatenate([feats[seen], z[seen, None]], axis=1)
            out[seen] = mlp_forward(self.f_weights, x).reshape(-1)
        return out

    def offset_many(self, x_a, x_b):
        x_a = np.asarray(x_a, dtype=np.float64).reshape(-1, 3)
        x_b = np.asarray(x_b, dtype=np.float64).reshape(-1, 3)
        mid = 0.5 * (x_a + x_b)
        feats = self.mean_features(mid)
        o = mlp_forward(self.h_weights, feats).reshape(-1)
        return o, np.ones(len(o), dtype=bool)


def phi(field: MultiViewMlpField, point) -> np.ndarray:
    """View-averaged feature vector at one 3D point."""
    return field.mean_features(np.asarray(point, dtype=np.float64).reshape(1, 3))[0]


def occupancy(field: OccupancyField, point, z: float = 0.0) -> float:
    return float(field.occupancy_many(np.asarray(point, dtype=np.float64).reshape(1, 3), np.asarray([z]))[0])


def offset(field: OccupancyField, x_a, x_b) -> float:
    o, ok = field.offset_many(
        np.asarray(x_a, dtype=np.float64).reshape(1, 3),
        np.asarray(x_b, dtype=np.float64).reshape(1, 3),
    )
    if not ok[0]:
        raise NoCrossingError("occupancy does not cross 0.5 on the segment")
    return float(o[0])
