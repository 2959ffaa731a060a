# -*- coding: utf-8 -*-
"""Synthetic RGB-D scenes satisfying the pop-out prior: objects resting on a background plane, raised toward the
camera, with exact object masks and contact surfaces, plus a corruption model imitating source-free depth."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
import logging
import math
import os
import shutil
import numpy as np
import shapely
from shapely import affinity
from shapely.geometry import Point, Polygon, box
from scipy import ndimage
import popnet.settings as settings
from popnet.exceptions import ValidationError, DataError
from popnet.grids import SceneSample
from popnet.readwrite import write_sample, write_json
from popnet.utils import derive_seed, file_checksum


logger = logging.getLogger(__name__)

SHAPES = ("rectangle", "ellipse", "blob")
PLANE_MAX = 0.6
DELTA_MAX = 0.4


@dataclass(frozen=True)
class ObjectSpec:
    """One object of a scene: a shape of ``size = (height, width)`` pixels centered at ``center = (row, col)``,
    rotated by ``angle`` degrees and raised by ``delta`` above the background plane. ``seed`` draws the outline of
    blobs."""
    shape: str = "rectangle"
    center: tuple = (16.0, 16.0)
    size: tuple = (8.0, 8.0)
    delta: float = 0.2
    angle: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValidationError("Unknown shape '%s', expected one of %s" % (str(self.shape), str(SHAPES)))
        if not 0 < self.delta <= DELTA_MAX:
            raise ValidationError("Pop height delta must lie in (0, %s], got %s" % (str(DELTA_MAX), str(self.delta)))
        if min(self.size) <= 0:
            raise ValidationError("Object size must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        object.__setattr__(self, "size", tuple(float(v) for v in self.size))

    def geometry(self):
        """Return the outline as a shapely polygon in pixel coordinates (``x`` along columns, ``y`` along rows)."""
        row, col = self.center
        height, width = self.size
        if self.shape == "rectangle":
            outline = box(col - width / 2, row - height / 2, col + width / 2, row + height / 2)
        elif self.shape == "ellipse":
            outline = affinity.scale(Point(col, row).buffer(1.0, 32), xfact=width / 2, yfact=height / 2)
        else:
            rng = np.random.default_rng(self.seed)
            nb_vertices = 12
            angles = np.sort(rng.uniform(0, 2 * np.pi, nb_vertices))
            radii = rng.uniform(0.7, 1.0, nb_vertices)
            outline = Polygon(zip(col + radii * np.cos(angles) * width / 2, row + radii * np.sin(angles) * height / 2))
        if self.angle:
            outline = affinity.rotate(outline, self.angle, origin=(col, row))
        return outline


@dataclass(frozen=True)
class NoiseModel:
    """Source-free depth corruption: gaussian noise of standard deviation ``sigma``, gaussian blur of radius
    ``blur`` pixels, a smooth warp displacing pixels by up to about ``warp`` pixels and dropout of
    ``patch_size``-wide square patches with probability ``dropout``."""
    sigma: float = 0.0
    blur: float = 0.0
    warp: float = 0.0
    dropout: float = 0.0
    patch_size: int = 8

    def __post_init__(self):
        for name in ("sigma", "blur", "warp", "dropout"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValidationError("Noise parameter %s must be finite and non-negative" % name)
        if self.dropout > 1 or self.patch_size < 1:
            raise ValidationError("Dropout rate must be <= 1 and patch size >= 1")


@dataclass(frozen=True)
class SceneSpec:
    """A synthetic scene: a ``height x width`` canvas, a background plane of nearness ``a * x + b * y + c`` (``x``
    and ``y`` normalized to [0, 1], clipped to [0, 0.6]), objects, a texture seed, a camouflage level in [0, 1]
    blending object textures toward the background and the depth corruption."""
    height: int = 64
    width: int = 64
    plane: tuple = (0.0, 0.0, 0.3)
    objects: tuple = ()
    texture_seed: int = 0
    camouflage: float = 0.0
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if self.height < settings.MIN_GRID_SIZE or self.width < settings.MIN_GRID_SIZE:
            raise ValidationError("Canvas must be at least %dx%d" % (settings.MIN_GRID_SIZE, settings.MIN_GRID_SIZE))
        if not 0 <= self.camouflage <= 1:
            raise ValidationError("Camouflage level must lie in [0, 1]")
        object.__setattr__(self, "plane", tuple(float(v) for v in self.plane))
        object.__setattr__(self, "objects", tuple(self.objects))
        for obj in self.objects:
            min_x, min_y, max_x, max_y = obj.geometry().bounds
            if min_x < 0 or min_y < 0 or max_x > self.width or max_y > self.height:
                raise ValidationError("Object %s does not fit in the %dx%d canvas"
                                      % (str(obj), self.height, self.width))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict):
        data = dict(data)
        data["objects"] = tuple(ObjectSpec(**o) for o in data.get("objects", ()))
        data["noise"] = NoiseModel(**data.get("noise", {}))
        return cls(**data)


def rasterize(geometry, height: int, width: int) -> np.ndarray:
    """Return the boolean ``height x width`` support of a geometry: pixels whose center lies inside it."""
    rows, cols = np.mgrid[0:height, 0:width]
    return shapely.contains_xy(geometry, cols + 0.5, rows + 0.5)


def render_plane(spec: SceneSpec) -> np.ndarray:
    a, b, c = spec.plane
    rows, cols = np.mgrid[0:spec.height, 0:spec.width]
    x = cols / float(spec.width - 1)
    y = rows / float(spec.height - 1)
    return np.clip(a * x + b * y + c, 0.0, PLANE_MAX)


def render_ideal_depth(spec: SceneSpec) -> tuple:
    """Return ``(depth, mask, plane)`` as float64 arrays: the plane raised by ``delta`` inside each object (the
    highest ``delta`` wins where objects overlap), the union of the object supports and the plane."""
    plane = render_plane(spec)
    raise_map = np.zeros_like(plane)
    for obj in spec.objects:
        support = rasterize(obj.geometry(), spec.height, spec.width)
        raise_map[support] = np.maximum(raise_map[support], obj.delta)
    return plane + raise_map, (raise_map > 0).astype(np.float64), plane


def _texture(rng, height, width, color, scale, amplitude) -> np.ndarray:
    noise_field = ndimage.gaussian_filter(rng.normal(size=(height, width, 3)), sigma=(scale, scale, 0))
    noise_field /= noise_field.std() + 1e-12
    return color[None, None, :] + amplitude * noise_field


def render_rgb(spec: SceneSpec) -> np.ndarray:
    """Render the image of a scene: a smooth background texture and one texture per object, blended toward the
    background by the camouflage level. Objects are painted by increasing ``delta``."""
    rng = np.random.default_rng(spec.texture_seed)
    background = _texture(rng, spec.height, spec.width, rng.uniform(0.25, 0.75, 3), 4.0, 0.08)
    image = background.copy()
    for obj in sorted(spec.objects, key=lambda o: o.delta):
        texture = _texture(rng, spec.height, spec.width, rng.uniform(0.05, 0.95, 3), 1.5, 0.05)
        blended = (1 - spec.camouflage) * texture + spec.camouflage * background
        support = rasterize(obj.geometry(), spec.height, spec.width)
        image[support] = blended[support]
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def corrupt_depth(d, noise: NoiseModel, seed) -> np.ndarray:
    """Corrupt a nearness map: gaussian noise, then blur, warp and patch dropout, and finally clipping to [0, 1].

    Steps with a zero parameter are skipped, so the zero model only clips (identity on a valid map).
    """
    rng = np.random.default_rng(seed)
    out = np.asarray(d, dtype=np.float64).copy()
    height, width = out.shape
    if noise.sigma > 0:
        out += rng.normal(0.0, noise.sigma, out.shape)
    if noise.blur > 0:
        out = ndimage.gaussian_filter(out, noise.blur, mode="nearest")
    if noise.warp > 0:
        coarse = rng.normal(size=(2, 4, 4))
        displacements = [ndimage.zoom(c, (height / 4.0, width / 4.0), order=3) * noise.warp / 2 for c in coarse]
        rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
        out = ndimage.map_coordinates(out, [rows + displacements[0], cols + displacements[1]], order=1,
                                      mode="nearest")
    if noise.dropout > 0:
        cells = (-(-height // noise.patch_size), -(-width // noise.patch_size))
        dropped = rng.random(cells) < noise.dropout
        dropped = np.kron(dropped, np.ones((noise.patch_size, noise.patch_size), dtype=bool))[:height, :width]
        out[dropped] = out.mean()
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def make_scene(spec: SceneSpec, seed, stem="") -> tuple:
    """Generate a scene sample and its true contact surface.

    Parameters
    ----------
    spec : SceneSpec
        Scene description.
    seed : int
        Seed of the depth corruption. The image only depends on ``spec.texture_seed``.
    stem : str
        Name given to the sample. (Default value = "")

    Returns
    -------
    tuple
        ``(SceneSample, surface)`` where the sample holds the corrupted depth and the surface is the background plane.

    Examples
    --------
    >>> import popnet as pn
    >>> spec = pn.SceneSpec(objects=(pn.ObjectSpec(center=(20, 20), size=(10, 10), delta=0.2),))
    >>> sample, surface = pn.make_scene(spec, seed=0)
    >>> int(sample.mask.sum())
    100
    """
    depth, mask, plane = render_ideal_depth(spec)
    surface = plane.astype(np.float32)
    sample = SceneSample(rgb=render_rgb(spec), depth=corrupt_depth(depth, spec.noise, seed),
                         mask=mask.astype(np.float32), surface=surface, stem=stem)
    return sample, surface


def random_scene_spec(seed, size=64, min_objects=1, max_objects=3, camouflage=0.0, noise=NoiseModel()) -> SceneSpec:
    """Draw a random scene specification of a ``size x size`` canvas with ``min_objects`` to ``max_objects``
    objects."""
    rng = np.random.default_rng(seed)
    plane = (rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), rng.uniform(0.15, 0.4))
    objects = []
    for _ in range(int(rng.integers(min_objects, max_objects + 1))):
        shape = SHAPES[int(rng.integers(len(SHAPES)))]
        height, width = rng.integers(max(3, size // 8), max(4, size // 3), size=2)
        extent = math.hypot(height, width) / 2 + 1
        center = (rng.uniform(extent, size - extent), rng.uniform(extent, size - extent))
        angle = 0.0 if shape == "rectangle" else float(rng.uniform(0, 180))
        objects.append(ObjectSpec(shape=shape, center=center, size=(float(height), float(width)),
                                  delta=float(rng.uniform(0.1, DELTA_MAX)), angle=angle,
                                  seed=int(rng.integers(2 ** 31))))
    return SceneSpec(height=size, width=size, plane=plane, objects=tuple(objects),
                     texture_seed=int(rng.integers(2 ** 31)), camouflage=camouflage, noise=noise)


def random_scene_specs(n: int, seed, **kwargs) -> list:
    """Draw ``n`` scene specifications, the ``i``-th one from a seed derived from ``(seed, i)``. Keyword arguments
    are passed to ``random_scene_spec``."""
    return [random_scene_spec(derive_seed(seed, i, 1), **kwargs) for i in range(n)]


def _prepare_directory(out_dir, force):
    out_dir = str(out_dir)
    if os.path.isdir(out_dir) and os.listdir(out_dir):
        if not force:
            raise DataError("Directory '%s' is not empty (use force to overwrite)" % out_dir)
        for subdir in (settings.IMAGES_DIR, settings.DEPTHS_DIR, settings.GT_DEPTHS_DIR, settings.MASKS_DIR,
                       settings.SURFACES_DIR):
            shutil.rmtree(os.path.join(out_dir, subdir), ignore_errors=True)
    os.makedirs(out_dir, exist_ok=True)


def export_dataset(specs, out_dir, seed, force=False, workers=None) -> dict:
    """Generate scenes and write them as a dataset root with a JSON manifest.

    Scene ``i`` is named ``scene_{i:05d}`` and corrupted with a seed derived from ``(seed, i)``. The manifest
    records every spec, seed, object count and the SHA-256 checksum of every written file.

    Raises
    ------
    DataError
        If ``out_dir`` exists, is not empty and ``force`` is not set.
    """
    specs = list(specs)
    _prepare_directory(out_dir, force)

    def export(index):
        spec = specs[index]
        stem = "scene_%05d" % index
        scene_seed = derive_seed(seed, index)
        sample, _ = make_scene(spec, scene_seed, stem)
        ideal_depth, _, _ = render_ideal_depth(spec)
        paths = write_sample(out_dir, sample, gt_depth=ideal_depth)
        return {"stem": stem, "seed": scene_seed, "spec": spec.to_dict(), "scene_object_count": len(spec.objects),
                "checksums": {subdir: file_checksum(path) for subdir, path in sorted(paths.items())}}

    with ThreadPoolExecutor(max_workers=workers) as executor:
        scenes = list(executor.map(export, range(len(specs))))
    manifest = {"format_version": settings.DATASET_FORMAT_VERSION, "seed": int(seed), "count": len(scenes),
                "scenes": scenes}
    write_json(manifest, os.path.join(str(out_dir), settings.MANIFEST_FILE_NAME))
    logger.info("Exported %d scenes to %s", len(scenes), str(out_dir))
    return manifest
