"""splatcache: a point-cloud cache guidance engine.

Build colored point caches from posed RGB-D frames, splat them along camera
trajectories into guidance frames with disocclusion masks, fuse multi-view
renders in a toy latent space, align estimated depth in closed form, and
drive chunked autoregressive generation with cache updates.
"""

from ._kernels import BACKEND
from .align import Alignment, NoiseSpec, add_depth_noise, align_depth, apply_alignment
from .cache import (
    Cache3D,
    DepthMap,
    PointCloud,
    PostedFrame,
    append_view,
    broadcast_temporal,
    build_dynamic,
    build_multiview,
    build_single,
    load_cache,
    save_cache,
    slice_time,
    unproject_frame,
)
from .errors import DegenerateGeometry, IllPosedFit, InvalidInput, PipelineError
from .fusion import (
    FusedFeatures,
    GeneratorInterface,
    InLayerWeights,
    LatentMask,
    LatentReconcileGenerator,
    LatentVideo,
    NoiseSchedulePoint,
    PixelStubGenerator,
    downsample_mask,
    encode,
    fuse_concat,
    fuse_explicit,
    fuse_max,
    generate,
    in_layer,
    make_noisy_latent,
    masked_latent,
    video_latent_mask,
)
from .geometry import (
    Camera,
    Intrinsics,
    PluckerMap,
    Pose,
    Trajectory,
    interpolate_trajectory,
    offset_trajectory,
    plucker_map,
    project,
    project_points,
    unproject,
    unproject_pixels,
)
from .metrics import (
    MetricReport,
    epipolar_consistency,
    fundamental_matrix,
    psnr,
    ssim,
    video_report,
)
from .pipeline import (
    AutoregressResult,
    ChunkPlan,
    DirectoryDepthProvider,
    OracleDepthProvider,
    PairedSample,
    curate_pair,
    plan_chunks,
    run_autoregressive,
)
from .splat import (
    GuidanceVideo,
    RenderedFrame,
    Z_EPSILON,
    Z_NEAR,
    render,
    render_depth,
    render_guidance,
)
from .synthworld import (
    Primitive,
    Scene,
    SceneSpec,
    Texture,
    make_scene,
    posed_frame,
    raster_ground_truth,
    scene_from_json,
    scene_to_json,
)

__version__ = "0.1.0"
