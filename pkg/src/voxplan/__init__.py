"""voxplan: triangle mesh + object description -> multi-component robotic
assembly plan (structural cubes + functional panels).

Pipeline: load_mesh -> voxelize -> decompose_grid -> render / select
(VLM, rule-based, random) -> build_assembly -> sequence -> emit_program ->
simulate. A REST service, a CLI, and an evaluation-statistics module sit
on top; see README.md.
"""

from .decompose import (
    CellFace,
    Decomposition,
    Direction,
    FacePatch,
    OmissionReason,
    decompose_grid,
    exposed_faces,
    filter_and_label,
    merge_coplanar,
)
from .errors import VoxplanError
from .evalstats import (
    Method,
    ResponseTable,
    bonferroni,
    discordant_counts,
    mcnemar,
    selection_rates,
)
from .geometry import ComponentSpec, MeshFormat, TriangleMesh, VoxelGrid, load_mesh, voxelize
from .plan import (
    AssemblyModel,
    ComponentType,
    RobotProgram,
    SourceStation,
    StationId,
    build_assembly,
    emit_program,
    sequence,
    simulate,
)
from .render import AxonometricView, LabeledScene, project, render_raster, render_svg, standard_views
from .select import (
    LabelSet,
    PartList,
    Provenance,
    parse_labels,
    parse_parts,
    random_select,
    rule_based_select,
    validate_labels,
    vlm_feedback,
    vlm_map_labels,
    vlm_select_parts,
)
from .vlmclient import ChatVisionClient, HttpChatVisionClient, MockTranscriptClient

__version__ = "0.1.0"
