"""Profile-aware saliency enhancement for BIM construction-site renders."""
from .attention import ConspicuitySet, normalize_map
from .enhancer import EnhancementReport, RegionStats, TargetColor, enhance, pick_target, recolor_pass, region_stats
from .errors import SceneError
from .perspective import VanishingPoint, detect_vanishing_point, perspective_orientation_conspicuity
from .profiles import ElementCatalog, Profile, Rule, classify, default_profiles, relevance_masks
from .saliency import combine, compute_saliency
from .scene_io import SceneBundle, load_bundle, save_bundle_outputs

__version__ = "0.1.0"

__all__ = [
    "ConspicuitySet", "EnhancementReport", "ElementCatalog", "Profile", "RegionStats", "Rule",
    "SceneBundle", "SceneError", "TargetColor", "VanishingPoint", "classify", "combine",
    "compute_saliency", "default_profiles", "detect_vanishing_point", "enhance", "load_bundle",
    "normalize_map", "perspective_orientation_conspicuity", "pick_target", "recolor_pass",
    "region_stats", "relevance_masks", "save_bundle_outputs",
]
