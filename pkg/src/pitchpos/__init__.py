"""Player positions from broadcast soccer video: field registration, shot
classification, projection, team assignment and evaluation."""

from .camera import CameraPose, pose_to_homography, preset, sample_poses
from .field import FieldTemplate, render_edge_image, standard_field
from .registration import FeatureDB, RefinementParams, build_feature_db, refine_homography, register_frame

__all__ = ["CameraPose", "FeatureDB", "FieldTemplate", "RefinementParams", "build_feature_db",
           "pose_to_homography", "preset", "refine_homography", "register_frame", "render_edge_image",
           "sample_poses", "standard_field"]
