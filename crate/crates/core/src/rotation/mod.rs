//! Triplet clouds, rigid alignment and rotation bookkeeping.

mod estimator;
mod kabsch;
mod so3;
mod triplet;

pub use estimator::{estimate_relative, estimators, Corotated, EstimationContext, PlainKabsch, RotationEstimator};
pub use kabsch::{kabsch, kabsch_weighted, magnitude_weights, weighted_rms, RotationEstimate};
pub use so3::{
    accumulate, axis_angle_to_rot, exp_map, geodesic_error, nearest_rotation, rot_to_axis_angle,
    rotation_from_uniforms, ROTATION_TOL,
};
pub use triplet::{triplet_cloud, Triplet, TripletCloud};
