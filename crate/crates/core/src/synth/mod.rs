//! Synthetic spherical scenes with exact ground-truth rotations.

mod dataset;
mod scene;
mod sequence;

pub use dataset::{
    image_file_name, make_dataset, render_frames, Dataset, DatasetConfig, DatasetManifest, GroundTruthRow,
    SyntheticFrame, DATASET_FORMAT_VERSION, GROUND_TRUTH_FILE, MANIFEST_FILE,
};
pub use scene::{
    make_scene, render, unit_gaussian_vector, Blob, SceneFunction, Visibility, DEFAULT_BLOBS, MAX_BLOB_WIDTH,
    MIN_BLOB_WIDTH,
};
pub use sequence::{random_rotation_sequence, GroundTruthSequence, DEFAULT_FRAMES, DEFAULT_MAX_STEP_DEG};
