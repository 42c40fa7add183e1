use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::{make_scene, render, SceneFunction, Visibility, DEFAULT_BLOBS};
use super::sequence::{random_rotation_sequence, DEFAULT_FRAMES, DEFAULT_MAX_STEP_DEG};
use crate::error::{Error, Result};
use crate::rotation::{axis_angle_to_rot, rot_to_axis_angle};
use crate::sphere::{EquirectGrid, SphericalImage};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub scenes: usize,
    pub frames_per_scene: usize,
    pub max_step_deg: f64,
    pub height: usize,
    pub width: usize,
    pub visibility: Visibility,
    pub seed: u64,
    pub blobs: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            scenes: 1,
            frames_per_scene: DEFAULT_FRAMES,
            max_step_deg: DEFAULT_MAX_STEP_DEG,
            height: 128,
            width: 256,
            visibility: Visibility::WholeSphere,
            seed: 0,
            blobs: DEFAULT_BLOBS,
        }
    }
}

impl DatasetConfig {
    pub fn frame_count(&self) -> usize {
        self.scenes * self.frames_per_scene
    }

    /// Adjacent same-scene frame pairs `(n - 1, n)`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.frame_count())
            .filter(|n| n % self.frames_per_scene != 0)
            .map(|n| (n - 1, n))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.scenes == 0 || self.frames_per_scene == 0 {
            return Err(Error::invalid("dataset needs at least one scene and one frame"));
        }
        EquirectGrid::new(self.height, self.width)?;
        Ok(())
    }
}

/// One rendered frame with its ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticFrame {
    pub scene: usize,
    pub rotation: Matrix3<f64>,
    pub delta: Matrix3<f64>,
    pub image: SphericalImage,
}

/// Scenes, rotation sequences and renders, kept in memory.
pub fn render_frames(cfg: &DatasetConfig) -> Result<(Vec<SceneFunction>, Vec<SyntheticFrame>)> {
    cfg.validate()?;
    let grid = Arc::new(EquirectGrid::new(cfg.height, cfg.width)?);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut scenes = Vec::with_capacity(cfg.scenes);
    let mut poses = Vec::with_capacity(cfg.frame_count());
    for s in 0..cfg.scenes {
        let scene = make_scene(rng.random(), cfg.blobs)?;
        let seq = random_rotation_sequence(cfg.frames_per_scene, cfg.max_step_deg, rng.random())?;
        poses.extend(seq.rotations.into_iter().zip(seq.deltas).map(|(r, d)| (s, r, d)));
        scenes.push(scene);
    }
    let frames = poses
        .into_par_iter()
        .map(|(s, rotation, delta)| SyntheticFrame {
            scene: s,
            rotation,
            delta,
            image: render(&scenes[s], &rotation, &grid, cfg.visibility),
        })
        .collect();
    Ok((scenes, frames))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub config: DatasetConfig,
    pub frame_count: usize,
    pub images: Vec<String>,
    pub scenes: Vec<SceneFunction>,
}

/// One `ground_truth.csv` row; axis-angle vectors in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRow {
    pub frame: usize,
    pub abs_x: f64,
    pub abs_y: f64,
    pub abs_z: f64,
    pub delta_x: f64,
    pub delta_y: f64,
    pub delta_z: f64,
}

impl GroundTruthRow {
    pub fn absolute(&self) -> Vector3<f64> {
        Vector3::new(self.abs_x, self.abs_y, self.abs_z)
    }

    pub fn delta(&self) -> Vector3<f64> {
        Vector3::new(self.delta_x, self.delta_y, self.delta_z)
    }

    pub fn absolute_matrix(&self) -> Result<Matrix3<f64>> {
        axis_angle_to_rot(&self.absolute())
    }

    pub fn delta_matrix(&self) -> Result<Matrix3<f64>> {
        axis_angle_to_rot(&self.delta())
    }
}

pub fn image_file_name(frame: usize) -> String {
    format!("frame_{frame:05}.pgm")
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

/// Renders the dataset and writes images, `manifest.json` and `ground_truth.csv`.
pub fn make_dataset(cfg: &DatasetConfig, dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (scenes, frames) = render_frames(cfg)?;
    let images: Vec<String> = (0..frames.len()).map(image_file_name).collect();
    frames
        .par_iter()
        .zip(&images)
        .try_for_each(|(f, name)| f.image.save_pgm16(dir.join(name)))?;

    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let mut w = csv::Writer::from_path(&gt_path).map_err(|e| csv_error(&gt_path, e))?;
    for (n, f) in frames.iter().enumerate() {
        let a = rot_to_axis_angle(&f.rotation)?;
        let d = rot_to_axis_angle(&f.delta)?;
        w.serialize(GroundTruthRow {
            frame: n,
            abs_x: a.x,
            abs_y: a.y,
            abs_z: a.z,
            delta_x: d.x,
            delta_y: d.y,
            delta_z: d.z,
        })
        .map_err(|e| csv_error(&gt_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&gt_path, e))?;

    let manifest = DatasetManifest {
        format_version: DATASET_FORMAT_VERSION,
        config: cfg.clone(),
        frame_count: frames.len(),
        images,
        scenes,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    log::info!("wrote {} frames to {}", manifest.frame_count, dir.display());
    Ok(manifest)
}

/// A dataset directory opened for reading.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub ground_truth: Vec<GroundTruthRow>,
}

impl Dataset {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let mpath = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: mpath.clone(),
            source,
        })?;
        let gpath = dir.join(GROUND_TRUTH_FILE);
        let mut reader = csv::Reader::from_path(&gpath).map_err(|e| csv_error(&gpath, e))?;
        let ground_truth = reader
            .deserialize()
            .collect::<std::result::Result<Vec<GroundTruthRow>, _>>()
            .map_err(|e| csv_error(&gpath, e))?;
        if ground_truth.len() != manifest.frame_count || manifest.images.len() != manifest.frame_count {
            return Err(Error::Data(format!(
                "{}: manifest lists {} frames, ground truth has {} rows and {} images",
                dir.display(),
                manifest.frame_count,
                ground_truth.len(),
                manifest.images.len()
            )));
        }
        Ok(Self {
            dir,
            manifest,
            ground_truth,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.frame_count
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frame_count == 0
    }

    pub fn image_path(&self, frame: usize) -> PathBuf {
        self.dir.join(&self.manifest.images[frame])
    }

    pub fn load_image(&self, frame: usize) -> Result<SphericalImage> {
        SphericalImage::load(self.image_path(frame))
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.manifest.config.pairs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::geodesic_error;

    fn small() -> DatasetConfig {
        DatasetConfig {
            scenes: 2,
            frames_per_scene: 6,
            height: 16,
            width: 32,
            ..Default::default()
        }
    }

    #[test]
    fn pair_counting() {
        assert_eq!(DatasetConfig::default().pairs().len(), 499);
        let p = small().pairs();
        assert_eq!(p.len(), 10);
        assert!(!p.contains(&(5, 6)));
    }

    #[test]
    fn write_and_reopen() {
        let tmp = tempfile::tempdir().unwrap();
        let m = make_dataset(&small(), tmp.path()).unwrap();
        let ds = Dataset::open(tmp.path()).unwrap();
        assert_eq!(ds.manifest, m);
        assert_eq!(ds.len(), 12);
        let img = ds.load_image(3).unwrap();
        assert_eq!(img.grid().dims(), (16, 32));
        let (_, frames) = render_frames(&small()).unwrap();
        for (a, b) in img.values().iter().zip(frames[3].image.values()) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-12);
        }
        for (n, row) in ds.ground_truth.iter().enumerate() {
            assert_eq!(row.frame, n);
            if n % 6 == 0 {
                assert_eq!(row.delta(), Vector3::zeros());
                continue;
            }
            let prev = ds.ground_truth[n - 1].absolute_matrix().unwrap();
            let d = row.absolute_matrix().unwrap() * prev.transpose();
            assert!((d - row.delta_matrix().unwrap()).abs().max() < 1e-12);
        }
        // regenerating from the manifest reproduces the labels
        let again = tempfile::tempdir().unwrap();
        make_dataset(&ds.manifest.config, again.path()).unwrap();
        assert_eq!(Dataset::open(again.path()).unwrap().ground_truth, ds.ground_truth);
        assert!(geodesic_error(&frames[1].delta, &Matrix3::identity()) > 0.0);
    }

    #[test]
    fn missing_directory_names_the_path() {
        let err = Dataset::open("/nonexistent/fvg-data").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/fvg-data/manifest.json"));
    }
}
