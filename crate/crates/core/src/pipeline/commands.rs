use std::path::Path;
use std::time::Instant;

use nalgebra::Matrix3;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::RunConfig;
use super::engine::Engine;
use super::plot::{line_plot, Series};
use super::report::{
    build_trajectory, write_csv, write_json, EvalReport, MethodSummary, StageTiming, Summary, Trajectory,
};
use crate::error::{Error, Result};
use crate::lbto::{feature_vector, split_dataset, train as fit_model, FeatureGroup, LbtoModel, Sample};
use crate::rotation::{estimators, kabsch_weighted, magnitude_weights, RotationEstimate, RotationEstimator};
use crate::sphere::{ShCoefficients, SphericalImage};
use crate::synth::{make_dataset, render_frames, Dataset};

/// Runs the command named in `cfg.command`; the returned value summarises
/// what was written.
pub fn run(cfg: &RunConfig) -> Result<Value> {
    cfg.validate()?;
    if matches!(cfg.command.as_str(), "estimate" | "eval") && cfg.out == cfg.data {
        return Err(Error::invalid(
            "output directory must differ from the dataset directory",
        ));
    }
    match cfg.command.as_str() {
        "precompute" => precompute(cfg),
        "gen-data" => gen_data(cfg),
        "estimate" => estimate(cfg),
        "train" => train(cfg),
        "eval" => eval(cfg),
        "bench" => bench(cfg),
        other => Err(Error::invalid(format!("unknown command '{other}'"))),
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn precompute(cfg: &RunConfig) -> Result<Value> {
    let t0 = Instant::now();
    let engine = Engine::build(cfg)?;
    let bytes = engine.cache.to_bytes()?;
    engine.cache.save(&cfg.cache)?;
    log::info!("wrote {} ({} bytes)", cfg.cache.display(), bytes.len());
    Ok(json!({
        "cache": cfg.cache,
        "bytes": bytes.len(),
        "table_entries": engine.table().len(),
        "table_order": engine.table().max_order(),
        "banks": engine.cache.banks.iter().map(|b| json!({
            "masks": b.len(),
            "degree": b.masks().iter().map(|m| m.poly.degree()).max(),
            "max_fit_residual": b.masks().iter().map(|m| m.poly.fit_residual()).fold(0.0, f64::max),
        })).collect::<Vec<_>>(),
        "seconds": t0.elapsed().as_secs_f64(),
    }))
}

pub fn gen_data(cfg: &RunConfig) -> Result<Value> {
    let t0 = Instant::now();
    let manifest = make_dataset(&cfg.dataset_config(), &cfg.out)?;
    Ok(json!({
        "dir": cfg.out,
        "frames": manifest.frame_count,
        "scenes": manifest.scenes.len(),
        "seconds": t0.elapsed().as_secs_f64(),
    }))
}

/// A dataset transformed into spherical harmonics.
struct Loaded {
    dataset: Dataset,
    coeffs: Vec<ShCoefficients>,
    gt_deltas: Vec<Matrix3<f64>>,
    gt_absolutes: Vec<Matrix3<f64>>,
    pairs: Vec<(usize, usize)>,
}

fn load_data(cfg: &RunConfig, engine: &Engine) -> Result<Loaded> {
    let dataset = Dataset::open(&cfg.data)?;
    let images = (0..dataset.len())
        .map(|n| {
            let img = dataset.load_image(n)?;
            check_grid(cfg, &img)?;
            Ok(img)
        })
        .collect::<Result<Vec<_>>>()?;
    let t0 = Instant::now();
    let coeffs = engine.transform_all(&images)?;
    log::info!("transformed {} frames in {:.1} ms", images.len(), ms(t0));
    let gt_deltas = dataset
        .ground_truth
        .iter()
        .map(|g| g.delta_matrix())
        .collect::<Result<Vec<_>>>()?;
    let gt_absolutes = dataset
        .ground_truth
        .iter()
        .map(|g| g.absolute_matrix())
        .collect::<Result<Vec<_>>>()?;
    let pairs = dataset.pairs();
    if pairs.is_empty() {
        return Err(Error::Data(format!("{} has no frame pairs", cfg.data.display())));
    }
    Ok(Loaded {
        dataset,
        coeffs,
        gt_deltas,
        gt_absolutes,
        pairs,
    })
}

fn check_grid(cfg: &RunConfig, img: &SphericalImage) -> Result<()> {
    let dims = img.grid().dims();
    if dims != cfg.grid {
        return Err(Error::GridMismatch {
            expected: cfg.grid,
            actual: dims,
        });
    }
    Ok(())
}

fn estimator(cfg: &RunConfig) -> Result<Box<dyn RotationEstimator>> {
    estimators().create(&cfg.estimator)
}

fn trajectory(data: &Loaded, estimates: &[RotationEstimate]) -> Result<Trajectory> {
    build_trajectory(
        data.dataset.len(),
        &data.pairs,
        estimates,
        &data.gt_deltas,
        &data.gt_absolutes,
    )
}

fn write_trajectory(out: &Path, name: &str, t: &Trajectory) -> Result<()> {
    write_csv(&out.join(format!("delta_{name}.csv")), &t.deltas)?;
    write_csv(&out.join(format!("absolute_{name}.csv")), &t.absolutes)
}

/// Median time of applying one bank to one frame.
fn masked_moment_timing(engine: &Engine, coeffs: &[ShCoefficients], group: FeatureGroup) -> Result<Summary> {
    let bank = engine.bank(group.range)?;
    let mut times = Vec::with_capacity(coeffs.len());
    for c in coeffs {
        let c = c.lowpass(group.cutoff);
        let t0 = Instant::now();
        std::hint::black_box(bank.masked_moments(&c)?);
        times.push(ms(t0));
    }
    Ok(Summary::of(&times))
}

pub fn estimate(cfg: &RunConfig) -> Result<Value> {
    let engine = Engine::load(cfg, &cfg.cache)?;
    let data = load_data(cfg, &engine)?;
    let est = estimator(cfg)?;
    let layout = cfg.feature_layout()?;
    let mut methods = Vec::new();
    for &group in &layout.groups {
        let t0 = Instant::now();
        let estimates = engine.estimate_pairs(&data.coeffs, &data.pairs, group, est.as_ref())?;
        let elapsed = ms(t0);
        let traj = trajectory(&data, &estimates)?;
        write_trajectory(&cfg.out, &group.to_string(), &traj)?;
        let summary = MethodSummary::of(group.to_string(), &traj);
        log::info!(
            "{group}: {} pairs in {elapsed:.1} ms, mean delta error {:.4} deg",
            estimates.len(),
            summary.delta_error_rad.mean.to_degrees()
        );
        methods.push(summary);
    }
    let timing = masked_moment_timing(&engine, &data.coeffs, layout.groups[0])?;
    log::info!("masked moments per frame: median {:.3} ms", timing.median);
    let summary = json!({
        "estimator": est.name(),
        "pairs": data.pairs.len(),
        "methods": methods,
        "masked_moments_ms": timing,
    });
    write_json(&cfg.out.join("summary.json"), &summary)?;
    write_json(&cfg.out.join("manifest.json"), cfg)?;
    Ok(summary)
}

/// Estimates for every pair, one entry per layout group.
fn pair_features(
    engine: &Engine,
    data: &Loaded,
    groups: &[FeatureGroup],
    est: &dyn RotationEstimator,
) -> Result<Vec<Vec<(FeatureGroup, RotationEstimate)>>> {
    let by_group = engine.estimate_groups(&data.coeffs, &data.pairs, groups, est)?;
    Ok((0..data.pairs.len())
        .map(|p| groups.iter().zip(&by_group).map(|(&g, e)| (g, e[p])).collect())
        .collect())
}

fn samples(
    model_layout: &crate::lbto::FeatureLayout,
    data: &Loaded,
    feats: &[Vec<(FeatureGroup, RotationEstimate)>],
) -> Result<Vec<Sample>> {
    data.pairs
        .iter()
        .zip(feats)
        .map(|(&(_, b), f)| {
            let t = crate::rotation::rot_to_axis_angle(&data.gt_deltas[b])?;
            Ok(Sample {
                features: feature_vector(model_layout, f)?,
                target: [t.x, t.y, t.z],
            })
        })
        .collect()
}

/// Pair indices of the train and test sides.
fn split(cfg: &RunConfig, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let idx: Vec<usize> = (0..n).collect();
    split_dataset(&idx, cfg.test_fraction, cfg.seed)
}

#[derive(Serialize)]
struct HistoryRow {
    epoch: usize,
    learning_rate: f64,
    train_loss: f64,
    val_loss: Option<f64>,
}

pub fn train(cfg: &RunConfig) -> Result<Value> {
    let engine = Engine::load(cfg, &cfg.cache)?;
    let data = load_data(cfg, &engine)?;
    let est = estimator(cfg)?;
    let layout = cfg.feature_layout()?;
    let t0 = Instant::now();
    let feats = pair_features(&engine, &data, &layout.groups, est.as_ref())?;
    log::info!("features for {} pairs in {:.1} ms", feats.len(), ms(t0));
    let all = samples(&layout, &data, &feats)?;
    let (train_idx, test_idx) = split(cfg, all.len())?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| all[i].clone()).collect::<Vec<_>>();
    let (train_set, test_set) = (pick(&train_idx), pick(&test_idx));
    let mut tcfg = cfg.train.clone();
    tcfg.seed = cfg.seed;
    let t0 = Instant::now();
    let (model, history) = fit_model(&LbtoModel::new(layout, cfg.seed)?, &train_set, &test_set, &tcfg)?;
    log::info!("trained {} epochs in {:.1} s", tcfg.epochs, t0.elapsed().as_secs_f64());
    model.save(&cfg.model)?;
    let rows: Vec<HistoryRow> = history
        .train_loss
        .iter()
        .enumerate()
        .map(|(e, &l)| HistoryRow {
            epoch: e + 1,
            learning_rate: history.learning_rate[e],
            train_loss: l,
            val_loss: history.val_loss[e],
        })
        .collect();
    write_csv(&cfg.out.join("training_history.csv"), &rows)?;
    let series = vec![
        Series {
            name: "train".into(),
            points: rows.iter().map(|r| (r.epoch as f64, r.train_loss)).collect(),
        },
        Series {
            name: "held-out".into(),
            points: rows
                .iter()
                .filter_map(|r| r.val_loss.map(|v| (r.epoch as f64, v)))
                .collect(),
        },
    ];
    write_svg(
        &cfg.out.join("training_history.svg"),
        &line_plot("Training loss", "epoch", "MSE (rad²)", &series),
    )?;
    Ok(json!({
        "model": cfg.model,
        "train_pairs": train_set.len(),
        "test_pairs": test_set.len(),
        "initial_train_mse": history.initial_train_loss,
        "final_train_mse": model.final_train_mse,
        "final_test_mse": model.final_val_mse,
        "swa_snapshots": history.swa_snapshots,
    }))
}

fn write_svg(path: &Path, svg: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct SweepRow {
    cutoff: usize,
    range: f64,
    mean_deg: f64,
    median_deg: f64,
    p95_deg: f64,
}

#[derive(Serialize)]
struct EvalFrameRow {
    frame_index: usize,
    gt_angle_deg: f64,
    analytical_error_deg: f64,
    lbto_error_deg: f64,
}

pub fn eval(cfg: &RunConfig) -> Result<Value> {
    let model = LbtoModel::load(&cfg.model)?;
    if !model.is_trained() {
        return Err(Error::Untrained);
    }
    let engine = Engine::load(cfg, &cfg.cache)?;
    let data = load_data(cfg, &engine)?;
    let est = estimator(cfg)?;
    let groups = &model.layout.groups;
    let feats = pair_features(&engine, &data, groups, est.as_ref())?;
    let (_, test_idx) = split(cfg, data.pairs.len())?;

    let test_errors = |pick: &dyn Fn(usize) -> Matrix3<f64>| -> Vec<f64> {
        test_idx
            .iter()
            .map(|&p| crate::rotation::geodesic_error(&data.gt_deltas[data.pairs[p].1], &pick(p)))
            .collect()
    };
    let mut sweep = Vec::new();
    let mut methods = Vec::new();
    for (gi, &g) in groups.iter().enumerate() {
        let errs = test_errors(&|p| feats[p][gi].1.matrix);
        let s = Summary::of(&errs);
        sweep.push(SweepRow {
            cutoff: g.cutoff,
            range: g.range,
            mean_deg: s.mean.to_degrees(),
            median_deg: s.median.to_degrees(),
            p95_deg: s.p95.to_degrees(),
        });
        let all: Vec<RotationEstimate> = feats.iter().map(|f| f[gi].1).collect();
        let mut m = MethodSummary::of(g.to_string(), &trajectory(&data, &all)?);
        m.delta_error_rad = s;
        methods.push(m);
    }
    let best = (0..groups.len())
        .min_by(|&a, &b| sweep[a].mean_deg.total_cmp(&sweep[b].mean_deg))
        .expect("layout has groups");

    let t0 = Instant::now();
    let refined = feats.iter().map(|f| model.refine(f)).collect::<Result<Vec<_>>>()?;
    let per_pair_ms = ms(t0) / feats.len() as f64;
    let lbto_errs = test_errors(&|p| refined[p].matrix);
    let mut lbto = MethodSummary::of("lbto", &trajectory(&data, &refined)?);
    lbto.delta_error_rad = Summary::of(&lbto_errs);

    let best_all: Vec<RotationEstimate> = feats.iter().map(|f| f[best].1).collect();
    let best_traj = trajectory(&data, &best_all)?;
    let lbto_traj = trajectory(&data, &refined)?;
    write_trajectory(&cfg.out, "best_analytical", &best_traj)?;
    write_trajectory(&cfg.out, "lbto", &lbto_traj)?;

    write_csv(&cfg.out.join("range_sweep.csv"), &sweep)?;
    let mut cutoffs: Vec<usize> = groups.iter().map(|g| g.cutoff).collect();
    cutoffs.dedup();
    let series: Vec<Series> = cutoffs
        .iter()
        .map(|&c| Series {
            name: format!("L = {c}"),
            points: sweep
                .iter()
                .filter(|r| r.cutoff == c)
                .map(|r| (r.range, r.mean_deg))
                .collect(),
        })
        .collect();
    write_svg(
        &cfg.out.join("range_sweep.svg"),
        &line_plot(
            "Mean relative error vs mask range",
            "mask range r",
            "error (deg)",
            &series,
        ),
    )?;

    let best_errs = test_errors(&|p| feats[p][best].1.matrix);
    let frames: Vec<EvalFrameRow> = test_idx
        .iter()
        .zip(best_errs.iter().zip(&lbto_errs))
        .map(|(&p, (&a, &l))| {
            let b = data.pairs[p].1;
            let gt = crate::rotation::rot_to_axis_angle(&data.gt_deltas[b]).map_or(f64::NAN, |v| v.norm());
            EvalFrameRow {
                frame_index: b,
                gt_angle_deg: gt.to_degrees(),
                analytical_error_deg: a.to_degrees(),
                lbto_error_deg: l.to_degrees(),
            }
        })
        .collect();
    write_csv(&cfg.out.join("eval_frames.csv"), &frames)?;
    let abs_series = |name: &str, t: &Trajectory| Series {
        name: name.into(),
        points: t
            .absolutes
            .iter()
            .map(|r| (r.frame_index as f64, r.geodesic_error_rad.to_degrees()))
            .collect(),
    };
    write_svg(
        &cfg.out.join("trajectory_comparison.svg"),
        &line_plot(
            "Accumulated rotation error",
            "frame",
            "error (deg)",
            &[
                abs_series("best analytical", &best_traj),
                abs_series("LbTO", &lbto_traj),
            ],
        ),
    )?;
    write_svg(
        &cfg.out.join("test_errors.svg"),
        &line_plot(
            "Held-out relative error",
            "frame",
            "error (deg)",
            &[
                Series {
                    name: "best analytical".into(),
                    points: frames
                        .iter()
                        .map(|r| (r.frame_index as f64, r.analytical_error_deg))
                        .collect(),
                },
                Series {
                    name: "LbTO".into(),
                    points: frames
                        .iter()
                        .map(|r| (r.frame_index as f64, r.lbto_error_deg))
                        .collect(),
                },
            ],
        ),
    )?;

    methods.push(lbto);
    let report = EvalReport {
        methods,
        best_analytical: groups[best].to_string(),
        test_pairs: test_idx.len(),
        timings: vec![StageTiming {
            stage: "lbto_inference".into(),
            ms: Summary::of(&[per_pair_ms]),
        }],
    };
    write_json(&cfg.out.join("eval_report.json"), &report)?;
    write_json(&cfg.out.join("manifest.json"), cfg)?;
    let best_mean = report.methods[best].delta_error_rad.mean.to_degrees();
    let lbto_mean = report
        .methods
        .last()
        .map_or(f64::NAN, |m| m.delta_error_rad.mean.to_degrees());
    Ok(json!({
        "best_analytical": report.best_analytical,
        "best_analytical_mean_deg": best_mean,
        "lbto_mean_deg": lbto_mean,
        "test_pairs": report.test_pairs,
    }))
}

#[derive(Serialize)]
struct BenchReport {
    frames: usize,
    group: FeatureGroup,
    estimator: String,
    stages: Vec<StageTiming>,
    total_ms: Summary,
    estimator_call_ms: Summary,
    machine: Value,
}

pub fn bench(cfg: &RunConfig) -> Result<Value> {
    let engine = if cfg.cache.exists() {
        Engine::load(cfg, &cfg.cache)?
    } else {
        log::warn!("{} not found; building the cache in memory", cfg.cache.display());
        Engine::build(cfg)?
    };
    let n = cfg.bench_frames.max(2);
    let dcfg = crate::synth::DatasetConfig {
        scenes: 1,
        frames_per_scene: n,
        ..cfg.dataset_config()
    };
    let (_, frames) = render_frames(&dcfg)?;
    let layout = cfg.feature_layout()?;
    let group = *layout.groups.last().expect("layout has groups");
    let bank = engine.bank(group.range)?;
    let est = estimator(cfg)?;
    let model = match LbtoModel::load(&cfg.model) {
        Ok(m) => m,
        Err(_) => {
            log::warn!("no model at {}; timing an untrained network", cfg.model.display());
            LbtoModel::new(layout.clone(), cfg.seed)?
        }
    };
    let ctx = crate::rotation::EstimationContext {
        bank,
        table: engine.table(),
    };
    let features = vec![0.0; model.layout.input_dim()];

    let mut stage_ms: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(n)).collect();
    let mut estimator_ms = Vec::with_capacity(n);
    let mut prev: Option<(ShCoefficients, Vec<nalgebra::Vector3<f64>>)> = None;
    for f in &frames {
        let t = Instant::now();
        let c = engine.transform(&f.image)?.lowpass(group.cutoff);
        stage_ms[0].push(ms(t));
        let t = Instant::now();
        let q = bank.masked_moments(&c)?;
        stage_ms[1].push(ms(t));
        if let Some((pc, p)) = &prev {
            let t = Instant::now();
            let w = magnitude_weights(p, &q)?;
            std::hint::black_box(kabsch_weighted(p, &q, &w)?);
            stage_ms[2].push(ms(t));
            let t = Instant::now();
            std::hint::black_box(model.predict(&features)?);
            stage_ms[3].push(ms(t));
            let t = Instant::now();
            std::hint::black_box(est.estimate(&ctx, pc, &c)?);
            estimator_ms.push(ms(t));
        }
        prev = Some((c, q));
    }
    let totals: Vec<f64> = (0..n - 1)
        .map(|i| stage_ms[0][i + 1] + stage_ms[1][i + 1] + stage_ms[2][i] + stage_ms[3][i])
        .collect();
    let names = ["sht", "masked_moments", "kabsch", "mlp_inference"];
    let report = BenchReport {
        frames: n,
        group,
        estimator: est.name().into(),
        stages: names
            .iter()
            .zip(&stage_ms)
            .map(|(s, v)| StageTiming {
                stage: (*s).into(),
                ms: Summary::of(v),
            })
            .collect(),
        total_ms: Summary::of(&totals),
        estimator_call_ms: Summary::of(&estimator_ms),
        machine: json!({
            "os": std::env::consts::OS,
            "arch": std::env::consts::ARCH,
            "available_parallelism": std::thread::available_parallelism().map_or(1, |p| p.get()),
            "rayon_threads": rayon::current_num_threads(),
            "grid": cfg.grid,
            "bandwidth": cfg.bandwidth,
            "masks": bank.len(),
        }),
    };
    write_json(&cfg.out.join("bench.json"), &report)?;
    serde_json::to_value(&report).map_err(|source| Error::Json {
        path: cfg.out.join("bench.json"),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> RunConfig {
        RunConfig {
            bandwidth: 12,
            grid: (48, 96),
            masks: 20,
            ranges: vec![0.3, 0.5],
            cutoffs: vec![12],
            frames: 12,
            max_step_deg: 4.0,
            out: dir.join("out"),
            cache: dir.join("c.fvgc"),
            model: dir.join("m.json"),
            data: dir.join("data"),
            bench_frames: 3,
            fit: crate::mask::FitOptions {
                max_degree: 12,
                ..Default::default()
            },
            train: crate::lbto::TrainConfig {
                epochs: 4,
                batch_size: 4,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn commands_chain() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = small(tmp.path());
        let gen = RunConfig {
            command: "gen-data".into(),
            out: cfg.data.clone(),
            ..cfg.clone()
        };
        run(&gen).unwrap();
        for cmd in ["precompute", "estimate", "train", "eval", "bench"] {
            cfg.command = cmd.into();
            run(&cfg).unwrap_or_else(|e| panic!("{cmd}: {e}"));
        }
        cfg.out = cfg.data.clone();
        cfg.command = "estimate".into();
        assert!(run(&cfg).is_err());
        let out = &tmp.path().join("out");
        for f in [
            "delta_L12_r0.3.csv",
            "absolute_L12_r0.5.csv",
            "summary.json",
            "training_history.csv",
            "range_sweep.csv",
            "range_sweep.svg",
            "eval_report.json",
            "eval_frames.csv",
            "bench.json",
        ] {
            assert!(
                out.join(f).exists(),
                "{f} missing from {:?}",
                std::fs::read_dir(out)
                    .unwrap()
                    .map(|e| e.unwrap().file_name())
                    .collect::<Vec<_>>()
            );
        }
        let rows =
            super::super::report::read_csv::<super::super::report::TrajectoryRow>(&out.join("delta_L12_r0.5.csv"))
                .unwrap();
        assert_eq!(rows.len(), 11);
    }

    #[test]
    fn missing_cache_is_a_data_error() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = small(tmp.path());
        cfg.command = "estimate".into();
        let e = run(&cfg).unwrap_err();
        assert_eq!(e.category(), crate::ErrorCategory::Data);
    }
}
