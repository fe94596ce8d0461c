use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use tofhair_core::crf::{
    gibbs_energy_capped, grid_search_params, map_labeling, mean_field_infer_with,
    merge_hair_labels, merge_region_labeling, merged_labels, six_class_labels, ExtraFeature,
    FeatureField, Instance, Labeling, UnaryField,
};
use tofhair_core::geomfeat::{
    build_hva, direction_map, fill_holes, register_depth_to_rgb, sobel_gradients,
};
use tofhair_core::grid::Grid;
use tofhair_core::io;
use tofhair_core::metrics::EvalReport;
use tofhair_core::noisemap::{
    fit_gaussian, multiscale_variance, region_histogram, region_mean, separability, GaussianFit,
    HistogramCurve, RegionLabel, RegionMask, VarianceMap,
};
use tofhair_core::synth::{head_scene, noisy_six_class_unary, HeadSceneConfig};
use tofhair_core::tofsim::{simulate_frame, Material};
use tofhair_core::{Error, Plane};

use crate::config::PipelineConfig;
use crate::dataset::{
    nan_grid_to_depth, nan_grid_to_plane, plane_to_nan_grid, Dataset, DatasetIndex, SubjectEntry,
    SubjectPaths,
};
use crate::error::{CliError, CliResult};
use crate::plot::{line_plot, Series};

/// Offset separating the synthetic unary's random stream from the scene's.
const UNARY_SEED_OFFSET: u64 = 1 << 32;

/// Resolved configuration plus a thread pool of the requested size.
pub struct Context {
    pub config: PipelineConfig,
    pub dataset: Dataset,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(
        mut config: PipelineConfig,
        out: Option<PathBuf>,
        seed: Option<u64>,
        jobs: Option<usize>,
    ) -> CliResult<Self> {
        if let Some(seed) = seed {
            config.seed = seed;
        }
        if let Some(out) = out {
            config.dataset = out;
        }
        config.validate()?;
        let mut builder = rayon::ThreadPoolBuilder::new();
        match jobs {
            Some(0) => return Err(CliError::Config("--jobs must be >= 1".into())),
            Some(n) => builder = builder.num_threads(n),
            None => {}
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))?;
        Ok(Self {
            dataset: Dataset::new(config.dataset.clone()),
            config,
            pool,
        })
    }

    /// Runs `f` on every subject concurrently. Results keep index order and
    /// the first failing subject (in index order) determines the error.
    fn per_subject<T: Send>(
        &self,
        subjects: &[SubjectEntry],
        f: impl Fn(&SubjectEntry, SubjectPaths) -> CliResult<T> + Sync,
    ) -> CliResult<Vec<T>> {
        let results: Vec<CliResult<T>> = self.pool.install(|| {
            subjects
                .par_iter()
                .map(|s| f(s, self.dataset.subject(&s.name)))
                .collect()
        });
        results.into_iter().collect()
    }

    fn subjects(&self) -> CliResult<Vec<SubjectEntry>> {
        Ok(self.dataset.load_index()?.subjects)
    }
}

fn material_counts(material: &Grid<Material>) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for m in material.iter() {
        let key = if m.is_rough() { "rough" } else { "smooth" };
        *out.entry(key.to_string()).or_insert(0) += 1;
    }
    out
}

#[derive(Serialize)]
struct SimulateManifest<'a> {
    seed: u64,
    tof: &'a tofhair_core::tofsim::ToFConfig,
    scene: &'a HeadSceneConfig,
    subjects: &'a [SubjectEntry],
}

/// Renders every configured subject and writes the dataset index.
pub fn cmd_simulate(ctx: &Context) -> CliResult<DatasetIndex> {
    let sim = &ctx.config.simulate;
    let tof = sim.tof_config();
    let specs: Vec<SubjectEntry> = sim
        .subjects
        .iter()
        .map(|s| SubjectEntry {
            name: s.name.clone(),
            width: sim.scene.width,
            height: sim.scene.height,
            view: Some(s.view),
            seed: Some(ctx.config.seed.wrapping_add(s.seed_offset)),
            materials: BTreeMap::new(),
        })
        .collect();
    let subjects = ctx.per_subject(&specs, |entry, paths| {
        let seed = entry.seed.unwrap_or_default();
        let scene_cfg = HeadSceneConfig {
            view: entry.view.unwrap_or_default(),
            ..sim.scene.clone()
        };
        let subject = head_scene(&scene_cfg, seed)?;
        let (corr, depth) = simulate_frame(&subject.scene, &tof)?;
        io::write_rgb_png(&paths.rgb(), &subject.rgb)?;
        io::write_pfm(
            &paths.depth(),
            &[&plane_to_nan_grid(depth.depth(), depth.valid())],
        )?;
        io::write_pfm(&paths.correlation(), &corr.planes())?;
        io::write_pgm(&paths.mask(), &subject.mask.ids())?;
        let unary = noisy_six_class_unary(
            &subject.mask,
            sim.unary_confidence,
            sim.unary_flip_fraction,
            seed.wrapping_add(UNARY_SEED_OFFSET),
        )?;
        io::write_unary(&paths.unary(), &unary)?;
        Ok(SubjectEntry {
            materials: material_counts(&subject.scene.material),
            ..entry.clone()
        })
    })?;
    io::write_json(
        &ctx.dataset.root().join("manifest.json"),
        &SimulateManifest {
            seed: ctx.config.seed,
            tof: &tof,
            scene: &sim.scene,
            subjects: &subjects,
        },
    )?;
    let index = DatasetIndex { subjects };
    io::write_json(&ctx.dataset.index_path(), &index)?;
    Ok(index)
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupStats {
    pub name: String,
    pub pixels: u64,
    pub mean: f64,
    pub fit: Option<GaussianFit>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AnalyzeSummary {
    pub subject: String,
    pub groups: Vec<GroupStats>,
    /// Mean hair variance over mean smooth-surface variance, when both exist.
    pub hair_smooth_ratio: Option<f64>,
    /// Regions present in the mask but without interior pixels.
    pub skipped: Vec<String>,
    #[serde(skip)]
    pub separability: Vec<(String, String, f64)>,
}

fn group_values(vmap: &VarianceMap, mask: &RegionMask, regions: &[RegionLabel]) -> Vec<f64> {
    vmap.values()
        .iter()
        .zip(vmap.valid().iter())
        .zip(mask.labels().iter())
        .filter(|((_, ok), l)| **ok && regions.contains(l))
        .map(|((v, _), _)| *v)
        .collect()
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:e}")
    }
}

fn analyze_subject(
    ctx: &Context,
    entry: &SubjectEntry,
    paths: &SubjectPaths,
) -> CliResult<AnalyzeSummary> {
    let cfg = &ctx.config.analyze;
    let depth = paths.read_depth()?;
    let mask = paths.read_mask()?;
    let vmap = multiscale_variance(&depth, cfg.sigma)?;
    io::write_pfm(
        &paths.analysis("variance.pfm"),
        &[&plane_to_nan_grid(vmap.values(), vmap.valid())],
    )?;
    let interior = vmap.restricted(&mask.interior(cfg.interior_radius))?;

    let required: Vec<RegionLabel> = cfg
        .regions
        .iter()
        .map(|r| RegionLabel::from_name(r))
        .collect::<tofhair_core::Result<_>>()?;
    let mut groups: Vec<(String, Vec<RegionLabel>)> = Vec::new();
    let mut skipped = Vec::new();
    for label in mask.present() {
        let n = group_values(&interior, &mask, &[label]).len();
        if n > 0 || required.contains(&label) {
            groups.push((label.name().to_string(), vec![label]));
        } else {
            skipped.push(label.name().to_string());
        }
    }
    for r in &required {
        if !mask.present().contains(r) {
            return Err(Error::EmptyRegion(r.name().to_string()).into());
        }
    }
    let present = mask.present();
    let hair: Vec<RegionLabel> = present.iter().copied().filter(|l| l.is_hair()).collect();
    let smooth: Vec<RegionLabel> = present.iter().copied().filter(|l| !l.is_hair()).collect();
    let has = |g: &[RegionLabel]| !g.is_empty() && !group_values(&interior, &mask, g).is_empty();
    let combined = has(&hair) && has(&smooth);
    if combined {
        groups.push(("hair".into(), hair.clone()));
        groups.push(("smooth".into(), smooth.clone()));
    }

    // shared bin edges so histograms are comparable
    let all = group_values(&interior, &mask, &present);
    let upper = all.iter().copied().fold(0.0f64, f64::max);
    let range = (0.0, if upper > 0.0 { upper } else { 1.0 });

    let mut curves: Vec<(String, HistogramCurve)> = Vec::new();
    let mut stats = Vec::new();
    for (name, regions) in &groups {
        let curve = region_histogram(&interior, &mask, regions, cfg.bins, Some(range))?;
        let values = group_values(&interior, &mask, regions);
        stats.push(GroupStats {
            name: name.clone(),
            pixels: curve.total(),
            mean: region_mean(&interior, &mask, regions)?,
            fit: fit_gaussian(&values).ok(),
        });
        let rows: Vec<Vec<String>> = curve
            .bin_edges
            .windows(2)
            .zip(curve.counts.iter().zip(curve.normalized()))
            .map(|(e, (c, d))| vec![fmt_f64(e[0]), fmt_f64(e[1]), c.to_string(), fmt_f64(d)])
            .collect();
        io::write_csv(
            &paths.analysis(&format!("histogram_{name}.csv")),
            &["bin_lo", "bin_hi", "count", "density"],
            &rows,
        )?;
        curves.push((name.clone(), curve));
    }

    let mut sep = Vec::new();
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let s = separability(&curves[i].1, &curves[j].1)?;
            sep.push((curves[i].0.clone(), curves[j].0.clone(), s));
        }
    }
    io::write_csv(
        &paths.analysis("separability.csv"),
        &["a", "b", "bhattacharyya"],
        &sep.iter()
            .map(|(a, b, s)| vec![a.clone(), b.clone(), fmt_f64(*s)])
            .collect::<Vec<_>>(),
    )?;

    if cfg.plots {
        let series: Vec<Series> = curves
            .iter()
            .map(|(name, c)| Series {
                name,
                points: c.bin_centers().into_iter().zip(c.normalized()).collect(),
            })
            .collect();
        let svg = line_plot(
            &format!("{}: depth variance by region", entry.name),
            "multi-scale variance (m²)",
            "fraction of pixels",
            &series,
        );
        io::write_atomic(&paths.analysis("histograms.svg"), svg.as_bytes())?;
    }

    let mean_of = |n: &str| stats.iter().find(|s| s.name == n).map(|s| s.mean);
    let hair_smooth_ratio = match (mean_of("hair"), mean_of("smooth")) {
        (Some(h), Some(s)) if s > 0.0 => Some(h / s),
        _ => None,
    };
    let summary = AnalyzeSummary {
        subject: entry.name.clone(),
        groups: stats,
        hair_smooth_ratio,
        skipped,
        separability: sep,
    };
    io::write_json(&paths.analysis("summary.json"), &summary)?;
    Ok(summary)
}

/// Variance maps, per-region histograms and separability tables.
pub fn cmd_analyze(ctx: &Context) -> CliResult<Vec<AnalyzeSummary>> {
    let subjects = ctx.subjects()?;
    let out = ctx.per_subject(&subjects, |e, p| analyze_subject(ctx, e, &p))?;
    let rows: Vec<Vec<String>> = out
        .iter()
        .map(|s| {
            let mean = |n: &str| {
                s.groups
                    .iter()
                    .find(|g| g.name == n)
                    .map_or(String::new(), |g| fmt_f64(g.mean))
            };
            let sep = s
                .separability
                .iter()
                .find(|(a, b, _)| a == "hair" && b == "smooth")
                .map_or(String::new(), |t| fmt_f64(t.2));
            vec![
                s.subject.clone(),
                mean("hair"),
                mean("smooth"),
                s.hair_smooth_ratio.map_or(String::new(), fmt_f64),
                sep,
            ]
        })
        .collect();
    io::write_csv(
        &ctx.dataset.root().join("analysis/summary.csv"),
        &[
            "subject",
            "hair_mean",
            "smooth_mean",
            "ratio",
            "bhattacharyya",
        ],
        &rows,
    )?;
    Ok(out)
}

fn features_subject(ctx: &Context, entry: &SubjectEntry, paths: &SubjectPaths) -> CliResult<()> {
    let cfg = &ctx.config.features;
    let depth = paths.read_depth()?;
    let mask = paths.read_mask()?;
    let rgb = io::read_rgb(&paths.rgb())?;
    if rgb.dims() != (mask.width(), mask.height()) {
        return Err(
            Error::InvalidArgument(format!("{}: mask and rgb sizes differ", entry.name)).into(),
        );
    }
    let cam = ctx.config.camera_for(depth.width(), depth.height());
    let registered = register_depth_to_rgb(&depth, &cam, rgb.dims())?;
    let filled = fill_holes(&registered, &mask, cfg.fill_sigma)?;
    let vmap = multiscale_variance(&filled, ctx.config.analyze.sigma)?;
    let hva = build_hva(&filled, &cam, &vmap)?;

    io::write_pfm(
        &paths.features("depth.pfm"),
        &[&plane_to_nan_grid(filled.depth(), filled.valid())],
    )?;
    let [h, v, a] = hva.planes().map(|p| plane_to_nan_grid(&p.values, &p.valid));
    io::write_pfm_rgb(&paths.features("hva.pfm"), [&h, &v, &a])?;
    let grad = sobel_gradients(&rgb)?;
    io::write_pfm(&paths.features("gradients.pfm"), &[&grad.gx, &grad.gy])?;
    let dirs = direction_map(&grad, &mask, cfg.direction_min_magnitude)?;
    io::write_pgm(&paths.direction_ids(), &io::direction_ids(&dirs))?;
    io::write_direction_png(&paths.direction_png(), &dirs)?;
    Ok(())
}

/// Registered depth, HVA channels, color gradients and strand directions.
pub fn cmd_features(ctx: &Context) -> CliResult<()> {
    let subjects = ctx.subjects()?;
    ctx.per_subject(&subjects, |e, p| features_subject(ctx, e, &p))?;
    Ok(())
}

/// Everything refinement needs for one subject.
pub struct RefineInput {
    pub unary: UnaryField,
    pub feats: FeatureField,
    pub mask: RegionMask,
}

fn load_hva(paths: &SubjectPaths) -> CliResult<[Plane; 3]> {
    let path = paths.features("hva.pfm");
    if !path.exists() {
        return Err(Error::InvalidArgument(format!(
            "{} missing; run `features` first",
            path.display()
        ))
        .into());
    }
    let img = io::read_pfm(&path)?;
    if img.channels != 3 {
        return Err(
            Error::InvalidArgument(format!("{} must have 3 channels", path.display())).into(),
        );
    }
    Ok([0, 1, 2].map(|c| nan_grid_to_plane(img.channel(c))))
}

pub fn load_refine_input(
    ctx: &Context,
    entry: &SubjectEntry,
    paths: &SubjectPaths,
) -> CliResult<RefineInput> {
    let cfg = &ctx.config.refine;
    let mut unary = io::read_unary(&paths.unary())?;
    if cfg.merge_hair && unary.labels() == six_class_labels().as_slice() {
        unary = merge_hair_labels(&unary)?;
    }
    if unary.num_pixels() > cfg.max_pixels {
        return Err(CliError::SizeCap {
            pixels: unary.num_pixels(),
            cap: cfg.max_pixels,
        });
    }
    let rgb = io::read_rgb(&paths.rgb())?;
    let extra: Vec<Plane> = match cfg.extra {
        ExtraFeature::None => vec![],
        ExtraFeature::Tof => {
            let path = paths.features("depth.pfm");
            if !path.exists() {
                return Err(Error::InvalidArgument(format!(
                    "{} missing; run `features` first",
                    path.display()
                ))
                .into());
            }
            vec![nan_grid_to_depth(io::read_pfm_plane(&path)?).into()]
        }
        other => {
            let [h, v, a] = load_hva(paths)?;
            match other {
                ExtraFeature::Disparity => vec![h],
                ExtraFeature::Variance => vec![v],
                ExtraFeature::Normal => vec![a],
                _ => vec![h, v, a],
            }
        }
    };
    let feats = FeatureField::build(&rgb, &extra.iter().collect::<Vec<_>>())?;
    if (feats.width(), feats.height()) != (unary.width(), unary.height()) {
        return Err(
            Error::InvalidArgument(format!("{}: unary and rgb sizes differ", entry.name)).into(),
        );
    }
    Ok(RefineInput {
        unary,
        feats,
        mask: paths.read_mask()?,
    })
}

/// Ground truth in the label space of `labels`.
pub fn truth_labeling(mask: &RegionMask, labels: &[String]) -> CliResult<Labeling> {
    let ids = mask.ids();
    if labels == merged_labels().as_slice() {
        Ok(merge_region_labeling(&ids)?)
    } else if labels == six_class_labels().as_slice() {
        Ok(Labeling::from_grid(&ids))
    } else {
        Err(CliError::Config(format!(
            "no ground-truth mapping for labels {labels:?}"
        )))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyLog {
    pub subject: String,
    pub pixels: usize,
    /// `None` when the instance exceeds the energy cap.
    pub unary_argmax: Option<f64>,
    pub refined: Option<f64>,
}

fn refine_subject(
    ctx: &Context,
    entry: &SubjectEntry,
    paths: &SubjectPaths,
) -> CliResult<EnergyLog> {
    let cfg = &ctx.config.refine;
    let input = load_refine_input(ctx, entry, paths)?;
    let q = mean_field_infer_with(&input.unary, &input.feats, &cfg.params, &cfg.inference)?;
    let labeling = map_labeling(&q);
    io::write_pgm(&paths.refine("labeling.pgm"), &labeling.to_grid())?;
    io::write_marginals(&paths.refine("marginals"), &q)?;

    let pixels = input.unary.num_pixels();
    let energy = |l: &Labeling| -> CliResult<Option<f64>> {
        if pixels > cfg.energy_cap {
            return Ok(None);
        }
        Ok(Some(gibbs_energy_capped(
            l,
            &input.unary,
            &input.feats,
            &cfg.params,
            cfg.energy_cap,
        )?))
    };
    let log = EnergyLog {
        subject: entry.name.clone(),
        pixels,
        unary_argmax: energy(&input.unary.argmax_labeling())?,
        refined: energy(&labeling)?,
    };
    io::write_json(&paths.refine("energy.json"), &log)?;
    Ok(log)
}

/// Mean-field refinement of every subject's unary.
pub fn cmd_refine(ctx: &Context) -> CliResult<Vec<EnergyLog>> {
    let subjects = ctx.subjects()?;
    let logs = ctx.per_subject(&subjects, |e, p| refine_subject(ctx, e, &p))?;
    let opt = |v: Option<f64>| v.map_or_else(|| "skipped".to_string(), fmt_f64);
    let rows: Vec<Vec<String>> = logs
        .iter()
        .map(|l| {
            vec![
                l.subject.clone(),
                l.pixels.to_string(),
                opt(l.unary_argmax),
                opt(l.refined),
            ]
        })
        .collect();
    io::write_csv(
        &ctx.dataset.root().join("refine/energy_log.csv"),
        &["subject", "pixels", "energy_unary_argmax", "energy_refined"],
        &rows,
    )?;
    Ok(logs)
}

/// Exhaustive CRF parameter search on the validation subjects.
pub fn cmd_gridsearch(ctx: &Context) -> CliResult<tofhair_core::crf::GridSearchResult> {
    let gs = &ctx.config.gridsearch;
    let mut subjects = ctx.subjects()?;
    if !gs.validation.is_empty() {
        for v in &gs.validation {
            if !subjects.iter().any(|s| &s.name == v) {
                return Err(CliError::Config(format!(
                    "validation subject {v:?} is not in the dataset"
                )));
            }
        }
        subjects.retain(|s| gs.validation.contains(&s.name));
    }
    let instances = ctx.per_subject(&subjects, |e, p| {
        let input = load_refine_input(ctx, e, &p)?;
        let truth = truth_labeling(&input.mask, input.unary.labels())?;
        Ok(Instance {
            unary: input.unary,
            feats: input.feats,
            truth,
        })
    })?;
    let labels = instances[0].unary.labels();
    let target = labels
        .iter()
        .position(|l| l == &gs.target_label)
        .ok_or_else(|| {
            CliError::Config(format!(
                "target label {:?} not in {labels:?}",
                gs.target_label
            ))
        })?;
    let result = ctx.pool.install(|| {
        grid_search_params(
            &instances,
            &gs.grid,
            target as u8,
            &ctx.config.refine.inference,
        )
    })?;
    let dir = ctx.dataset.root().join("gridsearch");
    io::write_json(&dir.join("best.json"), &result.best)?;
    let rows: Vec<Vec<String>> = result
        .table
        .iter()
        .map(|s| {
            let p = &s.params;
            [
                p.w1,
                p.theta_alpha,
                p.theta_beta,
                p.theta_gamma,
                p.w2,
                p.theta_delta,
                s.score,
            ]
            .iter()
            .map(|v| fmt_f64(*v))
            .collect()
        })
        .collect();
    io::write_csv(
        &dir.join("table.csv"),
        &[
            "w1",
            "theta_alpha",
            "theta_beta",
            "theta_gamma",
            "w2",
            "theta_delta",
            "mean_iou",
        ],
        &rows,
    )?;
    Ok(result)
}

#[derive(Clone, Debug, Serialize)]
pub struct SubjectEval {
    pub subject: String,
    pub unary: EvalReport,
    pub refined: EvalReport,
}

fn eval_subject(
    ctx: &Context,
    entry: &SubjectEntry,
    paths: &SubjectPaths,
) -> CliResult<SubjectEval> {
    let mut unary = io::read_unary(&paths.unary())?;
    if ctx.config.refine.merge_hair && unary.labels() == six_class_labels().as_slice() {
        unary = merge_hair_labels(&unary)?;
    }
    let path = paths.refine("labeling.pgm");
    if !path.exists() {
        return Err(Error::InvalidArgument(format!(
            "{} missing; run `refine` first",
            path.display()
        ))
        .into());
    }
    let refined = Labeling::from_grid(&io::read_pgm(&path)?);
    let truth = truth_labeling(&paths.read_mask()?, unary.labels())?;
    let out = SubjectEval {
        subject: entry.name.clone(),
        unary: EvalReport::evaluate(&unary.argmax_labeling(), &truth, unary.labels())?,
        refined: EvalReport::evaluate(&refined, &truth, unary.labels())?,
    };
    io::write_json(&paths.eval("report.json"), &out)?;
    Ok(out)
}

/// Per-label IoU and mIoU of the unary argmax and the refined labeling.
pub fn cmd_eval(ctx: &Context) -> CliResult<Vec<SubjectEval>> {
    let subjects = ctx.subjects()?;
    let evals = ctx.per_subject(&subjects, |e, p| eval_subject(ctx, e, &p))?;
    let mut rows = Vec::new();
    for e in &evals {
        for (stage, r) in [("unary", &e.unary), ("refined", &e.refined)] {
            for s in &r.per_label {
                rows.push(vec![
                    e.subject.clone(),
                    stage.to_string(),
                    s.label.clone(),
                    fmt_f64(s.iou),
                    s.absent.to_string(),
                ]);
            }
            rows.push(vec![
                e.subject.clone(),
                stage.to_string(),
                "mean".into(),
                fmt_f64(r.miou),
                "false".into(),
            ]);
        }
    }
    io::write_csv(
        &ctx.dataset.root().join("eval/summary.csv"),
        &["subject", "stage", "label", "iou", "absent"],
        &rows,
    )?;
    Ok(evals)
}

/// simulate → analyze → features → refine → eval.
pub fn run_pipeline(ctx: &Context) -> CliResult<()> {
    cmd_simulate(ctx)?;
    cmd_analyze(ctx)?;
    cmd_features(ctx)?;
    cmd_refine(ctx)?;
    cmd_eval(ctx)?;
    Ok(())
}

/// Lists the files under `root`, relative and sorted, for reproducibility
/// checks.
pub fn list_outputs(root: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<PathBuf>) {
        let Ok(rd) = std::fs::read_dir(dir) else {
            return;
        };
        for e in rd.flatten() {
            let p = e.path();
            if p.is_dir() {
                walk(&p, root, out);
            } else if let Ok(rel) = p.strip_prefix(root) {
                out.push(rel.to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
