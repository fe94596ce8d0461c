use std::path::{Path, PathBuf};
use std::process::Command;

use tofhair_cli::commands::{
    cmd_analyze, cmd_eval, cmd_features, cmd_gridsearch, cmd_refine, cmd_simulate, run_pipeline,
};
use tofhair_cli::dataset::{Dataset, DatasetIndex, SubjectEntry};
use tofhair_cli::{Context, PipelineConfig};
use tofhair_core::crf::{
    merged_labels, six_class_labels, CrfParams, Labeling, ParamGrid, UnaryField,
};
use tofhair_core::grid::Grid;
use tofhair_core::io;
use tofhair_core::noisemap::RegionLabel;
use tofhair_core::tofsim::{simulate_frame, Material, SceneSpec, ToFConfig};

fn shipped() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/synthetic.json")
}

fn context(out: &Path, edit: impl FnOnce(&mut PipelineConfig)) -> Context {
    let mut cfg = PipelineConfig::load(&shipped()).unwrap();
    edit(&mut cfg);
    Context::new(cfg, Some(out.to_path_buf()), None, Some(1)).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tofhair"))
}

/// Hand-built single-subject dataset: flat wall at `depth` meters, uniform
/// color, everything labeled background, confident background unary.
fn flat_dataset(root: &Path, size: usize, depth: f64) {
    let ds = Dataset::new(root);
    let s = ds.subject("wall");
    io::write_pfm(&s.depth(), &[&Grid::filled(size, size, depth)]).unwrap();
    io::write_rgb_png(&s.rgb(), &Grid::filled(size, size, [120.0, 120.0, 120.0])).unwrap();
    io::write_pgm(
        &s.mask(),
        &Grid::filled(size, size, RegionLabel::Background.id()),
    )
    .unwrap();
    let bg = Labeling::new(size, size, vec![2; size * size]).unwrap();
    io::write_unary(
        &s.unary(),
        &UnaryField::from_labeling(&bg, merged_labels(), 0.9).unwrap(),
    )
    .unwrap();
    let index = DatasetIndex {
        subjects: vec![SubjectEntry {
            name: "wall".into(),
            width: size,
            height: size,
            view: None,
            seed: None,
            materials: Default::default(),
        }],
    };
    io::write_json(&ds.index_path(), &index).unwrap();
}

#[test]
fn simulate_is_reproducible_and_lists_materials() {
    let dir = tempfile::tempdir().unwrap();
    let index = cmd_simulate(&context(&dir.path().join("a"), |_| {})).unwrap();
    cmd_simulate(&context(&dir.path().join("b"), |_| {})).unwrap();
    for f in [
        "front/depth/depth.pfm",
        "front/depth/correlation.pfm",
        "back/unary/unary.pfm",
        "index.json",
    ] {
        assert_eq!(
            std::fs::read(dir.path().join("a").join(f)).unwrap(),
            std::fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let front = &index.subjects[0];
    assert!(front.materials["rough"] > 0 && front.materials["smooth"] > 0);
    let on_disk: DatasetIndex = io::read_json(&dir.path().join("a/index.json")).unwrap();
    assert_eq!(on_disk, index);
    let unary =
        io::read_unary(&Dataset::new(dir.path().join("a")).subject("front").unary()).unwrap();
    assert_eq!(unary.labels(), six_class_labels().as_slice());

    let other = cmd_simulate(&context(&dir.path().join("c"), |c| c.seed = 8)).unwrap();
    assert_ne!(other.subjects[0].seed, index.subjects[0].seed);
}

#[test]
fn constant_scene_gives_constant_pfm() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ToFConfig::default();
    cfg.sensor_noise_std = 0.0;
    let scene = SceneSpec::uniform(6, 5, 1.25, Material::Smooth, 3);
    let (_, depth) = simulate_frame(&scene, &cfg).unwrap();
    let p = dir.path().join("d.pfm");
    io::write_pfm(&p, &[depth.depth()]).unwrap();
    let back = io::read_pfm_plane(&p).unwrap();
    let first = *back.get(0, 0);
    assert!((first - 1.25).abs() < 1e-6);
    assert!(back.iter().all(|v| *v == first));
}

#[test]
fn analyze_reports_separable_hair_and_per_view_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = context(dir.path(), |c| {
        c.simulate.scene.width = 128;
        c.simulate.scene.height = 128;
    });
    cmd_simulate(&ctx).unwrap();
    let summaries = cmd_analyze(&ctx).unwrap();
    let front = &summaries[0];
    let sep = |a: &str, b: &str| {
        front
            .separability
            .iter()
            .find(|(x, y, _)| (x == a && y == b) || (x == b && y == a))
            .unwrap()
            .2
    };
    assert!(sep("face", "hair") > 0.0);
    assert!(front.hair_smooth_ratio.unwrap() > 5.0);
    let analysis = dir.path().join("front/analysis");
    for region in [
        "hair_top",
        "hair_left",
        "hair_right",
        "face",
        "background",
        "hair",
        "smooth",
    ] {
        assert!(
            analysis.join(format!("histogram_{region}.csv")).exists(),
            "{region}"
        );
    }
    assert!(dir
        .path()
        .join("back/analysis/histogram_hair_back.csv")
        .exists());
    let svg = std::fs::read_to_string(analysis.join("histograms.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    let csv = std::fs::read_to_string(dir.path().join("analysis/summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn smooth_only_scene_has_near_zero_variance() {
    let dir = tempfile::tempdir().unwrap();
    flat_dataset(dir.path(), 16, 1.3);
    let ctx = context(dir.path(), |_| {});
    let s = &cmd_analyze(&ctx).unwrap()[0];
    assert!(s.groups.iter().all(|g| g.mean.abs() < 1e-12));
    assert_eq!(s.hair_smooth_ratio, None);
    let v = io::read_pfm_plane(&dir.path().join("wall/analysis/variance.pfm")).unwrap();
    assert!(v.iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn analyze_propagates_missing_required_region() {
    let dir = tempfile::tempdir().unwrap();
    flat_dataset(dir.path(), 16, 1.3);
    let ctx = context(dir.path(), |c| c.analyze.regions = vec!["face".into()]);
    assert_eq!(cmd_analyze(&ctx).unwrap_err().exit_code(), 3);
}

#[test]
fn features_on_a_flat_wall() {
    let dir = tempfile::tempdir().unwrap();
    flat_dataset(dir.path(), 16, 1.25);
    cmd_features(&context(dir.path(), |_| {})).unwrap();
    let hva = io::read_pfm(&dir.path().join("wall/features/hva.pfm")).unwrap();
    assert_eq!((hva.width, hva.height, hva.channels), (16, 16, 3));
    let (h, v) = (hva.channel(0), hva.channel(1));
    assert!(v.iter().filter(|x| x.is_finite()).all(|x| *x == 0.0));
    // synthetic camera: 5 cm baseline, 500 px focal
    for (x, y) in [(0, 0), (7, 9), (15, 15)] {
        assert!((h.get(x, y) - 0.05 * 500.0 / 1.25).abs() < 1e-4);
    }
    let grads = io::read_pfm(&dir.path().join("wall/features/gradients.pfm")).unwrap();
    assert_eq!(grads.planes(2).unwrap()[0].dims(), (16, 16));
    let dirs = io::read_pgm(&dir.path().join("wall/direction/direction.pgm")).unwrap();
    assert!(dirs.iter().all(|d| *d == 255), "no hair, no direction");
}

#[test]
fn identity_refinement_equals_unary_argmax() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = context(dir.path(), |c| c.refine.params = CrfParams::identity());
    cmd_simulate(&ctx).unwrap();
    cmd_features(&ctx).unwrap();
    cmd_refine(&ctx).unwrap();
    let ds = Dataset::new(dir.path());
    for name in ["front", "back"] {
        let s = ds.subject(name);
        let unary =
            tofhair_core::crf::merge_hair_labels(&io::read_unary(&s.unary()).unwrap()).unwrap();
        let refined = io::read_pgm(&s.refine("labeling.pgm")).unwrap();
        assert_eq!(Labeling::from_grid(&refined), unary.argmax_labeling());
    }
}

#[test]
fn pipeline_improves_hair_iou_and_logs_energy() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = context(dir.path(), |_| {});
    run_pipeline(&ctx).unwrap();
    let evals = cmd_eval(&ctx).unwrap();
    for e in &evals {
        let before = e.unary.get("hair").unwrap().iou;
        let after = e.refined.get("hair").unwrap().iou;
        assert!(after > before, "{}: {before} -> {after}", e.subject);
    }
    let logs = cmd_refine(&ctx).unwrap();
    for l in &logs {
        let (a, b) = (l.unary_argmax.unwrap(), l.refined.unwrap());
        assert!(b < a, "refinement should lower the energy");
    }
    let log = std::fs::read_to_string(dir.path().join("refine/energy_log.csv")).unwrap();
    assert!(log.lines().skip(1).all(|l| !l.contains("skipped")));
    let q =
        io::read_json::<io::LabelPlanes>(&dir.path().join("front/refine/marginals.json")).unwrap();
    assert_eq!(q.labels, merged_labels());
}

#[test]
fn energy_is_skipped_above_the_cap() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = context(dir.path(), |c| c.refine.energy_cap = 100);
    cmd_simulate(&ctx).unwrap();
    cmd_features(&ctx).unwrap();
    let logs = cmd_refine(&ctx).unwrap();
    assert!(logs.iter().all(|l| l.refined.is_none()));
}

#[test]
fn gridsearch_writes_best_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = context(dir.path(), |c| {
        c.gridsearch.grid = ParamGrid {
            w1: vec![0.0, 2.0],
            ..ParamGrid::single(c.refine.params)
        };
    });
    cmd_simulate(&ctx).unwrap();
    cmd_features(&ctx).unwrap();
    let r = cmd_gridsearch(&ctx).unwrap();
    assert_eq!(r.table.len(), 2);
    assert!(r.best.score >= r.table[0].score);
    let table = std::fs::read_to_string(dir.path().join("gridsearch/table.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(dir.path().join("gridsearch/best.json").exists());

    let bad = context(dir.path(), |c| {
        c.gridsearch.validation = vec!["side".into()]
    });
    assert_eq!(cmd_gridsearch(&bad).unwrap_err().exit_code(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.json");
    std::fs::write(&bad_cfg, r#"{"refine": {"extra": "height"}}"#).unwrap();
    let status = bin()
        .arg("--config")
        .arg(&bad_cfg)
        .arg("simulate")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let status = bin()
        .arg("--out")
        .arg(dir.path().join("nothing"))
        .arg("analyze")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));

    let capped = dir.path().join("capped.json");
    let mut cfg = PipelineConfig::load(&shipped()).unwrap();
    cfg.refine.max_pixels = 100;
    cfg.refine.extra = tofhair_core::crf::ExtraFeature::None;
    std::fs::write(&capped, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = dir.path().join("ds");
    for (cmd, code) in [("simulate", 0), ("refine", 4)] {
        let status = bin()
            .arg("--config")
            .arg(&capped)
            .arg("--out")
            .arg(&out)
            .arg(cmd)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(code), "{cmd}");
    }

    let status = bin()
        .arg("--jobs")
        .arg("0")
        .arg("simulate")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn shipped_config_runs_end_to_end_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["simulate", "analyze", "features", "refine", "eval"] {
        let out = bin()
            .args(["--config"])
            .arg(shipped())
            .arg("--out")
            .arg(dir.path())
            .arg("--seed")
            .arg("11")
            .arg(cmd)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{cmd}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let index: DatasetIndex = io::read_json(&dir.path().join("index.json")).unwrap();
    assert_eq!(index.subjects[0].seed, Some(11));
    assert!(dir.path().join("eval/summary.csv").exists());
    assert!(dir.path().join("front/direction/direction.png").exists());
}
