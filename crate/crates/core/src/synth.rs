//! Seeded synthetic data: a head-and-shoulders ToF scene with a six-region
//! mask, flipped-unary smoothing instances and a same-color hair/background
//! corpus where only the depth noise tells the regions apart.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::crf::{merged_labels, FeatureField, Labeling, UnaryField};
use crate::error::{Error, Result};
use crate::geomfeat::{build_hva, CameraModel, HvaChannels, RgbImage};
use crate::grid::Grid;
use crate::noisemap::{default_sigma, variance_map, RegionLabel, RegionMask};
use crate::tofsim::{simulate_frame, Material, SceneSpec, ToFConfig};
use crate::{DepthFrame, Plane};

/// Stream id separating color noise from the ToF pixel streams.
const COLOR_STREAM: u64 = 1 << 40;

/// Merged-label indices.
pub const HAIR_INDEX: u8 = 0;
pub const FACE_INDEX: u8 = 1;
pub const BACKGROUND_INDEX: u8 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    #[default]
    Front,
    Back,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadSceneConfig {
    pub width: usize,
    pub height: usize,
    pub view: View,
    /// Distance to the nearest point of the head, meters.
    pub head_distance: f64,
    pub background_distance: f64,
    /// Half-normal scale of the hair's extra path delay, seconds.
    pub hair_scatter_spread: f64,
    pub hair_path_forks: u32,
    pub hair_color: [f64; 3],
    pub skin_color: [f64; 3],
    pub background_color: [f64; 3],
    /// Uniform per-channel color jitter amplitude.
    pub color_noise: f64,
}

impl Default for HeadSceneConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            view: View::Front,
            head_distance: 1.0,
            background_distance: 1.6,
            hair_scatter_spread: 0.5e-9,
            hair_path_forks: 4,
            hair_color: [70.0, 50.0, 35.0],
            skin_color: [220.0, 180.0, 150.0],
            background_color: [200.0, 200.0, 210.0],
            color_noise: 6.0,
        }
    }
}

/// A rendered-ready subject: scene geometry, ground-truth regions, color.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSubject {
    pub scene: SceneSpec,
    pub mask: RegionMask,
    pub rgb: RgbImage,
    pub camera: CameraModel,
}

fn color_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(COLOR_STREAM);
    rng
}

fn jitter(rng: &mut ChaCha8Rng, base: [f64; 3], amp: f64) -> [f64; 3] {
    if amp <= 0.0 {
        return base;
    }
    base.map(|c| (c + rng.random_range(-amp..=amp)).clamp(0.0, 255.0))
}

/// Ellipsoidal head in front of a flat wall. From the front the hair forms
/// a cap (top) with side locks (left/right, image-space) around the face;
/// from the back the whole head is hair.
pub fn head_scene(cfg: &HeadSceneConfig, seed: u64) -> Result<SyntheticSubject> {
    let (w, h) = (cfg.width, cfg.height);
    if w < 11 || h < 11 {
        return Err(Error::invalid("head scene needs at least 11x11 pixels"));
    }
    if !(cfg.head_distance > 0.0 && cfg.background_distance > cfg.head_distance) {
        return Err(Error::invalid("background must lie behind the head"));
    }
    let (cx, cy) = (w as f64 / 2.0, h as f64 * 0.55);
    let (rx, ry) = (w as f64 * 0.28, h as f64 * 0.36);
    let hairline = cy - 0.25 * ry;
    let face_half_width = 0.62 * rx;
    let bulge = 0.12;

    let mut labels = Grid::filled(w, h, RegionLabel::Background);
    let mut distance = Grid::filled(w, h, cfg.background_distance);
    let mut material = Grid::filled(w, h, Material::Smooth);
    let mut attenuation = Grid::filled(w, h, 0.6);
    let rough = Material::Rough {
        scatter_spread: cfg.hair_scatter_spread,
        path_forks: cfg.hair_path_forks,
    };
    for y in 0..h {
        for x in 0..w {
            let (u, v) = ((x as f64 + 0.5 - cx) / rx, (y as f64 + 0.5 - cy) / ry);
            let r2 = u * u + v * v;
            if r2 > 1.0 {
                continue;
            }
            let py = y as f64 + 0.5;
            let px = x as f64 + 0.5 - cx;
            let label = match cfg.view {
                View::Back => RegionLabel::HairBack,
                View::Front if py < hairline => RegionLabel::HairTop,
                View::Front if px < -face_half_width => RegionLabel::HairLeft,
                View::Front if px > face_half_width => RegionLabel::HairRight,
                View::Front => RegionLabel::Face,
            };
            labels.set(x, y, label);
            distance.set(x, y, cfg.head_distance + bulge * (1.0 - (1.0 - r2).sqrt()));
            if label.is_hair() {
                material.set(x, y, rough);
                attenuation.set(x, y, 0.7);
            } else {
                attenuation.set(x, y, 0.9);
            }
        }
    }

    let mut rng = color_rng(seed);
    let rgb = labels.map(|l| {
        let base = match l {
            RegionLabel::Background => cfg.background_color,
            RegionLabel::Face => cfg.skin_color,
            _ => cfg.hair_color,
        };
        jitter(&mut rng, base, cfg.color_noise)
    });

    Ok(SyntheticSubject {
        scene: SceneSpec {
            distance,
            material,
            attenuation,
            seed,
        },
        mask: RegionMask::new(labels),
        rgb,
        camera: CameraModel::synthetic((w, h), (w, h)),
    })
}

/// ToF configuration used by the synthetic corpora: 20 MHz with sensor
/// noise equivalent to `depth_noise` meters on a unit-attenuation pixel.
pub fn synthetic_tof_config(depth_noise: f64) -> ToFConfig {
    let mut cfg = ToFConfig::default();
    cfg.sensor_noise_std = cfg.correlation_noise_for_depth_std(depth_noise, 1.0);
    cfg
}

/// Six-class unary that is `confidence`-sure of a noisy copy of `truth`:
/// `flip_fraction` of the pixels (chosen by `seed`) carry a wrong label.
pub fn noisy_six_class_unary(
    truth: &RegionMask,
    confidence: f64,
    flip_fraction: f64,
    seed: u64,
) -> Result<UnaryField> {
    if !(0.0..=1.0).contains(&flip_fraction) {
        return Err(Error::invalid("flip fraction must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<u8> = truth
        .ids()
        .iter()
        .map(|&id| {
            if rng.random::<f64>() < flip_fraction {
                (id + rng.random_range(1..6)) % 6
            } else {
                id
            }
        })
        .collect();
    let noisy = Labeling::new(truth.width(), truth.height(), ids)?;
    UnaryField::from_labeling(&noisy, crate::crf::six_class_labels(), confidence)
}

/// Two-region (hair / background) instance with a fraction of flipped
/// unary pixels.
#[derive(Clone, Debug)]
pub struct FlippedInstance {
    pub unary: UnaryField,
    pub feats: FeatureField,
    pub truth: Labeling,
    /// Pixel indices whose unary argmax was flipped.
    pub flipped: Vec<usize>,
}

/// Square image split by a random straight boundary into a dark hair region
/// and a bright background, each filling at least a quarter of the frame.
/// Exactly `round(flip_fraction · N)` pixels get a confident wrong unary.
pub fn flipped_two_region(size: usize, flip_fraction: f64, seed: u64) -> Result<FlippedInstance> {
    if size < 4 || !(0.0..0.5).contains(&flip_fraction) {
        return Err(Error::invalid(
            "need size >= 4 and a flip fraction in [0, 0.5)",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size * size;
    let truth = loop {
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let offset: f64 = rng.random_range(-0.25..0.25) * size as f64;
        let (nx, ny) = (angle.cos(), angle.sin());
        let c = size as f64 / 2.0;
        let labels: Vec<u8> = (0..n)
            .map(|i| {
                let (x, y) = ((i % size) as f64 + 0.5 - c, (i / size) as f64 + 0.5 - c);
                if x * nx + y * ny < offset {
                    HAIR_INDEX
                } else {
                    BACKGROUND_INDEX
                }
            })
            .collect();
        let hair = labels.iter().filter(|&&l| l == HAIR_INDEX).count();
        if hair >= n / 4 && hair <= n - n / 4 {
            break labels;
        }
    };

    let rgb: Vec<[f64; 3]> = truth
        .iter()
        .map(|&l| {
            let base = if l == HAIR_INDEX {
                [60.0, 45.0, 30.0]
            } else {
                [180.0, 190.0, 200.0]
            };
            jitter(&mut rng, base, 4.0)
        })
        .collect();

    let n_flip = (flip_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..n_flip {
        let j = rng.random_range(i..n);
        order.swap(i, j);
    }
    let mut flipped = order[..n_flip].to_vec();
    flipped.sort_unstable();

    let mut probs = Vec::with_capacity(n * 3);
    let mut is_flipped = vec![false; n];
    for &i in &flipped {
        is_flipped[i] = true;
    }
    for (i, &l) in truth.iter().enumerate() {
        let sure: f64 = rng.random_range(0.7..0.9);
        let shown = match (l, is_flipped[i]) {
            (HAIR_INDEX, true) => BACKGROUND_INDEX,
            (_, true) => HAIR_INDEX,
            (l, false) => l,
        };
        let other = if shown == HAIR_INDEX {
            BACKGROUND_INDEX
        } else {
            HAIR_INDEX
        };
        let mut p = [0.0; 3];
        p[shown as usize] = sure;
        p[other as usize] = (1.0 - sure) * 0.8;
        p[FACE_INDEX as usize] = (1.0 - sure) * 0.2;
        probs.extend_from_slice(&p);
    }

    Ok(FlippedInstance {
        unary: UnaryField::from_probabilities(size, size, merged_labels(), &probs)?,
        feats: FeatureField::from_raw(size, size, rgb, 0, vec![])?,
        truth: Labeling::new(size, size, truth)?,
        flipped,
    })
}

/// One frame of the same-color corpus, with features for every choice of
/// extra channel.
#[derive(Clone, Debug)]
pub struct CamouflageInstance {
    pub unary: UnaryField,
    pub truth: Labeling,
    pub rgb: RgbImage,
    pub depth: DepthFrame,
    pub hva: HvaChannels,
    pub camera: CameraModel,
}

impl CamouflageInstance {
    pub fn features(&self, extra: crate::crf::ExtraFeature) -> Result<FeatureField> {
        let depth = Plane::from(self.depth.clone());
        FeatureField::build(&self.rgb, &extra.select(&depth, &self.hva))
    }
}

/// Window of the variance channel used by [`camouflage_instance`].
pub const CAMOUFLAGE_VARIANCE_WINDOW: usize = 5;

/// A hair blob on a flat wall at the same distance with the same color; a
/// skin-colored face patch sits below it. The unary is a coarse guess whose
/// hair boundary is displaced by a few pixels and carries confusion blobs,
/// the way a network errs when hair and background look alike.
pub fn camouflage_instance(size: usize, seed: u64) -> Result<CamouflageInstance> {
    if size < 16 {
        return Err(Error::invalid(
            "camouflage instances need at least 16x16 pixels",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let (cx, cy) = (
        s * rng.random_range(0.4..0.6),
        s * rng.random_range(0.35..0.5),
    );
    let (rx, ry) = (
        s * rng.random_range(0.22..0.32),
        s * rng.random_range(0.2..0.3),
    );
    let face = (cx, cy + ry * 0.9, rx * 0.6, ry * 0.45);
    let inside = |x: f64, y: f64, (ex, ey, ax, ay): (f64, f64, f64, f64)| {
        ((x - ex) / ax).powi(2) + ((y - ey) / ay).powi(2) <= 1.0
    };

    let n = size * size;
    let mut truth = vec![BACKGROUND_INDEX; n];
    for (i, t) in truth.iter_mut().enumerate() {
        let (x, y) = ((i % size) as f64 + 0.5, (i / size) as f64 + 0.5);
        if inside(x, y, face) {
            *t = FACE_INDEX;
        } else if inside(x, y, (cx, cy, rx, ry)) {
            *t = HAIR_INDEX;
        }
    }

    let shared = [95.0, 85.0, 75.0];
    let rgb_vals: Vec<[f64; 3]> = truth
        .iter()
        .map(|&l| {
            let base = if l == FACE_INDEX {
                [220.0, 180.0, 150.0]
            } else {
                shared
            };
            jitter(&mut rng, base, 6.0)
        })
        .collect();
    let rgb = Grid::from_vec(size, size, rgb_vals)?;

    let distance = 1.2;
    let rough = Material::Rough {
        scatter_spread: 0.5e-9,
        path_forks: 4,
    };
    let scene = SceneSpec {
        distance: Grid::filled(size, size, distance),
        material: Grid::from_vec(
            size,
            size,
            truth
                .iter()
                .map(|&l| {
                    if l == HAIR_INDEX {
                        rough
                    } else {
                        Material::Smooth
                    }
                })
                .collect(),
        )?,
        attenuation: Grid::from_vec(
            size,
            size,
            truth
                .iter()
                .map(|&l| if l == HAIR_INDEX { 0.7 } else { 0.8 })
                .collect(),
        )?,
        seed,
    };
    let (_, depth) = simulate_frame(&scene, &synthetic_tof_config(1e-3))?;
    let camera = CameraModel::synthetic((size, size), (size, size));
    let vmap = variance_map(
        &depth,
        CAMOUFLAGE_VARIANCE_WINDOW,
        default_sigma(CAMOUFLAGE_VARIANCE_WINDOW),
    )?;
    let hva = build_hva(&depth, &camera, &vmap)?;

    // Coarse guess: the hair ellipse shifted and rescaled, plus blobs where
    // hair and background are swapped.
    let shift = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let scale = rng.random_range(0.85..1.15);
    let guess_ellipse = (cx + shift.0, cy + shift.1, rx * scale, ry * scale);
    let blobs: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(0.0..s),
                rng.random_range(0.0..s),
                rng.random_range(1.5..3.5),
            )
        })
        .collect();
    let mut probs = Vec::with_capacity(n * 3);
    for (i, &t) in truth.iter().enumerate() {
        let (x, y) = ((i % size) as f64 + 0.5, (i / size) as f64 + 0.5);
        let mut guess = if t == FACE_INDEX {
            FACE_INDEX
        } else if inside(x, y, guess_ellipse) {
            HAIR_INDEX
        } else {
            BACKGROUND_INDEX
        };
        if guess != FACE_INDEX
            && blobs
                .iter()
                .any(|&(bx, by, br)| (x - bx).powi(2) + (y - by).powi(2) <= br * br)
        {
            guess = if guess == HAIR_INDEX {
                BACKGROUND_INDEX
            } else {
                HAIR_INDEX
            };
        }
        let sure: f64 = rng.random_range(0.55..0.7);
        let mut p = [(1.0 - sure) / 2.0; 3];
        p[guess as usize] = sure;
        probs.extend_from_slice(&p);
    }

    Ok(CamouflageInstance {
        unary: UnaryField::from_probabilities(size, size, merged_labels(), &probs)?,
        truth: Labeling::new(size, size, truth)?,
        rgb,
        depth,
        hva,
        camera,
    })
}
