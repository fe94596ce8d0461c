//! Shared inputs for the benchmarks.

use tofhair_core::crf::{CrfParams, ExtraFeature, FeatureField, UnaryField};
use tofhair_core::synth::{camouflage_instance, head_scene, synthetic_tof_config, HeadSceneConfig};
use tofhair_core::tofsim::{simulate_frame, SceneSpec, ToFConfig};
use tofhair_core::DepthFrame;

/// Head scene of `size`² pixels and the matching ToF configuration.
pub fn scene(size: usize) -> (SceneSpec, ToFConfig) {
    let cfg = HeadSceneConfig {
        width: size,
        height: size,
        ..HeadSceneConfig::default()
    };
    (
        head_scene(&cfg, 7).expect("valid scene").scene,
        synthetic_tof_config(1e-3),
    )
}

pub fn depth(size: usize) -> DepthFrame {
    let (scene, cfg) = scene(size);
    simulate_frame(&scene, &cfg).expect("simulated").1
}

/// Camouflage instance with HVA features.
pub fn crf_instance(size: usize) -> (UnaryField, FeatureField) {
    let inst = camouflage_instance(size, 500).expect("valid instance");
    let feats = inst.features(ExtraFeature::Hva).expect("features");
    (inst.unary, feats)
}

pub fn crf_params() -> CrfParams {
    CrfParams {
        w1: 2.0,
        w2: 1.0,
        theta_alpha: 4.0,
        theta_beta: 25.0,
        theta_gamma: 0.5,
        theta_delta: 1.0,
    }
}
