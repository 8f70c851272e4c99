use std::f64::consts::PI;

use stmseg::empirical_curvelet::{modified_ect, read_subbands, write_subbands};
use stmseg::pipeline::metrics::accuracy;
use stmseg::pipeline::synth::{synth_generate, SceneKind, SceneParams, StripeField};
use stmseg::pipeline::{preset, run_pipeline, ClusterMethod, PipelineConfig};
use stmseg::spectral_partition::{pseudo_polar, DetectionParams};
use stmseg::texture_features::{feature_matrix, FeatureMatrix};

/// Distance from pixel `(x, y)` to the nearest quadrant boundary of an
/// `n`-by-`n` scene.
fn edge_distance(x: usize, y: usize, n: usize) -> usize {
    let d = |v: usize| if v < n / 2 { n / 2 - 1 - v } else { v - n / 2 };
    d(x).min(d(y))
}

#[test]
fn composite_scene_is_segmented() {
    let scene = synth_generate(
        SceneKind::Composite,
        &SceneParams::for_kind(SceneKind::Composite),
        0,
    )
    .unwrap();
    for method in [ClusterMethod::Kmeans, ClusterMethod::Mbo] {
        let mut cfg = PipelineConfig::default();
        cfg.clustering.method = method;
        let out = run_pipeline(&cfg, &scene.image).unwrap();
        let cartoon = accuracy(&out.cartoon.labels, &scene.cartoon_truth).unwrap();
        let texture = accuracy(&out.texture.labels, &scene.texture_truth).unwrap();
        assert!(texture >= 0.95, "{method:?} texture {texture}");
        // edges running through texture come out of the decomposition
        // low-passed, so the cartoon misses a thin band around them
        assert!(cartoon >= 0.97, "{method:?} cartoon {cartoon}");
        let l = &out.cartoon.labels;
        let mut map = [u32::MAX; 4];
        for (y, x) in [(16, 16), (16, 112), (112, 16), (112, 112)] {
            map[l.get(x, y) as usize] = scene.cartoon_truth.get(x, y);
        }
        for y in 0..128 {
            for x in 0..128 {
                if map[l.get(x, y) as usize] != scene.cartoon_truth.get(x, y) {
                    assert!(
                        edge_distance(x, y, 128) <= 6,
                        "{method:?} error at ({x}, {y})"
                    );
                }
            }
        }
    }
}

#[test]
fn composite_with_faint_texture_keeps_sharp_cartoon_edges() {
    let mut params = SceneParams::for_kind(SceneKind::Composite);
    for s in &mut params.stripes {
        s.amplitude = 5.0;
    }
    let scene = synth_generate(SceneKind::Composite, &params, 0).unwrap();
    let out = run_pipeline(&PipelineConfig::default(), &scene.image).unwrap();
    let cartoon = accuracy(&out.cartoon.labels, &scene.cartoon_truth).unwrap();
    assert!(cartoon >= 0.99, "cartoon {cartoon}");
}

#[test]
fn noisy_scenes_still_run() {
    let scene = synth_generate(
        SceneKind::Composite,
        &SceneParams {
            noise_std: 40.0,
            ..SceneParams::for_kind(SceneKind::Composite)
        },
        2,
    )
    .unwrap();
    let cfg = PipelineConfig::default();
    let out = run_pipeline(&cfg, &scene.image).unwrap();
    let t = out.report.texture.unwrap();
    assert!(t.n_subbands <= t.merged_subbands);
    assert!(accuracy(&out.texture.labels, &scene.texture_truth).unwrap() > 0.9);
}

#[test]
fn single_stripe_peaks_at_its_angle() {
    let params = SceneParams {
        stripes: vec![StripeField {
            angle_deg: 0.0,
            period: 8.0,
            amplitude: 40.0,
        }],
        ..SceneParams::default()
    };
    let scene = synth_generate(SceneKind::Stripes, &params, 0).unwrap();
    let polar = pseudo_polar(&scene.image.map(|v| v - 128.0)).unwrap();
    let (mut best, mut at) = (0.0, (0, 0));
    for i in 0..polar.n_theta() {
        for j in 1..polar.n_radius() {
            if polar.get(i, j) > best {
                best = polar.get(i, j);
                at = (i, j);
            }
        }
    }
    let theta = polar.theta(at.0);
    assert!(theta.min(PI - theta) < 1e-9, "peak at theta {theta}");
    assert!(
        (polar.radius(at.1) - 2.0 * PI / 8.0).abs() < 0.05,
        "peak at r {}",
        polar.radius(at.1)
    );
}

#[test]
fn fig10a_preset() {
    let mut cfg = PipelineConfig::default();
    preset("fig10a").unwrap().apply(&mut cfg);
    assert_eq!(cfg.detection.percentile, 0.92);
    assert_eq!(cfg.clustering.k, 5);
    assert_eq!(cfg.clustering.mbo.dt, 0.03);
}

#[test]
fn subband_dump_and_feature_export_round_trip() {
    let scene = synth_generate(SceneKind::Stripes, &SceneParams::default(), 0).unwrap();
    let ect = modified_ect(&scene.image, &DetectionParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_subbands(&dir.path().join("sub"), &ect.coeffs, &ect.bank).unwrap();
    let (back_manifest, back) = read_subbands(&dir.path().join("sub")).unwrap();
    assert_eq!(manifest, back_manifest);
    assert_eq!(back, ect.coeffs);
    let f = feature_matrix(&ect.coeffs, ect.bank.partition(), true).unwrap();
    f.export(dir.path(), "feat").unwrap();
    assert_eq!(FeatureMatrix::import(dir.path(), "feat").unwrap(), f);
    assert_eq!(f.cols(), ect.bank.n_subbands() + 1);
}
