use flowfit::body::{BodyParams, CameraParams, ImageSize, MeshTemplate};
use flowfit::render::FlowMap;
use flowfit::data::{generate, MotionConfig};
use flowfit::eval::{acceleration_error, flow_quality_audit, mpjpe, pmpjpe, procrustes, FlowSource};
use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_joints(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * spread)
        .collect()
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    Rotation3::new(axis.normalize() * rng.random_range(0.0..std::f64::consts::PI))
}

/// Least-squares similarity alignment found by gradient descent with
/// backtracking over (rotation vector, log scale, translation), followed by
/// the mean per-joint distance.
fn aligned_error_by_descent(pred: &[Vector3<f64>], gt: &[Vector3<f64>]) -> f64 {
    let norm = gt.iter().map(|g| g.norm()).fold(0.0, f64::max);
    let p: Vec<Vector3<f64>> = pred.iter().map(|x| x / norm).collect();
    let g: Vec<Vector3<f64>> = gt.iter().map(|x| x / norm).collect();
    let apply = |x: &[f64; 7], v: &Vector3<f64>| {
        Rotation3::new(Vector3::new(x[0], x[1], x[2])) * v * x[3].exp() + Vector3::new(x[4], x[5], x[6])
    };
    let cost = |x: &[f64; 7]| p.iter().zip(&g).map(|(a, b)| (apply(x, a) - b).norm_squared()).sum::<f64>();
    let mut x = [0.0; 7];
    let mut step = 0.1;
    let mut current = cost(&x);
    for _ in 0..20_000 {
        let mut grad = [0.0; 7];
        for k in 0..7 {
            let h = 1e-7;
            let (mut a, mut b) = (x, x);
            a[k] += h;
            b[k] -= h;
            grad[k] = (cost(&a) - cost(&b)) / (2.0 * h);
        }
        let gn: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn < 1e-13 {
            break;
        }
        loop {
            let mut trial = x;
            for k in 0..7 {
                trial[k] -= step * grad[k];
            }
            let c = cost(&trial);
            if c < current {
                x = trial;
                current = c;
                step *= 1.5;
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                break;
            }
        }
        if step < 1e-18 {
            break;
        }
    }
    p.iter().zip(&g).map(|(a, b)| (apply(&x, a) - b).norm()).sum::<f64>() / p.len() as f64 * norm
}

#[test]
fn pmpjpe_matches_descent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let gt = random_joints(&mut rng, 24, 500.0);
        let rot = random_rotation(&mut rng);
        let scale = rng.random_range(0.5..2.0);
        let shift = Vector3::new(100.0, -40.0, 250.0);
        let pred: Vec<Vector3<f64>> = gt
            .iter()
            .map(|g| {
                let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
                rot * (g + dir * rng.random_range(5.0..40.0)) * scale + shift
            })
            .collect();
        let closed = pmpjpe(&pred, &gt).unwrap();
        let oracle = aligned_error_by_descent(&pred, &gt);
        assert!((closed - oracle).abs() < 1e-3, "closed form {closed} vs descent {oracle}");
    }
}

#[test]
fn pmpjpe_is_invariant_to_rigid_motion_of_both_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let gt = random_joints(&mut rng, 24, 400.0);
    let pred: Vec<Vector3<f64>> = gt.iter().map(|g| g + random_joints(&mut rng, 1, 30.0)[0]).collect();
    let base = pmpjpe(&pred, &gt).unwrap();
    for _ in 0..20 {
        let rot = random_rotation(&mut rng);
        let t = random_joints(&mut rng, 1, 1000.0)[0];
        let move_all = |v: &[Vector3<f64>]| v.iter().map(|p| rot * p + t).collect::<Vec<_>>();
        let moved = pmpjpe(&move_all(&pred), &move_all(&gt)).unwrap();
        assert!((moved - base).abs() < 1e-9, "{moved} vs {base}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Least-squares alignment bounds the root-mean-square error; the mean
    // of per-joint norms can exceed its unaligned value by a hair.
    #[test]
    fn alignment_never_increases_rms_error(seed in any::<u64>(), noise in 1.0f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = random_joints(&mut rng, 24, 500.0);
        let pred: Vec<Vector3<f64>> = gt.iter().map(|g| g + random_joints(&mut rng, 1, noise)[0]).collect();
        let sim = procrustes(&pred, &gt).unwrap();
        let rms = |f: &dyn Fn(&Vector3<f64>) -> Vector3<f64>| {
            (pred.iter().zip(&gt).map(|(p, g)| (f(p) - g).norm_squared()).sum::<f64>() / gt.len() as f64).sqrt()
        };
        prop_assert!(rms(&|p| sim.apply(p)) <= rms(&|p| *p) + 1e-9);
        prop_assert!(pmpjpe(&pred, &gt).unwrap() <= 1.05 * mpjpe(&pred, &gt));
    }

    #[test]
    fn similarity_of_prediction_is_free(seed in any::<u64>(), scale in 0.2f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = random_joints(&mut rng, 24, 500.0);
        let rot = random_rotation(&mut rng);
        let pred: Vec<Vector3<f64>> = gt.iter().map(|g| rot * g * scale + Vector3::new(3.0, -7.0, 11.0)).collect();
        prop_assert!(pmpjpe(&pred, &gt).unwrap() < 1e-9);
    }

    #[test]
    fn accel_error_ignores_time_affine_offsets(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt: Vec<Vec<Vector3<f64>>> = (0..12).map(|_| random_joints(&mut rng, 5, 300.0)).collect();
        let offset = random_joints(&mut rng, 5, 100.0);
        let drift = random_joints(&mut rng, 5, 10.0);
        let pred: Vec<Vec<Vector3<f64>>> = gt
            .iter()
            .enumerate()
            .map(|(t, f)| f.iter().zip(offset.iter().zip(&drift)).map(|(p, (o, d))| p + o + d * t as f64).collect())
            .collect();
        prop_assert!(acceleration_error(&pred, &gt, 30.0).unwrap() < 1e-6);
    }
}

#[test]
fn sinusoidal_jitter_matches_analytic_acceleration() {
    let (amplitude, freq, fps, frames) = (5.0, 1.3, 30.0, 3000);
    let gt: Vec<Vec<Vector3<f64>>> = (0..frames).map(|t| vec![Vector3::new(t as f64, 0.0, 0.0); 4]).collect();
    let pred: Vec<Vec<Vector3<f64>>> = gt
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let jitter = amplitude * (std::f64::consts::TAU * freq * t as f64 / fps + 0.4).sin();
            f.iter().map(|p| p + Vector3::new(0.0, jitter, 0.0)).collect()
        })
        .collect();
    // A sampled sinusoid's second difference is the sinusoid times
    // -4 sin²(π f / fps); |sin| averages 2/π over many periods.
    let expected = 4.0 * amplitude * (std::f64::consts::PI * freq / fps).sin().powi(2) * fps * fps * 2.0 / std::f64::consts::PI;
    let got = acceleration_error(&pred, &gt, fps).unwrap();
    assert!((got - expected).abs() / expected < 0.02, "{got} vs {expected}");
}

#[test]
fn acceleration_error_needs_three_frames() {
    let seq = vec![vec![Vector3::zeros(); 3]; 2];
    assert!(acceleration_error(&seq, &seq, 30.0).is_err());
}

fn audit_corpus() -> (MeshTemplate, Vec<Vec<BodyParams>>, ImageSize) {
    let template = MeshTemplate::default_humanoid();
    let cfg = MotionConfig {
        num_sequences: 2,
        frames_per_sequence: 10,
        ..Default::default()
    };
    let truth = (0..cfg.num_sequences).map(|i| flowfit::data::trajectory(&cfg, i).params).collect();
    (template, truth, cfg.image_size())
}

#[test]
fn audit_flags_exact_predictions_as_degenerate() {
    // A rigidly translating body: the flow is one constant vector, equal to
    // every keypoint's motion, and the predictor is exact.
    let template = MeshTemplate::default_humanoid();
    let size = ImageSize::new(64, 64);
    let rest = flowfit::data::trajectory(&MotionConfig::default(), 0).params[0].clone();
    let cam = rest.camera();
    let step = 0.0625;
    let seq: Vec<BodyParams> = (0..6)
        .map(|t| rest.with_camera(CameraParams::new(cam.scale, cam.tx + step * t as f64, cam.ty).unwrap()).unwrap())
        .collect();
    let shift = nalgebra::Vector2::new(cam.scale * step * size.width as f64 / 2.0, 0.0);
    let maps = vec![vec![FlowMap::constant(size, shift); 5]];
    let truth = vec![seq];
    let report = flow_quality_audit(&template, &truth, &truth, FlowSource::Maps(&maps), size, 1, true).unwrap();
    assert_eq!(report.degenerate_samples, report.sample_count);
    assert!(report.ratio_mean.is_finite());
    assert!(report.mean_body_distance < 1e-9 && report.mean_flow_distance < 1e-6);
}

#[test]
fn audit_prefers_oracle_flow_over_perturbed_bodies() {
    let (template, truth, size) = audit_corpus();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let perturbed: Vec<Vec<BodyParams>> = truth
        .iter()
        .map(|seq| {
            seq.iter()
                .map(|p| {
                    let mut v = p.to_vec();
                    for x in v.iter_mut().take(72) {
                        *x += rng.random_range(-0.05..0.05);
                    }
                    BodyParams::from_slice(&v).unwrap()
                })
                .collect()
        })
        .collect();
    for dt in [1, 3] {
        let report = flow_quality_audit(&template, &truth, &perturbed, FlowSource::Oracle, size, dt, true).unwrap();
        assert!(report.ratio_mean > 1.0, "delta_t {dt}: {report:?}");
        assert!(report.sample_count > 0);
    }
}

#[test]
fn audit_with_stored_maps_matches_rendered_oracle() {
    let template = MeshTemplate::default_humanoid();
    let cfg = MotionConfig {
        num_sequences: 1,
        frames_per_sequence: 5,
        ..Default::default()
    };
    let ds = generate(&template, &cfg, 1).unwrap();
    let truth = flowfit::eval::ground_truth(&ds).unwrap();
    let maps: Vec<_> = ds.sequences.iter().map(|s| s.forward_flows.clone()).collect();
    let a = flow_quality_audit(&template, &truth, &truth, FlowSource::Maps(&maps), ds.size, 1, true).unwrap();
    let b = flow_quality_audit(&template, &truth, &truth, FlowSource::Oracle, ds.size, 1, true).unwrap();
    assert!((a.mean_flow_distance - b.mean_flow_distance).abs() < 1e-4, "{a:?} {b:?}");
}
