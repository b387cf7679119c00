use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Adds i.i.d. Gaussian noise to every channel value and clips to [0, 1].
pub fn apply_color_noise(image: &[f32], std: f64, seed: u64) -> Vec<f32> {
    if std <= 0.0 {
        return image.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, std).expect("finite std");
    image
        .iter()
        .map(|&c| (c as f64 + dist.sample(&mut rng)).clamp(0.0, 1.0) as f32)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_std_is_identity() {
        let img = vec![0.1, 0.5, 0.9, 1.0];
        assert_eq!(apply_color_noise(&img, 0.0, 3), img);
    }

    #[test]
    fn seeded_and_clipped() {
        let img = vec![0.5f32; 300];
        let a = apply_color_noise(&img, 0.3, 7);
        assert_eq!(a, apply_color_noise(&img, 0.3, 7));
        assert_ne!(a, apply_color_noise(&img, 0.3, 8));
        assert!(a.iter().all(|&c| (0.0..=1.0).contains(&c)));
    }
}
