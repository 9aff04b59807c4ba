use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Tensor;

/// Xavier (Glorot) normal initialisation: `N(0, 2 / (fan_in + fan_out))`.
pub fn xavier_normal<R: Rng + ?Sized>(t: &mut Tensor, fan_in: usize, fan_out: usize, rng: &mut R) {
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("positive std");
    for v in t.data_mut() {
        *v = dist.sample(rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_weights() {
        let draw = |seed| {
            let mut t = Tensor::zeros([50, 50]);
            xavier_normal(&mut t, 50, 50, &mut ChaCha8Rng::seed_from_u64(seed));
            t
        };
        assert_eq!(draw(4), draw(4));
        assert_ne!(draw(4), draw(5));
    }

    #[test]
    fn empirical_variance_near_target() {
        let target = 2.0 / 100.0;
        for seed in 0..10 {
            let mut t = Tensor::zeros([50, 50]);
            xavier_normal(&mut t, 50, 50, &mut ChaCha8Rng::seed_from_u64(seed));
            let n = t.len() as f64;
            let mean = t.data().iter().sum::<f64>() / n;
            let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!((var - target).abs() < 0.2 * target, "seed {seed}: {var}");
        }
    }
}
