//! Piecewise-constant regression problems with Gaussian noise.
//!
//! Each feature is uniform on `[0, 1)` and cut into `bins` equal cells; each
//! cell carries a random level in `[-amplitude, amplitude]`. The target is
//! the sum of the per-feature levels plus `N(0, noise_sd²)` noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub bins: usize,
    pub amplitude: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn generate(&self) -> Dataset {
        assert!(self.n >= 1 && self.d >= 1 && self.bins >= 1, "degenerate synthetic spec");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let levels: Vec<Vec<f64>> = (0..self.d)
            .map(|_| {
                (0..self.bins)
                    .map(|_| rng.random_range(-self.amplitude..=self.amplitude))
                    .collect()
            })
            .collect();
        let noise = Normal::new(0.0, self.noise_sd).expect("noise_sd must be finite and >= 0");
        let mut features = Vec::with_capacity(self.n * self.d);
        let mut targets = Vec::with_capacity(self.n);
        for _ in 0..self.n {
            let mut y = 0.0;
            for table in &levels {
                let x: f64 = rng.random();
                let cell = ((x * self.bins as f64) as usize).min(self.bins - 1);
                y += table[cell];
                features.push(x);
            }
            targets.push(y + noise.sample(&mut rng));
        }
        let names = (0..self.d).map(|j| format!("x{j}")).collect();
        Dataset::new(names, "y", features, targets).expect("generated values are finite")
    }
}

/// Six bundled problems spanning 500 to 5000 samples.
pub fn standard_suite() -> Vec<SyntheticSpec> {
    let make = |name: &str, n, d, bins, amplitude, noise_sd, seed| SyntheticSpec {
        name: name.to_string(),
        n,
        d,
        bins,
        amplitude,
        noise_sd,
        seed,
    };
    vec![
        make("steps_500", 500, 3, 4, 2.0, 2.0, 11),
        make("steps_800", 800, 4, 3, 1.5, 2.5, 12),
        make("steps_1200", 1200, 2, 6, 3.0, 3.0, 13),
        make("steps_2000", 2000, 5, 4, 1.0, 2.0, 14),
        make("steps_3500", 3500, 3, 5, 2.0, 4.0, 15),
        make("steps_5000", 5000, 6, 3, 1.0, 2.5, 16),
    ]
}

/// Constant target, for sanity checks.
pub fn constant(n: usize, d: usize, value: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = (0..n * d).map(|_| rng.random::<f64>()).collect();
    let names = (0..d).map(|j| format!("x{j}")).collect();
    Dataset::new(names, "y", features, vec![value; n]).expect("finite values")
}
