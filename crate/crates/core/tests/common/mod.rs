//! Independent Monte Carlo oracle for the disk geometry, written without
//! the crate's own samplers.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tsge::swipt::SwiptScenario;

pub struct Drop {
    pub r: Vec<f64>,
    pub los: Vec<bool>,
}

/// Rejection-samples points in the square around the disk.
pub fn drop(s: &SwiptScenario, rng: &mut ChaCha20Rng) -> Drop {
    let mut r = Vec::with_capacity(s.num_devices);
    let mut los = Vec::with_capacity(s.num_devices);
    while r.len() < s.num_devices {
        let x: f64 = rng.random_range(-s.radius..s.radius);
        let y: f64 = rng.random_range(-s.radius..s.radius);
        let d = x.hypot(y);
        if d < s.radius {
            r.push(d);
            los.push(rng.random_bool((-s.blockage_rate * d).exp()));
        }
    }
    Drop { r, los }
}

pub struct Oracle {
    pub n: usize,
    pub all_los: f64,
    pub best_los: f64,
    pub best_rate: f64,
    pub nearest_los: Vec<f64>,
    pub nearest_nlos: Vec<f64>,
}

impl Oracle {
    pub fn run(s: &SwiptScenario, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (mut all_los, mut best_los, mut rate) = (0usize, 0usize, 0.0);
        let mut nearest_los = Vec::with_capacity(n);
        let mut nearest_nlos = Vec::with_capacity(n);
        for _ in 0..n {
            let d = drop(s, &mut rng);
            all_los += d.los.iter().all(|&l| l) as usize;
            let near = |want: bool| d.r.iter().zip(&d.los).filter(|p| *p.1 == want).map(|p| *p.0).fold(f64::INFINITY, f64::min);
            nearest_los.push(near(true));
            nearest_nlos.push(near(false));
            // Strongest device by received power.
            let power = |i: usize| {
                let g = if d.los[i] { s.gamma_los } else { s.gamma_nlos };
                s.pathloss_coeff * s.tx_power * d.r[i].powf(-g).min(1.0)
            };
            let b = (0..d.r.len()).max_by(|&a, &b| power(a).total_cmp(&power(b))).unwrap();
            best_los += d.los[b] as usize;
            rate += s.bandwidth * (1.0 + power(b) / s.noise).log2();
        }
        let m = n as f64;
        Self { n, all_los: all_los as f64 / m, best_los: best_los as f64 / m, best_rate: rate / m, nearest_los, nearest_nlos }
    }

    pub fn ccdf(samples: &[f64], x: f64) -> f64 {
        samples.iter().filter(|&&d| d >= x).count() as f64 / samples.len() as f64
    }

    /// Binomial standard error of a proportion at `p`.
    pub fn se(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.n as f64).sqrt()
    }
}

/// Interior grid of `points` distances in `(0, R)`.
pub fn grid(s: &SwiptScenario, points: usize) -> Vec<f64> {
    (1..=points).map(|i| s.radius * i as f64 / (points + 1) as f64).collect()
}
