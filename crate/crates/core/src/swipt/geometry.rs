//! Distance and visibility statistics of a binomial point process in a disk
//! with exponential LOS blockage, plus a Monte Carlo twin of each quantity.

use rand::Rng as _;

use super::SwiptScenario;
use crate::error::{invalid, Result};
use crate::quad::integrate;
use crate::{seeded_rng, streams, Rng};

const QUAD_TOL: f64 = 1e-12;

/// Device distances and LOS states for one network drop.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceRealization {
    pub distances: Vec<f64>,
    pub los: Vec<bool>,
}

impl DeviceRealization {
    /// Drops `num_devices` points uniformly in the disk and draws each LOS
    /// state with probability `exp(-omega r)`.
    pub fn sample(s: &SwiptScenario, rng: &mut Rng) -> Self {
        let n = s.num_devices;
        let mut distances = Vec::with_capacity(n);
        let mut los = Vec::with_capacity(n);
        for _ in 0..n {
            let r = s.radius * rng.random::<f64>().sqrt();
            distances.push(r);
            los.push(rng.random::<f64>() < (-s.blockage_rate * r).exp());
        }
        Self { distances, los }
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    pub fn effective_distances(&self, s: &SwiptScenario) -> Vec<f64> {
        self.distances
            .iter()
            .zip(&self.los)
            .map(|(&r, &l)| s.effective_distance(r, l))
            .collect()
    }

    /// Index of the strongest device, lowest index on ties.
    pub fn best_device(&self, s: &SwiptScenario) -> usize {
        let eff = self.effective_distances(s);
        (0..eff.len())
            .min_by(|&a, &b| eff[a].total_cmp(&eff[b]).then(a.cmp(&b)))
            .unwrap_or(0)
    }
}

/// LOS probability of a device uniform in the disk of radius `x`:
/// `int_0^x exp(-omega t) 2t / x^2 dt`, by quadrature.
pub fn los_fraction_within(omega: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    integrate(|t| (-omega * t).exp() * 2.0 * t / (x * x), 0.0, x, QUAD_TOL)
}

/// Antiderivative of the same integral, `2 (1 - e^-u (1 + u)) / u^2` with
/// `u = omega x`.
pub fn los_fraction_closed_form(omega: f64, x: f64) -> f64 {
    let u = omega * x;
    if u < 1e-3 {
        return 1.0 - 2.0 * u / 3.0 + u * u / 4.0 - u * u * u / 15.0;
    }
    2.0 * (1.0 - (-u).exp() * (1.0 + u)) / (u * u)
}

/// Probability that every device is LOS.
pub fn b_l(s: &SwiptScenario) -> f64 {
    los_fraction_within(s.blockage_rate, s.radius).powi(s.num_devices as i32)
}

/// Probability that every device is NLOS.
pub fn b_n(s: &SwiptScenario) -> f64 {
    (1.0 - los_fraction_within(s.blockage_rate, s.radius)).powi(s.num_devices as i32)
}

fn check_x(s: &SwiptScenario, x: f64) -> Result<()> {
    if !(x > 0.0 && x < s.radius) {
        return invalid(format!("x = {x} outside (0, {})", s.radius));
    }
    Ok(())
}

/// `P(r_L1 >= x)`: no device is both within `x` and LOS, i.e.
/// `(1 - (x^2/R^2) A(x))^K` with `A(x)` the in-disk LOS fraction.
pub fn nearest_los_ccdf(s: &SwiptScenario, x: f64) -> Result<f64> {
    check_x(s, x)?;
    let p = x * x / (s.radius * s.radius);
    let a = los_fraction_within(s.blockage_rate, x);
    Ok((1.0 - p * a).powi(s.num_devices as i32))
}

/// `P(r_N1 >= x)`, the NLOS twin `(1 - (x^2/R^2)(1 - A(x)))^K`.
pub fn nearest_nlos_ccdf(s: &SwiptScenario, x: f64) -> Result<f64> {
    check_x(s, x)?;
    let p = x * x / (s.radius * s.radius);
    let a = los_fraction_within(s.blockage_rate, x);
    Ok((1.0 - p * (1.0 - a)).powi(s.num_devices as i32))
}

/// The geometric-series closed form with `U_L(x) = 2(1 - exp(-omega x
/// (omega x + 1))) / (omega^2 x)`, kept for comparison only. It does not
/// agree with the Monte Carlo distribution.
pub fn nearest_los_ccdf_displayed(s: &SwiptScenario, x: f64) -> Result<f64> {
    check_x(s, x)?;
    let (r2, x2, w) = (s.radius * s.radius, x * x, s.blockage_rate);
    let u = 2.0 * (1.0 - (-w * x * (w * x + 1.0)).exp()) / (w * w * x);
    let z = x2 * u * r2 / (r2 - x2);
    let k = s.num_devices as i32;
    let series = if (z - 1.0).abs() < 1e-12 {
        (k + 1) as f64
    } else {
        (z.powi(k + 1) - 1.0) / (z - 1.0)
    };
    Ok(series * ((r2 - x2) / r2).powi(k))
}

/// `P(one device is LOS and within s)`.
fn cdf_los(s: &SwiptScenario, d: f64) -> f64 {
    let d = d.min(s.radius);
    d * d / (s.radius * s.radius) * los_fraction_closed_form(s.blockage_rate, d)
}

/// `P(one device is NLOS and within u)`.
fn cdf_nlos(s: &SwiptScenario, u: f64) -> f64 {
    let u = u.min(s.radius);
    u * u / (s.radius * s.radius) * (1.0 - los_fraction_closed_form(s.blockage_rate, u))
}

/// `P(one device's LOS-equivalent distance exceeds d)`.
fn effective_survival(s: &SwiptScenario, d: f64) -> f64 {
    let u = d.powf(1.0 / s.nlos_exponent_ratio());
    (1.0 - cdf_los(s, d) - cdf_nlos(s, u)).max(0.0)
}

/// `E[h(best LOS-equivalent distance)]` for a device count `K`:
/// `K int_0^R (2r/R^2) [p_L(r) h(r) G(r)^(K-1) + (1 - p_L(r)) h(r') G(r')^(K-1)] dr`
/// with `r' = r^(gamma_N/gamma_L)` and `G` the per-device survival.
fn best_device_expectation<H: Fn(f64, bool) -> f64>(s: &SwiptScenario, h: H) -> Result<f64> {
    s.validate()?;
    let k = s.num_devices as i32;
    let r2 = s.radius * s.radius;
    let rho = s.nlos_exponent_ratio();
    let f = |r: f64| {
        let pl = (-s.blockage_rate * r).exp();
        let rn = r.powf(rho);
        let los = pl * h(r, true) * effective_survival(s, r).powi(k - 1);
        let nlos = (1.0 - pl) * h(r, false) * effective_survival(s, rn).powi(k - 1);
        k as f64 * 2.0 * r / r2 * (los + nlos)
    };
    Ok(integrate(f, 0.0, s.radius, QUAD_TOL))
}

/// Probability that the strongest device is LOS.
pub fn prob_best_is_los(s: &SwiptScenario) -> Result<f64> {
    best_device_expectation(s, |_, los| if los { 1.0 } else { 0.0 })
}

/// Expected Shannon rate of the strongest device under fading-averaged power.
pub fn expected_best_rate(s: &SwiptScenario) -> Result<f64> {
    let se = best_device_expectation(s, |r, los| s.rate(s.received_power(r, los, 1.0)) / s.bandwidth)?;
    Ok(se * s.bandwidth)
}

/// Monte Carlo estimates of the geometry quantities from independent drops.
#[derive(Debug, Clone)]
pub struct GeometryMonteCarlo {
    pub realizations: usize,
    pub all_los: f64,
    pub all_nlos: f64,
    pub best_is_los: f64,
    pub mean_best_rate: f64,
    /// Infinite when the drop has no LOS device.
    pub nearest_los: Vec<f64>,
    pub nearest_nlos: Vec<f64>,
}

impl GeometryMonteCarlo {
    pub fn run(s: &SwiptScenario, realizations: usize, seed: u64) -> Result<Self> {
        s.validate()?;
        if realizations == 0 {
            return invalid("at least one realization is required");
        }
        let mut rng = seeded_rng(seed, streams::GEOMETRY);
        let (mut all_los, mut all_nlos, mut best_los, mut rate) = (0usize, 0usize, 0usize, 0.0);
        let mut nearest_los = Vec::with_capacity(realizations);
        let mut nearest_nlos = Vec::with_capacity(realizations);
        for _ in 0..realizations {
            let d = DeviceRealization::sample(s, &mut rng);
            all_los += usize::from(d.los.iter().all(|&l| l));
            all_nlos += usize::from(d.los.iter().all(|&l| !l));
            let nearest = |want: bool| {
                d.distances
                    .iter()
                    .zip(&d.los)
                    .filter(|(_, &l)| l == want)
                    .map(|(&r, _)| r)
                    .fold(f64::INFINITY, f64::min)
            };
            nearest_los.push(nearest(true));
            nearest_nlos.push(nearest(false));
            let b = d.best_device(s);
            best_los += usize::from(d.los[b]);
            rate += s.rate(s.received_power(d.distances[b], d.los[b], 1.0));
        }
        let n = realizations as f64;
        Ok(Self {
            realizations,
            all_los: all_los as f64 / n,
            all_nlos: all_nlos as f64 / n,
            best_is_los: best_los as f64 / n,
            mean_best_rate: rate / n,
            nearest_los,
            nearest_nlos,
        })
    }

    pub fn los_ccdf(&self, x: f64) -> f64 {
        survival(&self.nearest_los, x)
    }

    pub fn nlos_ccdf(&self, x: f64) -> f64 {
        survival(&self.nearest_nlos, x)
    }

    /// Binomial standard error of a proportion estimate at `p`.
    pub fn standard_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.realizations as f64).sqrt()
    }
}

fn survival(samples: &[f64], x: f64) -> f64 {
    samples.iter().filter(|&&d| d >= x).count() as f64 / samples.len() as f64
}
