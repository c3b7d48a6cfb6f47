//! Shared test oracles: dense-grid quadrature for the functional definitions
//! of both belief updates, and inverse-CDF samplers for the two duration
//! models. Everything here is deliberately brute-force and independent of the
//! closed forms under test.

#![allow(dead_code)]

use rand::Rng;

/// Mean and variance of an unnormalized density evaluated on a uniform grid.
///
/// Trapezoid weights are uniform up to the endpoints, which lie ~18 standard
/// deviations out for every state exercised by the tests, so a plain
/// rectangle sum is spectrally accurate here.
fn grid_moments(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let dx = (hi - lo) / (n - 1) as f64;
    let (mut z, mut m1) = (0.0, 0.0);
    let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * dx).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    for (&x, &fx) in xs.iter().zip(&fs) {
        z += fx;
        m1 += x * fx;
    }
    let mean = m1 / z;
    let mut m2 = 0.0;
    for (&x, &fx) in xs.iter().zip(&fs) {
        m2 += (x - mean) * (x - mean) * fx;
    }
    (mean, m2 / z)
}

const GRID_LO: f64 = -80.0;
const GRID_HI: f64 = 80.0;
const GRID_N: usize = 160_001;

/// Posterior mean and variance of the discounted Bayes update, computed by
/// quadrature over the unnormalized density [P(mu)]^(1-beta) * P(d|mu) with
/// P(mu) = N(theta, phi) and P(d|mu) = N(mu, sigma).
pub fn bayes_update_oracle(theta: f64, phi: f64, sigma: f64, beta: f64, d: f64) -> (f64, f64) {
    grid_moments(GRID_LO, GRID_HI, GRID_N, |mu| {
        let prior = -(mu - theta) * (mu - theta) / (2.0 * phi);
        let lik = -(d - mu) * (d - mu) / (2.0 * sigma);
        ((1.0 - beta) * prior + lik).exp()
    })
}

/// Variance of the inverse update, computed by quadrature over d of the
/// unnormalized density [P(mu)/P(d)]^beta * P(d|mu), where
/// P(d) = N(theta, sigma + phi) is the predictive density. The mu-dependent
/// prior factor is constant in d and drops out of the moments.
pub fn inverse_update_oracle(theta: f64, phi: f64, sigma: f64, beta: f64, mu: f64) -> f64 {
    let (_, var) = grid_moments(GRID_LO, GRID_HI, GRID_N, |d| {
        let pred = -(d - theta) * (d - theta) / (2.0 * (sigma + phi));
        let lik = -(d - mu) * (d - mu) / (2.0 * sigma);
        (lik - beta * pred).exp()
    });
    var
}

/// Predictive density at d by quadrature: integral of P(mu) P(d|mu) d mu.
pub fn predictive_density_oracle(theta: f64, phi: f64, sigma: f64, d: f64) -> f64 {
    let dx = (GRID_HI - GRID_LO) / (GRID_N - 1) as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * (phi * sigma).sqrt());
    (0..GRID_N)
        .map(|i| {
            let mu = GRID_LO + i as f64 * dx;
            let prior = -(mu - theta) * (mu - theta) / (2.0 * phi);
            let lik = -(d - mu) * (d - mu) / (2.0 * sigma);
            norm * (prior + lik).exp() * dx
        })
        .sum()
}

/// Exact inverse-CDF sampler for the discrete truncated power law
/// p(tau) proportional to tau^-gamma on [tau_min, tau_max].
pub struct TpSampler {
    tau_min: u64,
    cum: Vec<f64>,
}

impl TpSampler {
    pub fn new(gamma: f64, tau_min: u64, tau_max: u64) -> Self {
        assert!(tau_min >= 1 && tau_min <= tau_max);
        let mut cum = Vec::with_capacity((tau_max - tau_min + 1) as usize);
        let mut acc = 0.0;
        for tau in tau_min..=tau_max {
            acc += (tau as f64).powf(-gamma);
            cum.push(acc);
        }
        Self { tau_min, cum }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = rng.random::<f64>() * self.cum.last().unwrap();
        let idx = self.cum.partition_point(|&c| c < u);
        self.tau_min + idx.min(self.cum.len() - 1) as u64
    }
}

/// Sampler for the discrete (geometric-type) exponential
/// p(tau) = (1 - e^-lambda) e^(-lambda (tau - tau_min)) for tau >= tau_min.
pub fn sample_ep<R: Rng + ?Sized>(lambda: f64, tau_min: u64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    tau_min + (-(1.0 - u).ln() / lambda).floor() as u64
}
