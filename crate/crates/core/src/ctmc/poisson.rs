//! Truncated Poisson weights for uniformization.

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

/// Poisson(`rate`) probabilities on `[left, right]`, chosen so that the mass
/// outside the window is below the requested tolerance. Weights are exact pmf
/// values (not renormalized), so the omitted tail stays visible in their sum.
#[derive(Debug, Clone)]
pub struct PoissonWeights {
    left: usize,
    weights: Vec<f64>,
}

impl PoissonWeights {
    pub fn new(rate: f64, tolerance: f64) -> Self {
        assert!(rate >= 0.0 && rate.is_finite(), "invalid Poisson rate {rate}");
        if rate == 0.0 {
            return PoissonWeights {
                left: 0,
                weights: vec![1.0],
            };
        }
        let half = tolerance / 2.0;
        let mode = rate.floor() as usize;
        let w_mode = ln_pmf(mode, rate).exp();

        // Walk left: w_{k-1} = w_k * k / rate. Below k the ratios are at most
        // k / rate, so the remaining tail is bounded by a geometric series.
        let mut below = Vec::new();
        let mut w = w_mode;
        let mut k = mode;
        while k > 0 {
            let r = k as f64 / rate;
            if r < 1.0 && w * r / (1.0 - r) < half {
                break;
            }
            w *= r;
            k -= 1;
            below.push(w);
        }
        let left = k;

        // Walk right: w_{k+1} = w_k * rate / (k + 1).
        let mut above = Vec::new();
        let mut w = w_mode;
        let mut k = mode;
        loop {
            let r_next = rate / (k + 1) as f64;
            let r_tail = rate / (k + 2) as f64;
            if r_tail < 1.0 && w * r_next / (1.0 - r_tail) < half {
                break;
            }
            w *= r_next;
            k += 1;
            above.push(w);
        }

        let mut weights = Vec::with_capacity(below.len() + 1 + above.len());
        weights.extend(below.into_iter().rev());
        weights.push(w_mode);
        weights.extend(above);
        PoissonWeights { left, weights }
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn right(&self) -> usize {
        self.left + self.weights.len() - 1
    }

    /// Weight of `k` jumps; zero outside the window.
    pub fn weight(&self, k: usize) -> f64 {
        if k < self.left {
            return 0.0;
        }
        self.weights.get(k - self.left).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// `ln P(K = k)` in the saddle-point form `-stirlerr(k) - bd0(k, rate) -
/// ln(2 pi k) / 2`, which keeps full relative precision for large rates where
/// `k ln(rate) - ln k!` cancels catastrophically.
fn ln_pmf(k: usize, rate: f64) -> f64 {
    if k == 0 {
        return -rate;
    }
    let x = k as f64;
    let bd0 = x * ((x - rate) / rate).ln_1p() - (x - rate);
    -stirling_error(x) - bd0 - 0.5 * (2.0 * PI * x).ln()
}

/// `ln(x!) - [(x + 1/2) ln x - x + ln(2 pi) / 2]`.
fn stirling_error(x: f64) -> f64 {
    if x <= 15.0 {
        return ln_gamma(x + 1.0) - (x + 0.5) * x.ln() + x - 0.5 * (2.0 * PI).ln();
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}
