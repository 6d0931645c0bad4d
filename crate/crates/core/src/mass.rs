//! Initial mass vectors for the three model families and the limit
//! constants that drive the scaled analysis.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sum::compensated_sum;

/// A finite, non-increasing vector of strictly positive component masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassVector {
    masses: Vec<f64>,
    n_label: usize,
}

impl MassVector {
    /// Builds a vector from arbitrary non-negative masses. Zeros are dropped
    /// and the rest sorted non-increasingly.
    pub fn new(masses: Vec<f64>, n_label: usize) -> Result<Self> {
        if let Some(&bad) = masses.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::InvalidMass(bad));
        }
        let mut masses: Vec<f64> = masses.into_iter().filter(|&x| x > 0.0).collect();
        if masses.is_empty() {
            return Err(Error::EmptyVector);
        }
        masses.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { masses, n_label })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn n_label(&self) -> usize {
        self.n_label
    }

    pub fn kappa(&self) -> usize {
        self.masses.len()
    }

    pub fn summary(&self) -> MassSummary {
        MassSummary {
            sigma1: compensated_sum(self.masses.iter().copied()),
            sigma2: compensated_sum(self.masses.iter().map(|x| x * x)),
            kappa: self.masses.len(),
        }
    }

    /// Every mass multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.masses.iter().map(|x| x * factor).collect(), self.n_label)
    }

    /// SHA-256 over the little-endian bit patterns of the masses, hex encoded.
    pub fn spec_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_label as u64).to_le_bytes());
        for m in &self.masses {
            hasher.update(m.to_bits().to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassSummary {
    pub sigma1: f64,
    pub sigma2: f64,
    pub kappa: usize,
}

impl MassSummary {
    /// Total merge rate of a state with these aggregates.
    pub fn total_rate(&self) -> f64 {
        if self.kappa < 2 {
            0.0
        } else {
            0.5 * (self.sigma1 * self.sigma1 - self.sigma2)
        }
    }
}

pub fn unit_masses(n: usize) -> Result<MassVector> {
    if n == 0 {
        return Err(Error::EmptyVector);
    }
    MassVector::new(vec![1.0; n], n)
}

/// `n` unit masses plus the perturbation masses `thetas`.
pub fn generalized_er(n: usize, thetas: &[f64]) -> Result<MassVector> {
    if let Some(&bad) = thetas.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::NonPositiveTheta(bad));
    }
    if n == 0 && thetas.is_empty() {
        return Err(Error::EmptyVector);
    }
    let mut masses = vec![1.0; n];
    masses.extend_from_slice(thetas);
    MassVector::new(masses, n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    PointMass {
        w0: f64,
    },
    /// `F(x) = 1 - x^(-a)` on `[1, inf)`.
    Pareto {
        a: f64,
    },
    Exponential {
        lambda: f64,
    },
    /// Pairs `(u_k, v_k)` with `u_0 = 0 < u_1 < ...` and non-increasing
    /// `v_k`; the upper quantile is `v_k` on `[u_k, u_{k+1})`.
    Tabulated {
        table: Vec<(f64, f64)>,
    },
}

/// A weight distribution described by its upper quantile function
/// `u -> F^{-1}(1 - u)`, with the convention `F^{-1}(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSpec {
    distribution: Distribution,
}

impl QuantileSpec {
    pub fn point_mass(w0: f64) -> Result<Self> {
        if !(w0 > 0.0 && w0.is_finite()) {
            return Err(Error::InvalidDistribution(format!("point mass at {w0}")));
        }
        Ok(Self {
            distribution: Distribution::PointMass { w0 },
        })
    }

    pub fn pareto(a: f64) -> Result<Self> {
        if !(a > 2.0 && a.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "Pareto exponent {a} must exceed 2 for a finite second moment"
            )));
        }
        Ok(Self {
            distribution: Distribution::Pareto { a },
        })
    }

    pub fn exponential(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidDistribution(format!("exponential rate {lambda}")));
        }
        Ok(Self {
            distribution: Distribution::Exponential { lambda },
        })
    }

    pub fn tabulated(table: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidDistribution(format!("tabulated inverse: {msg}")));
        match table.first() {
            None => return bad("empty table"),
            Some(&(u0, _)) if u0 != 0.0 => return bad("first abscissa must be 0"),
            _ => {}
        }
        for w in table.windows(2) {
            if !(w[1].0 > w[0].0) {
                return bad("abscissae must be strictly increasing");
            }
            if w[1].1 > w[0].1 {
                return bad("values must be non-increasing");
            }
        }
        if table
            .iter()
            .any(|&(u, v)| !(0.0..1.0).contains(&u) || !(v >= 0.0) || !v.is_finite())
        {
            return bad("abscissae must lie in [0, 1) and values be finite and non-negative");
        }
        if table[0].1 <= 0.0 {
            return Err(Error::DegenerateDistribution);
        }
        Ok(Self {
            distribution: Distribution::Tabulated { table },
        })
    }

    pub fn distribution(&self) -> &Distribution {
        &self.distribution
    }

    /// `F^{-1}(1 - u)` for `u` in `(0, 1]`; exactly 0 at `u = 1`.
    pub fn upper_quantile(&self, u: f64) -> f64 {
        if u >= 1.0 {
            return 0.0;
        }
        match &self.distribution {
            Distribution::PointMass { w0 } => *w0,
            Distribution::Pareto { a } => u.powf(-1.0 / a),
            Distribution::Exponential { lambda } => -u.ln() / lambda,
            Distribution::Tabulated { table } => {
                let idx = table.partition_point(|&(uk, _)| uk <= u);
                table[idx.saturating_sub(1)].1
            }
        }
    }

    /// Generalized inverse `F^{-1}(p)` on `[0, 1)`.
    pub fn inverse_cdf(&self, p: f64) -> f64 {
        self.upper_quantile(1.0 - p)
    }

    pub fn first_moment(&self) -> f64 {
        self.moment(1)
    }

    pub fn second_moment(&self) -> f64 {
        self.moment(2)
    }

    /// `E[W^k]` in closed form, for `k` in {1, 2}.
    pub fn moment(&self, k: i32) -> f64 {
        match &self.distribution {
            Distribution::PointMass { w0 } => w0.powi(k),
            Distribution::Pareto { a } => a / (a - k as f64),
            Distribution::Exponential { lambda } => {
                let fact: f64 = (1..=k).map(f64::from).product();
                fact / lambda.powi(k)
            }
            Distribution::Tabulated { table } => compensated_sum(table.iter().enumerate().map(|(i, &(u, v))| {
                let next = table.get(i + 1).map_or(1.0, |p| p.0);
                v.powi(k) * (next - u)
            })),
        }
    }
}

/// Norros–Reittu weights `w_i = F^{-1}(1 - i/n)`, normalized by `sqrt(l_n)`.
pub fn quantile_masses(n: usize, spec: &QuantileSpec) -> Result<MassVector> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("quantile masses need n >= 2, got {n}")));
    }
    let weights: Vec<f64> = (1..=n).map(|i| spec.upper_quantile(i as f64 / n as f64)).collect();
    let l_n = compensated_sum(weights.iter().copied());
    if !(l_n > 0.0) {
        return Err(Error::DegenerateDistribution);
    }
    let scale = l_n.sqrt();
    MassVector::new(weights.into_iter().map(|w| w / scale).collect(), n)
}

/// Normalizers and limit constants for the scaled component-count process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitParams {
    pub varkappa: f64,
    pub varsigma: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl LimitParams {
    pub fn new(varkappa: f64, varsigma: f64, alpha: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        if !(varkappa > 0.0 && varkappa.is_finite()) {
            return Err(Error::InvalidParams(format!("varkappa = {varkappa}")));
        }
        if !(varsigma > 0.0 && varsigma.is_finite()) {
            return Err(Error::InvalidParams(format!("varsigma = {varsigma}")));
        }
        if !(beta1 >= 0.0 && beta2 >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "beta1 = {beta1}, beta2 = {beta2} must be non-negative"
            )));
        }
        Ok(Self {
            varkappa,
            varsigma,
            alpha,
            beta1,
            beta2,
        })
    }

    /// Unscaled process time corresponding to scaled time `t`.
    pub fn process_time(&self, t: f64) -> f64 {
        t / self.varsigma
    }
}

/// Finite-n values of the two discrepancies whose limits are beta1, beta2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteNDiagnostics {
    pub kappa_discrepancy: f64,
    pub alpha_discrepancy: f64,
    pub alpha_n: f64,
}

pub fn limit_params_er(n: usize) -> LimitParams {
    let n = n.max(1) as f64;
    LimitParams {
        varkappa: n,
        varsigma: n,
        alpha: 1.0,
        beta1: 0.0,
        beta2: 0.0,
    }
}

pub fn limit_params_general(
    summary: &MassSummary,
    varkappa: f64,
    varsigma: f64,
    alpha: f64,
    beta1: f64,
    beta2: f64,
) -> Result<(LimitParams, FiniteNDiagnostics)> {
    let params = LimitParams::new(varkappa, varsigma, alpha, beta1, beta2)?;
    let root = varkappa.sqrt();
    let alpha_n = summary.sigma1 * summary.sigma1 / (varkappa * varsigma);
    let diag = FiniteNDiagnostics {
        kappa_discrepancy: root * (summary.kappa as f64 / varkappa - 1.0),
        alpha_discrepancy: root * (alpha_n - alpha),
        alpha_n,
    };
    Ok((params, diag))
}

/// `(beta1, beta2)` for the generalized Erdős–Rényi family, evaluated at
/// finite n as `m / sqrt(n)` and `2 sum(theta) / sqrt(n)`.
pub fn ger_betas(n: usize, thetas: &[f64]) -> (f64, f64) {
    let root = (n as f64).sqrt();
    (
        thetas.len() as f64 / root,
        2.0 * compensated_sum(thetas.iter().copied()) / root,
    )
}

/// Generalized Erdős–Rényi limit parameters with `varkappa = varsigma = n`.
pub fn limit_params_ger(n: usize, thetas: &[f64]) -> Result<LimitParams> {
    let (b1, b2) = ger_betas(n, thetas);
    LimitParams::new(n as f64, n as f64, 1.0, b1, b2)
}

/// Norros–Reittu limit parameters in scaled time:
/// `varsigma = E[W^2]/E[W]`, `alpha = E[W]^2/E[W^2]`.
pub fn limit_params_nr(n: usize, spec: &QuantileSpec) -> Result<LimitParams> {
    let m1 = spec.first_moment();
    let m2 = spec.second_moment();
    LimitParams::new(n as f64, m2 / m1, m1 * m1 / m2, 0.0, 0.0)
}
