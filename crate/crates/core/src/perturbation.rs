//! Idiosyncratic payoff shocks and the probability masses pushed through them.
//!
//! A player's type is a vector `θ` with one additive shock per own action.
//! The continuous kinds (extreme value, uniform box) have independent,
//! identically distributed coordinates; the empirical kind is an arbitrary
//! finite sample of type vectors.
//!
//! Every probability here is the mass of a polyhedron of the form
//! `{θ : θ_a − θ_b ≥ t_b for all b ≠ a}`. Extreme-value shocks give the
//! multinomial-logit closed form `1 / (1 + Σ_b exp(λ t_b))`; uniform boxes
//! reduce to a one-dimensional integral over `θ_a` whose integrand is a
//! piecewise polynomial, evaluated exactly with Gauss–Legendre panels;
//! empirical samples are counted. Monte Carlo is available for all kinds as
//! an explicitly requested alternative.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{expected_payoffs, MixedProfile, StaticGame};

/// Default Monte Carlo sample budget.
pub const DEFAULT_MC_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    ExtremeValue { lambda: f64 },
    UniformBox { lo: f64, hi: f64 },
    Empirical { samples: Vec<Vec<f64>> },
}

/// Distribution `p_i` of one population's type vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeDistribution {
    kind: Kind,
}

/// How to integrate over a type distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integration {
    /// Closed forms, exact quadrature, or exact counting, depending on kind.
    #[default]
    Exact,
    MonteCarlo {
        samples: usize,
        seed: u64,
    },
}

impl Integration {
    pub fn monte_carlo(seed: u64) -> Self {
        Integration::MonteCarlo {
            samples: DEFAULT_MC_SAMPLES,
            seed,
        }
    }

    /// Same method with the seed mixed with `salt`, so that independent
    /// integrals do not share random draws.
    pub fn salted(self, salt: u64) -> Self {
        match self {
            Integration::Exact => Integration::Exact,
            Integration::MonteCarlo { samples, seed } => Integration::MonteCarlo {
                samples,
                seed: splitmix64(seed ^ splitmix64(salt)),
            },
        }
    }
}

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A probability together with its Monte Carlo standard error (zero for
/// exact evaluations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Estimate {
            value,
            std_error: 0.0,
        }
    }

    fn from_count(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Estimate {
            value: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }
}

/// The region of types for which `base` beats every rival `b` by at least
/// `thresholds[b]` in shock difference: `θ_base − θ_b ≥ thresholds[b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcedRegionSpec {
    base: usize,
    thresholds: Vec<f64>,
}

impl ForcedRegionSpec {
    /// `thresholds` has one entry per own action; the entry at `base` is
    /// ignored. Rival thresholds must be finite or `-inf`.
    pub fn new(base: usize, thresholds: Vec<f64>) -> Result<Self> {
        if base >= thresholds.len() {
            return Err(Error::InvalidArgument(format!(
                "base action {base} outside {} thresholds",
                thresholds.len()
            )));
        }
        let bad = thresholds
            .iter()
            .enumerate()
            .any(|(b, t)| b != base && (t.is_nan() || *t == f64::INFINITY));
        if bad {
            return Err(Error::InvalidArgument(
                "thresholds must be finite or -inf".into(),
            ));
        }
        let mut thresholds = thresholds;
        thresholds[base] = f64::NEG_INFINITY;
        Ok(ForcedRegionSpec { base, thresholds })
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn num_actions(&self) -> usize {
        self.thresholds.len()
    }

    pub fn threshold(&self, b: usize) -> f64 {
        self.thresholds[b]
    }

    fn rivals(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.thresholds
            .iter()
            .copied()
            .enumerate()
            .filter(move |(b, _)| *b != self.base)
    }

    /// Boundary types go to the earlier action: rivals declared before the
    /// base must be beaten strictly.
    fn contains(&self, theta: &[f64]) -> bool {
        self.rivals().all(|(b, t)| {
            let d = theta[self.base] - theta[b];
            if b < self.base {
                d > t
            } else {
                d >= t
            }
        })
    }
}

impl TypeDistribution {
    pub fn extreme_value(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "extreme value precision must be positive and finite, got {lambda}"
            )));
        }
        Ok(TypeDistribution {
            kind: Kind::ExtremeValue { lambda },
        })
    }

    pub fn uniform_box(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidDistribution(format!(
                "uniform box needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(TypeDistribution {
            kind: Kind::UniformBox { lo, hi },
        })
    }

    pub fn empirical(samples: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::InvalidDistribution(
                "empirical distribution needs at least one sample".into(),
            ));
        };
        let k = first.len();
        if k == 0 {
            return Err(Error::InvalidDistribution("empty type vector".into()));
        }
        if samples.iter().any(|s| s.len() != k) {
            return Err(Error::InvalidDistribution(
                "empirical samples have different lengths".into(),
            ));
        }
        if samples.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDistribution(
                "empirical samples must be finite".into(),
            ));
        }
        Ok(TypeDistribution {
            kind: Kind::Empirical { samples },
        })
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    /// Fixed type-vector length, if the distribution carries one.
    pub fn arity(&self) -> Option<usize> {
        match &self.kind {
            Kind::Empirical { samples } => Some(samples[0].len()),
            _ => None,
        }
    }

    pub fn check_arity(&self, num_actions: usize) -> Result<()> {
        match self.arity() {
            Some(k) if k != num_actions => Err(Error::ArityMismatch {
                expected: num_actions,
                found: k,
            }),
            _ => Ok(()),
        }
    }

    /// CDF of a single coordinate. Empirical distributions use coordinate 0.
    pub fn coordinate_cdf(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::ExtremeValue { lambda } => (-(-lambda * x).exp()).exp(),
            Kind::UniformBox { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Kind::Empirical { samples } => {
                samples.iter().filter(|s| s[0] <= x).count() as f64 / samples.len() as f64
            }
        }
    }

    /// `P(θ_a − θ_b ≥ x)` for two distinct coordinates. For the iid kinds the
    /// result does not depend on which coordinates are meant.
    pub fn difference_survival(&self, a: usize, b: usize, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 1.0;
        }
        match &self.kind {
            Kind::ExtremeValue { lambda } => logistic_survival(*lambda, x),
            Kind::UniformBox { lo, hi } => triangular_survival(hi - lo, x),
            Kind::Empirical { samples } => {
                samples.iter().filter(|s| s[a] - s[b] >= x).count() as f64 / samples.len() as f64
            }
        }
    }

    /// `P(θ_0 − θ_1 ≥ x)`.
    pub fn pairwise_survival(&self, x: f64) -> f64 {
        self.difference_survival(0, 1, x)
    }

    /// Mass of the forced region described by `spec`.
    pub fn forced_region_probability(
        &self,
        spec: &ForcedRegionSpec,
        integration: Integration,
    ) -> Result<Estimate> {
        self.check_arity(spec.num_actions())?;
        if spec.rivals().all(|(_, t)| t == f64::NEG_INFINITY) {
            return Ok(Estimate::exact(1.0));
        }
        if let Integration::MonteCarlo { samples, seed } = integration {
            if samples == 0 {
                return Err(Error::ZeroSamples);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = spec.num_actions();
            let hits = (0..samples)
                .filter(|_| spec.contains(&self.sample(k, &mut rng)))
                .count();
            return Ok(Estimate::from_count(hits, samples));
        }
        let empirical = matches!(self.kind, Kind::Empirical { .. });
        if spec.num_actions() == 2 && !empirical {
            let b = 1 - spec.base();
            return Ok(Estimate::exact(self.difference_survival(
                spec.base(),
                b,
                spec.threshold(b),
            )));
        }
        let value = match &self.kind {
            Kind::ExtremeValue { lambda } => {
                let denom: f64 = 1.0 + spec.rivals().map(|(_, t)| (lambda * t).exp()).sum::<f64>();
                1.0 / denom
            }
            Kind::UniformBox { lo, hi } => uniform_box_region(*lo, *hi, spec),
            Kind::Empirical { samples } => {
                samples.iter().filter(|s| spec.contains(s)).count() as f64 / samples.len() as f64
            }
        };
        Ok(Estimate::exact(value))
    }

    /// Choice probabilities of a player whose deterministic payoffs are
    /// `utilities` and whose shocks follow this distribution.
    pub fn choice_probabilities(
        &self,
        utilities: &[f64],
        integration: Integration,
    ) -> Result<Vec<f64>> {
        let k = utilities.len();
        self.check_arity(k)?;
        if let Integration::MonteCarlo { samples, seed } = integration {
            if samples == 0 {
                return Err(Error::ZeroSamples);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut counts = vec![0usize; k];
            for _ in 0..samples {
                let theta = self.sample(k, &mut rng);
                counts[argmax_perturbed(utilities, &theta)] += 1;
            }
            return Ok(counts
                .into_iter()
                .map(|c| c as f64 / samples as f64)
                .collect());
        }
        match &self.kind {
            Kind::ExtremeValue { lambda } => Ok(softmax(*lambda, utilities)),
            Kind::UniformBox { .. } if k == 2 => {
                let p0 = self.pairwise_survival(utilities[1] - utilities[0]);
                Ok(vec![p0, 1.0 - p0])
            }
            Kind::UniformBox { .. } => (0..k)
                .map(|a| {
                    let thresholds = utilities.iter().map(|u| u - utilities[a]).collect();
                    let spec = ForcedRegionSpec::new(a, thresholds)?;
                    Ok(self
                        .forced_region_probability(&spec, Integration::Exact)?
                        .value)
                })
                .collect(),
            Kind::Empirical { samples } => {
                let mut counts = vec![0usize; k];
                for theta in samples {
                    counts[argmax_perturbed(utilities, theta)] += 1;
                }
                Ok(counts
                    .into_iter()
                    .map(|c| c as f64 / samples.len() as f64)
                    .collect())
            }
        }
    }

    /// Draws one type vector with `num_actions` coordinates.
    pub fn sample<R: Rng + ?Sized>(&self, num_actions: usize, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            Kind::ExtremeValue { lambda } => (0..num_actions)
                .map(|_| {
                    let u: f64 = rng.sample(Open01);
                    -(-u.ln()).ln() / lambda
                })
                .collect(),
            Kind::UniformBox { lo, hi } => (0..num_actions)
                .map(|_| lo + (hi - lo) * rng.gen::<f64>())
                .collect(),
            Kind::Empirical { samples } => samples[rng.gen_range(0..samples.len())].clone(),
        }
    }
}

/// `a_i ↦ p_i(E_{i,a_i}(opponents))`: player `i`'s quantal response.
pub fn quantal_response(
    dist: &TypeDistribution,
    game: &StaticGame,
    i: usize,
    opponents: &MixedProfile,
    integration: Integration,
) -> Result<Vec<f64>> {
    let u = expected_payoffs(game, i, opponents)?;
    dist.choice_probabilities(&u, integration)
}

/// Index maximizing `u[a] + θ[a]`; the earliest action wins ties.
pub fn argmax_perturbed(utilities: &[f64], theta: &[f64]) -> usize {
    let mut best = 0;
    let mut best_v = utilities[0] + theta[0];
    for a in 1..utilities.len() {
        let v = utilities[a] + theta[a];
        if v > best_v {
            best = a;
            best_v = v;
        }
    }
    best
}

fn logistic_survival(lambda: f64, x: f64) -> f64 {
    let z = lambda * x;
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Survival function of the difference of two iid uniforms of width `w`.
fn triangular_survival(w: f64, x: f64) -> f64 {
    if x >= w {
        0.0
    } else if x >= 0.0 {
        (w - x) * (w - x) / (2.0 * w * w)
    } else if x > -w {
        1.0 - (w + x) * (w + x) / (2.0 * w * w)
    } else {
        1.0
    }
}

fn softmax(lambda: f64, u: &[f64]) -> Vec<f64> {
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = u.iter().map(|x| (lambda * (x - m)).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// `∫ (1/w) Π_b G(x − t_b) dx` over `x ∈ [lo, hi]`, with `G` the uniform CDF.
fn uniform_box_region(lo: f64, hi: f64, spec: &ForcedRegionSpec) -> f64 {
    let w = hi - lo;
    let rivals: Vec<f64> = spec
        .rivals()
        .map(|(_, t)| t)
        .filter(|t| *t != f64::NEG_INFINITY)
        .collect();
    let mut cuts = vec![lo, hi];
    for &t in &rivals {
        for c in [t + lo, t + hi] {
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // Each panel integrand is a polynomial of degree ≤ rivals.len().
    let (nodes, weights) = gauss_legendre(rivals.len() / 2 + 1);
    let integrand = |x: f64| {
        rivals
            .iter()
            .map(|t| ((x - t - lo) / w).clamp(0.0, 1.0))
            .product::<f64>()
            / w
    };
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        total += half
            * nodes
                .iter()
                .zip(&weights)
                .map(|(z, wt)| wt * integrand(mid + half * z))
                .sum::<f64>();
    }
    total.clamp(0.0, 1.0)
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[k] = -z;
        nodes[n - 1 - k] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    (nodes, weights)
}
