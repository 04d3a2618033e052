//! Monte Carlo oracles, independent of every closed-form path:
//! an Euler-Maruyama simulator of the rank-based three-particle system and a
//! sampler for the infinite-convolution-of-exponentials representations.
//!
//! Randomness contract: streams are counter-based (ChaCha12). The simulator
//! gives each chain its own stream derived from (seed, chain index); the
//! convolution sampler gives each sample its own stream. Draw sequences are
//! therefore fixed by the configuration alone, so parallel execution cannot
//! reorder randomness and results are bitwise reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::digamma;
use crate::params::ModelParams;

/// Configuration of the particle simulation.
#[derive(Debug, Clone, Copy)]
pub struct SimulationConfig {
    /// Euler time step; must be positive and at most 1e-2 (guard against
    /// gross discretization bias).
    pub dt: f64,
    /// Total simulated time per chain (including burn-in).
    pub t_total: f64,
    /// Burn-in time discarded before sampling starts.
    pub burn_in: f64,
    /// Keep one sample every `thin_stride` steps.
    pub thin_stride: u32,
    /// Master seed; each chain derives stream `chain index` from it.
    pub seed: u64,
    pub n_chains: u32,
    /// Initial particle positions (unranked).
    pub initial_positions: [f64; 3],
}

impl SimulationConfig {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1e-2) {
            return Err(Error::Parameter(format!(
                "dt must lie in (0, 1e-2], got {}",
                self.dt
            )));
        }
        if !(self.burn_in >= 0.0 && self.burn_in < self.t_total) {
            return Err(Error::Parameter(format!(
                "burn_in must satisfy 0 <= burn_in < t_total, got {} vs {}",
                self.burn_in, self.t_total
            )));
        }
        if self.thin_stride == 0 {
            return Err(Error::Parameter("thin_stride must be at least 1".into()));
        }
        if self.n_chains == 0 {
            return Err(Error::Parameter("n_chains must be at least 1".into()));
        }
        if !self.initial_positions.iter().all(|x| x.is_finite()) {
            return Err(Error::Parameter("initial positions must be finite".into()));
        }
        Ok(())
    }
}

/// Default burn-in: 50 relaxation times of the slower rate (the process
/// converges to stationarity exponentially fast).
pub fn default_burn_in(p: &ModelParams) -> f64 {
    50.0 / p.lambda1().min(p.lambda2())
}

/// One stationary-regime draw of the gap pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapSample {
    /// First gap, max - mid. Nonnegative by construction.
    pub g: f64,
    /// Second gap, mid - min.
    pub h: f64,
    /// Chain time of the sample.
    pub t: f64,
}

/// Counters reported alongside the samples.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimulationStats {
    pub steps: u64,
    /// Steps on which two ranked values compared exactly equal (float
    /// coincidences; the lexicographic rule resolves them).
    pub ties: u64,
}

/// Simulation result: samples in chain-major order plus counters.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub samples: Vec<GapSample>,
    pub stats: SimulationStats,
}

/// Euler-Maruyama simulation of the three-particle system.
///
/// Each step ranks the particles (by value descending, ties resolved in
/// favor of the lowest index), applies the drift of the received rank, and
/// adds a sqrt(dt) normal increment to the middle-ranked particle only.
/// After burn-in, (G, H) = (max - mid, mid - min) is recorded every
/// `thin_stride` steps. Chains run in parallel; output order is chain-major
/// and bitwise independent of the host parallelism.
pub fn simulate_gaps(p: &ModelParams, cfg: &SimulationConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    let deltas = p.deltas();
    let steps_total = (cfg.t_total / cfg.dt).round() as u64;
    let burn_steps = (cfg.burn_in / cfg.dt).round() as u64;
    let sqrt_dt = cfg.dt.sqrt();

    let chain_results: Vec<Result<(Vec<GapSample>, SimulationStats)>> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            rng.set_stream(chain as u64);
            let mut x = cfg.initial_positions;
            let mut stats = SimulationStats::default();
            let mut samples = Vec::with_capacity(
                ((steps_total - burn_steps) / cfg.thin_stride as u64 + 1) as usize,
            );
            for step in 0..steps_total {
                // Rank: order[0] is the running maximum. Ties go to the
                // lower index, which therefore receives the better rank.
                let mut order = [0usize, 1, 2];
                order.sort_by(|&i, &j| {
                    x[j].partial_cmp(&x[i]).unwrap().then(i.cmp(&j))
                });
                if x[order[0]] == x[order[1]] || x[order[1]] == x[order[2]] {
                    stats.ties += 1;
                }
                let noise: f64 = rng.sample(StandardNormal);
                for (rank, &idx) in order.iter().enumerate() {
                    x[idx] += deltas[rank] * cfg.dt;
                }
                x[order[1]] += sqrt_dt * noise;
                stats.steps += 1;
                if !x.iter().all(|v| v.is_finite()) {
                    return Err(Error::Simulation {
                        step,
                        message: format!("non-finite particle state {x:?}"),
                    });
                }
                if step >= burn_steps && (step - burn_steps) % cfg.thin_stride as u64 == 0 {
                    let max = x[0].max(x[1]).max(x[2]);
                    let min = x[0].min(x[1]).min(x[2]);
                    let mid = x[0] + x[1] + x[2] - max - min;
                    samples.push(GapSample {
                        g: max - mid,
                        h: mid - min,
                        t: (step + 1) as f64 * cfg.dt,
                    });
                }
            }
            Ok((samples, stats))
        })
        .collect();

    let mut samples = Vec::new();
    let mut stats = SimulationStats::default();
    for r in chain_results {
        let (s, st) = r?;
        samples.extend(s);
        stats.steps += st.steps;
        stats.ties += st.ties;
    }
    Ok(SimulationOutput { samples, stats })
}

/// Which infinite convolution of exponentials to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionCase {
    /// G + H under stationarity, symmetric case: rates l_k = lambda (k+2)(k+3)/2, k >= 1.
    SumGhSymmetric,
    /// 2G + H, symmetric case: same rates including k = 0 (l_0 = 3 lambda).
    TwoGPlusH,
    /// Normalized boundary density nu~_i: rates k (k + mu_i)(l1 + l2),
    /// k in Z \ {-1, 0, 1}.
    NuGeneral(crate::density::Side),
}

/// Sorted empirical sample with cached summary statistics.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl EmpiricalDistribution {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Usage("empirical distribution needs at least one sample".into()));
        }
        if !samples.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("empirical sample".into()));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let variance = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Ok(Self { sorted: samples, mean, variance })
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        *self.sorted.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Rates of the requested convolution, in a fixed deterministic order,
/// truncated at `k_max` draws, plus the deterministic mean of the dropped
/// tail (sum of 1/rate beyond the truncation).
pub(crate) fn convolution_rates(
    case: ConvolutionCase,
    p: &ModelParams,
    k_max: usize,
) -> Result<(Vec<f64>, f64)> {
    match case {
        ConvolutionCase::SumGhSymmetric | ConvolutionCase::TwoGPlusH => {
            if !p.symmetric() {
                return Err(Error::Usage(
                    "this convolution case requires symmetric parameters".into(),
                ));
            }
            let lambda = p.lambda1();
            let k0 = if case == ConvolutionCase::TwoGPlusH { 0 } else { 1 };
            let rates: Vec<f64> = (k0..=k_max)
                .map(|k| lambda * (k as f64 + 2.0) * (k as f64 + 3.0) / 2.0)
                .collect();
            // sum_{k > k_max} 2/(lambda (k+2)(k+3)) telescopes.
            let tail = 2.0 / (lambda * (k_max as f64 + 3.0));
            Ok((rates, tail))
        }
        ConvolutionCase::NuGeneral(side) => {
            let ls = p.lambda_sum();
            let mu = match side {
                crate::density::Side::One => p.mu1(),
                crate::density::Side::Two => p.mu2(),
            };
            let mut rates = Vec::with_capacity(2 * (k_max - 1));
            for k in 2..=k_max {
                let kf = k as f64;
                rates.push(kf * (kf + mu) * ls);
                rates.push(kf * (kf - mu) * ls); // index -k
            }
            let nf = k_max as f64;
            let tail = (digamma(nf + 1.0 + mu) - digamma(nf + 1.0 - mu)) / (mu * ls);
            Ok((rates, tail))
        }
    }
}

/// Draw `n_samples` realizations of the infinite sum of independent
/// exponentials, truncated at `k_max` explicit draws with the neglected tail
/// replaced by its deterministic mean (tail-mean compensation; the neglected
/// tail variance is O(1/k_max^3) and is not simulated).
pub fn sample_exp_convolution(
    case: ConvolutionCase,
    p: &ModelParams,
    n_samples: usize,
    k_max: usize,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    if k_max < 50 {
        return Err(Error::Usage(format!("k_max must be at least 50, got {k_max}")));
    }
    if n_samples == 0 {
        return Err(Error::Usage("n_samples must be positive".into()));
    }
    let (rates, tail_mean) = convolution_rates(case, p, k_max)?;
    let samples: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut sum = tail_mean;
            for &rate in &rates {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                sum -= u.ln() / rate;
            }
            sum
        })
        .collect();
    EmpiricalDistribution::from_samples(samples)
}

/// Expected value of the truncated-plus-compensated convolution sum:
/// sum over the explicit rates of 1/rate plus the deterministic tail mean.
pub fn convolution_mean(case: ConvolutionCase, p: &ModelParams, k_max: usize) -> Result<f64> {
    let (rates, tail) = convolution_rates(case, p, k_max)?;
    Ok(rates.iter().map(|r| 1.0 / r).sum::<f64>() + tail)
}

/// Kolmogorov-Smirnov statistic of a sorted sample against a reference CDF
/// (nondecreasing with range [0, 1]).
pub fn ks_statistic(emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if emp.is_empty() {
        return Err(Error::Usage("KS statistic of an empty sample".into()));
    }
    let n = emp.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in emp.sorted().iter().enumerate() {
        let f = cdf(x);
        if !(-1e-12..=1.0 + 1e-12).contains(&f) {
            return Err(Error::Usage(format!("reference CDF left [0,1]: F({x}) = {f}")));
        }
        d = d.max(f - i as f64 / n);
        d = d.max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Side;

    fn sym() -> ModelParams {
        ModelParams::from_lambdas(1.0, 1.0).unwrap()
    }

    fn quick_cfg(seed: u64) -> SimulationConfig {
        SimulationConfig {
            dt: 1e-3,
            t_total: 60.0,
            burn_in: 10.0,
            thin_stride: 10,
            seed,
            n_chains: 2,
            initial_positions: [0.0, 0.0, 0.0],
        }
    }

    #[test]
    fn config_validation() {
        let p = sym();
        let mut cfg = quick_cfg(1);
        cfg.dt = 0.5;
        assert!(simulate_gaps(&p, &cfg).is_err());
        let mut cfg = quick_cfg(1);
        cfg.burn_in = 100.0;
        assert!(simulate_gaps(&p, &cfg).is_err());
        let mut cfg = quick_cfg(1);
        cfg.thin_stride = 0;
        assert!(simulate_gaps(&p, &cfg).is_err());
    }

    #[test]
    fn gaps_nonnegative_and_reproducible() {
        let p = sym();
        let out1 = simulate_gaps(&p, &quick_cfg(42)).unwrap();
        assert!(!out1.samples.is_empty());
        for s in &out1.samples {
            assert!(s.g >= 0.0 && s.h >= 0.0 && s.g.is_finite() && s.h.is_finite());
        }
        // Bitwise reproducibility for identical (seed, cfg).
        let out2 = simulate_gaps(&p, &quick_cfg(42)).unwrap();
        assert_eq!(out1.samples.len(), out2.samples.len());
        for (a, b) in out1.samples.iter().zip(&out2.samples) {
            assert_eq!(a.g.to_bits(), b.g.to_bits());
            assert_eq!(a.h.to_bits(), b.h.to_bits());
        }
        // Different seed, different stream.
        let out3 = simulate_gaps(&p, &quick_cfg(43)).unwrap();
        assert!(out1.samples[5].g != out3.samples[5].g);
        // Exact ties among ranked values are float coincidences only. The
        // all-equal start contributes a few early ones.
        assert!((out1.stats.ties as f64) < 1e-6 * out1.stats.steps as f64 + 5.0);
    }

    #[test]
    fn mean_gap_sum_matches_theory() {
        // E[G + H] = 2/(3 lambda); modest run, generous tolerance.
        let p = sym();
        let cfg = SimulationConfig {
            dt: 1e-3,
            t_total: 2_000.0,
            burn_in: 50.0,
            thin_stride: 10,
            seed: 7,
            n_chains: 2,
            initial_positions: [0.0, 0.0, 0.0],
        };
        let out = simulate_gaps(&p, &cfg).unwrap();
        let mean: f64 =
            out.samples.iter().map(|s| s.g + s.h).sum::<f64>() / out.samples.len() as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn convolution_rates_and_means() {
        let p = sym();
        // l_0 = 3 lambda; smallest G+H rate is l_1 = 6 lambda.
        let (r, _) = convolution_rates(ConvolutionCase::TwoGPlusH, &p, 50).unwrap();
        assert_eq!(r[0], 3.0);
        let (r, _) = convolution_rates(ConvolutionCase::SumGhSymmetric, &p, 50).unwrap();
        assert_eq!(r[0], 6.0);

        // Means: 2/(3 lambda) and 2/(3 lambda) + 1/(3 lambda) = 1/lambda.
        let m = convolution_mean(ConvolutionCase::SumGhSymmetric, &p, 1000).unwrap();
        assert!((m - 2.0 / 3.0).abs() < 1e-12);
        let m = convolution_mean(ConvolutionCase::TwoGPlusH, &p, 1000).unwrap();
        assert!((m - 1.0).abs() < 1e-12);

        // Paper parameter pair: smallest two rates 13/3 (k=2) and 11/3 (k=-2).
        let q = ModelParams::from_lambdas(1.0 / 6.0, 5.0 / 6.0).unwrap();
        let (r, _) = convolution_rates(ConvolutionCase::NuGeneral(Side::One), &q, 50).unwrap();
        assert!((r[0] - 13.0 / 3.0).abs() < 1e-14);
        assert!((r[1] - 11.0 / 3.0).abs() < 1e-14);

        // Symmetric-only cases refuse asymmetric parameters.
        assert!(convolution_rates(ConvolutionCase::SumGhSymmetric, &q, 50).is_err());
    }

    #[test]
    fn convolution_sampler_mean() {
        let p = sym();
        let emp =
            sample_exp_convolution(ConvolutionCase::SumGhSymmetric, &p, 20_000, 100, 11).unwrap();
        // sd of the sum ~ 0.22; 4 sigma of the sample mean.
        assert!((emp.mean() - 2.0 / 3.0).abs() < 4.0 * 0.22 / (20_000.0_f64).sqrt());
        assert!(emp.min() > 0.0);
        assert!(emp.variance() > 0.0);
        // Per-sample streams: reruns and prefixes are bitwise identical.
        let emp2 =
            sample_exp_convolution(ConvolutionCase::SumGhSymmetric, &p, 100, 100, 11).unwrap();
        let emp3 =
            sample_exp_convolution(ConvolutionCase::SumGhSymmetric, &p, 100, 100, 11).unwrap();
        for (a, b) in emp2.sorted().iter().zip(emp3.sorted()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn ks_statistic_basics() {
        // Exact quantile placement: D <= 1/(2n).
        let n = 100;
        let samples: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let emp = EmpiricalDistribution::from_samples(samples).unwrap();
        let d = ks_statistic(&emp, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d <= 0.5 / n as f64 + 1e-12);

        // Disjoint supports: D = 1.
        let emp = EmpiricalDistribution::from_samples(vec![10.0, 11.0, 12.0]).unwrap();
        let d = ks_statistic(&emp, |x| if x < 20.0 { 0.0 } else { 1.0 }).unwrap();
        assert_eq!(d, 1.0);

        assert!(EmpiricalDistribution::from_samples(vec![]).is_err());
    }
}
