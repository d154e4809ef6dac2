//! Revenue bounds by binary search over the price `rho`, profit thresholds,
//! and parameter sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{build_base_model, build_honest_disabled, build_truncated, BoundaryMode, Compensation, ThresholdVariant};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate_policy_exact, evaluate_policy_with, BoundaryRule};
use crate::mdp::{MiningModel, RelativeValueIteration, ScalarModel, DEFAULT_MAX_ITERS};
use crate::model::{upper_bound_revenue, MiningParams, Variant};
use crate::policy::Policy;

pub const DEFAULT_TRUNCATION: u32 = 75;
pub const DEFAULT_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub params: MiningParams,
    pub truncation: u32,
    /// Target accuracy of the lower bound; must lie in `(0, 8 alpha)`.
    pub eps: f64,
    /// Solver tolerance for the over-paying model; must lie in `(0, 1)`.
    pub eps_prime: f64,
    pub max_iters: usize,
    pub compensation: Compensation,
}

impl OptimizeConfig {
    pub fn new(params: MiningParams, truncation: u32) -> Self {
        Self {
            params,
            truncation,
            eps: DEFAULT_EPS,
            eps_prime: DEFAULT_EPS,
            max_iters: DEFAULT_MAX_ITERS,
            compensation: Compensation::Printed,
        }
    }

    pub fn with_eps(mut self, eps: f64, eps_prime: f64) -> Self {
        self.eps = eps;
        self.eps_prime = eps_prime;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let alpha = self.params.alpha();
        if !(self.eps > 0.0 && self.eps < 8.0 * alpha) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, 8*alpha) = (0, {}) (got {})",
                8.0 * alpha,
                self.eps
            )));
        }
        if !(self.eps_prime > 0.0 && self.eps_prime < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps-prime must lie in (0, 1) (got {})",
                self.eps_prime
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max-iters must be positive".into()));
        }
        crate::model::StateSpace::new(self.truncation)?;
        Ok(())
    }
}

/// One step of the binary search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub rho: f64,
    pub gain: f64,
    pub span: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub config: OptimizeConfig,
    /// Revenue guaranteed by `policy`, up to `eps`.
    pub lower_bound: f64,
    /// Revenue no policy on the untruncated game can exceed: the over-paying
    /// bound, capped by the ceiling `alpha / (1 - alpha)`.
    pub upper_bound: f64,
    /// The over-paying bound before the cap.
    pub upper_bound_raw: f64,
    pub policy: Policy,
    pub probes: Vec<Probe>,
    pub rho_final: f64,
    pub rho_prime: f64,
    /// Optimal gain of the over-paying model at `rho_prime`.
    pub overpaying_gain: f64,
    pub overpaying_iterations: usize,
    pub ceiling: f64,
}

/// Binary search for the root of the optimal-gain curve of the under-paying
/// truncation, then an over-paying solve just below the root for the upper
/// bound.
pub fn find_optimal(cfg: &OptimizeConfig) -> Result<BoundsReport> {
    cfg.validate()?;
    let model = build_base_model(&cfg.params, cfg.truncation)?;
    find_optimal_on(&model, cfg)
}

/// [`find_optimal`] on an already built base model.
pub fn find_optimal_on(model: &MiningModel, cfg: &OptimizeConfig) -> Result<BoundsReport> {
    cfg.validate()?;
    if model.truncation() != cfg.truncation || model.params() != &cfg.params {
        return Err(Error::InvalidParameter("model was built for different parameters".into()));
    }
    let tol = cfg.eps / 8.0;
    let mut solver = RelativeValueIteration::new();
    let (mut low, mut high) = (0.0_f64, 1.0_f64);
    let mut probes = Vec::new();
    let (rho, policy) = loop {
        let rho = 0.5 * (low + high);
        let res = solver.solve(&ScalarModel::new(model, rho), tol, cfg.max_iters)?;
        probes.push(Probe {
            rho,
            gain: res.gain,
            span: res.span,
            iterations: res.iterations,
        });
        if res.gain > 0.0 {
            low = rho;
        } else {
            high = rho;
        }
        if high - low < tol {
            break (rho, res.policy);
        }
    };

    let rho_prime = (low - cfg.eps / 4.0).max(0.0);
    let over = build_truncated(model, BoundaryMode::OverPaying(cfg.compensation), rho_prime)?;
    let res = solver.solve(&over, cfg.eps_prime, cfg.max_iters)?;
    let upper = rho_prime + 2.0 * (res.gain + cfg.eps_prime);
    let ceiling = upper_bound_revenue(cfg.params.alpha())?;

    Ok(BoundsReport {
        config: *cfg,
        lower_bound: rho - cfg.eps,
        upper_bound: upper.min(ceiling),
        upper_bound_raw: upper,
        policy,
        probes,
        rho_final: rho,
        rho_prime,
        overpaying_gain: res.gain,
        overpaying_iterations: res.iterations,
        ceiling,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub gamma: f64,
    pub variant: Variant,
    pub truncation: u32,
    pub eps: f64,
    /// Bisection stops once the bracket is this narrow.
    pub alpha_tol: f64,
    pub max_iters: usize,
}

impl ThresholdConfig {
    pub fn new(gamma: f64, variant: Variant) -> Self {
        Self {
            gamma,
            variant,
            truncation: DEFAULT_TRUNCATION,
            eps: DEFAULT_EPS,
            alpha_tol: 1e-4,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

/// What a single threshold probe established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Both honest-disabled over-paying models have negative gain at `rho = alpha`.
    HonestOptimal,
    /// The optimal policy beats honest mining by more than `eps`.
    Profitable,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdProbe {
    pub alpha: f64,
    /// Over-paying gains with override disabled at `(1,0)` and adopt disabled at `(0,1)`.
    pub disabled_gains: [f64; 2],
    pub lower_bound: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub config: ThresholdConfig,
    /// Largest probed alpha at which honest mining was certified optimal.
    pub alpha_lower: f64,
    /// Smallest probed alpha at which a profitable deviation was found.
    pub alpha_upper: Option<f64>,
    /// Upper end of the final bisection bracket.
    pub bracket_high: f64,
    pub undecided: usize,
    pub probes: Vec<ThresholdProbe>,
}

impl ThresholdReport {
    pub fn threshold(&self) -> f64 {
        self.alpha_lower
    }

    pub fn bracket_width(&self) -> f64 {
        self.bracket_high - self.alpha_lower
    }
}

/// Smallest alpha accepted by the search; below it `eps < 8 alpha` fails.
const ALPHA_FLOOR: f64 = 1e-6;

/// Bisection over alpha for the largest hashrate at which honest mining is
/// provably optimal.
///
/// A probe certifies honest mining when both honest-disabled over-paying
/// models, priced at `rho = alpha`, have optimal gain at most `-eps`. Probes
/// that do not certify move the upper end of the bracket; they are also
/// checked for a strictly profitable deviation, which tightens
/// `alpha_upper`. The reported threshold is therefore always certified.
pub fn profit_threshold(cfg: &ThresholdConfig) -> Result<ThresholdReport> {
    if !(cfg.alpha_tol >= 1e-5 && cfg.alpha_tol < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "alpha tolerance must lie in [1e-5, 0.5) (got {})",
            cfg.alpha_tol
        )));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 8.0 * ALPHA_FLOOR.max(cfg.alpha_tol / 2.0)) {
        return Err(Error::InvalidParameter(format!("eps too large for the alpha grid (got {})", cfg.eps)));
    }
    MiningParams::new(0.25, cfg.gamma, cfg.variant)?;

    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    let mut alpha_upper: Option<f64> = None;
    let mut undecided = 0;
    let mut probes = Vec::new();
    while hi - lo > cfg.alpha_tol {
        let alpha = 0.5 * (lo + hi);
        let probe = threshold_probe(cfg, alpha)?;
        match probe.verdict {
            Verdict::HonestOptimal => lo = alpha,
            Verdict::Profitable => {
                hi = alpha;
                alpha_upper = Some(alpha_upper.map_or(alpha, |u| u.min(alpha)));
            }
            Verdict::Undecided => {
                hi = alpha;
                undecided += 1;
            }
        }
        probes.push(probe);
    }
    Ok(ThresholdReport {
        config: *cfg,
        alpha_lower: lo,
        alpha_upper,
        bracket_high: hi,
        undecided,
        probes,
    })
}

/// Runs both tests of the threshold search at one alpha.
pub fn threshold_probe(cfg: &ThresholdConfig, alpha: f64) -> Result<ThresholdProbe> {
    let params = MiningParams::new(alpha, cfg.gamma, cfg.variant)?;
    let tol = cfg.eps / 8.0;
    let mut gains = [0.0; 2];
    for (g, variant) in gains.iter_mut().zip(ThresholdVariant::BOTH) {
        let m = build_honest_disabled(&params, cfg.truncation, variant)?;
        let over = build_truncated(&m, BoundaryMode::OverPaying(Compensation::Printed), alpha)?;
        *g = RelativeValueIteration::new().run(&over, tol, cfg.max_iters)?.gain;
    }
    if gains.iter().all(|&g| g <= -cfg.eps) {
        return Ok(ThresholdProbe {
            alpha,
            disabled_gains: gains,
            lower_bound: None,
            verdict: Verdict::HonestOptimal,
        });
    }
    let opt = OptimizeConfig {
        params,
        truncation: cfg.truncation,
        eps: cfg.eps,
        eps_prime: cfg.eps,
        max_iters: cfg.max_iters,
        compensation: Compensation::Printed,
    };
    let lower = find_optimal(&opt)?.lower_bound;
    let verdict = if lower > alpha + cfg.eps {
        Verdict::Profitable
    } else {
        Verdict::Undecided
    };
    Ok(ThresholdProbe {
        alpha,
        disabled_gains: gains,
        lower_bound: Some(lower),
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub gamma: f64,
    pub variant: Variant,
    pub truncation: u32,
    pub eps: f64,
    pub honest_rev: Option<f64>,
    pub sm1_rev: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub ceiling: Option<f64>,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: &str =
    "alpha,gamma,variant,T,epsilon,honest_rev,sm1_rev,lower_bound,upper_bound,ceiling";

impl SweepRow {
    /// CSV line with six decimals; failed cells are left empty.
    pub fn to_csv(&self) -> String {
        let f = |x: Option<f64>| x.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{:.6},{:.6},{},{},{:e},{},{},{},{},{}",
            self.alpha,
            self.gamma,
            self.variant,
            self.truncation,
            self.eps,
            f(self.honest_rev),
            f(self.sm1_rev),
            f(self.lower_bound),
            f(self.upper_bound),
            f(self.ceiling)
        )
    }
}

/// Bounds and reference revenues on an `alphas x gammas` grid, in row-major
/// order (`alpha` outer). Individual failures are recorded in their row.
pub fn sweep(
    alphas: &[f64],
    gammas: &[f64],
    variant: Variant,
    truncation: u32,
    eps: f64,
) -> Vec<SweepRow> {
    let points: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| gammas.iter().map(move |&g| (a, g)))
        .collect();
    points
        .par_iter()
        .map(|&(alpha, gamma)| sweep_point(alpha, gamma, variant, truncation, eps))
        .collect()
}

fn sweep_point(alpha: f64, gamma: f64, variant: Variant, truncation: u32, eps: f64) -> SweepRow {
    let mut row = SweepRow {
        alpha,
        gamma,
        variant,
        truncation,
        eps,
        honest_rev: None,
        sm1_rev: None,
        lower_bound: None,
        upper_bound: None,
        ceiling: None,
        error: None,
    };
    let result = (|| -> Result<()> {
        let params = MiningParams::new(alpha, gamma, variant)?;
        row.ceiling = Some(upper_bound_revenue(alpha)?);
        let model = build_base_model(&params, truncation)?;
        row.honest_rev = Some(evaluate_policy_exact(&model, &Policy::honest(truncation)?)?.rev);
        row.sm1_rev = Some(evaluate_policy_with(&model, &Policy::sm1(truncation)?, BoundaryRule::Sm1Tail)?.rev);
        let cfg = OptimizeConfig::new(params, truncation).with_eps(eps, eps);
        let report = find_optimal_on(&model, &cfg)?;
        row.lower_bound = Some(report.lower_bound);
        row.upper_bound = Some(report.upper_bound);
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let p = MiningParams::standard(0.35, 0.0).unwrap();
        assert!(OptimizeConfig::new(p, 10).with_eps(3.0, 1e-5).validate().is_err());
        assert!(OptimizeConfig::new(p, 10).with_eps(1e-3, 1.0).validate().is_err());
        assert!(OptimizeConfig::new(p, 10).with_eps(1e-3, 1e-3).validate().is_ok());
    }

    #[test]
    fn small_alpha_is_honest() {
        let p = MiningParams::standard(0.1, 0.0).unwrap();
        let cfg = OptimizeConfig::new(p, 20).with_eps(1e-4, 1e-4);
        let r = find_optimal(&cfg).unwrap();
        // lower = rho - eps, and rho sits within eps/8 of the root
        assert!((r.lower_bound - (0.1 - 1e-4)).abs() <= 1e-4 / 8.0, "{}", r.lower_bound);
        assert!(r.lower_bound <= r.upper_bound);
        // search invariant: positive gains went low, the rest high
        let last = r.probes.last().unwrap().rho;
        for p in &r.probes {
            if p.gain > 0.0 {
                assert!(p.rho <= last + 1e-4);
            }
        }
    }

    #[test]
    fn sweep_records_failures_in_row() {
        let rows = sweep(&[0.3, 0.6], &[0.0], Variant::Standard, 10, 1e-3);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error.is_none());
        assert!(rows[1].error.as_deref().unwrap().contains("alpha"));
        assert_eq!(rows[1].to_csv(), "0.600000,0.000000,standard,10,1e-3,,,,,");
        assert!((rows[0].honest_rev.unwrap() - 0.3).abs() < 1e-12);
    }
}
