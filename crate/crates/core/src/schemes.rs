//! Heuristic signal generators and the box of supported signals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HistoryWindow, SchemeContext, SignalScheme, SignalVector};

/// Scheme selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeConfig {
    MostRecent {},
    DeltaGamma { delta: Vec<f64> },
    RExtreme {},
    ExpSmoothing { q1: f64, q2: f64 },
    MeanStd {},
    MeanVar { alpha: f64 },
    MeanCvar { alpha: f64 },
    RSupportedFull {},
    RSupportedDro {},
    MeanOnly {},
}

impl SchemeConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeConfig::MostRecent {} => "most_recent",
            SchemeConfig::DeltaGamma { .. } => "delta_gamma",
            SchemeConfig::RExtreme {} => "r_extreme",
            SchemeConfig::ExpSmoothing { .. } => "exp_smoothing",
            SchemeConfig::MeanStd {} => "mean_std",
            SchemeConfig::MeanVar { .. } => "mean_var",
            SchemeConfig::MeanCvar { .. } => "mean_cvar",
            SchemeConfig::RSupportedFull {} => "r_supported_full",
            SchemeConfig::RSupportedDro {} => "r_supported_dro",
            SchemeConfig::MeanOnly {} => "mean_only",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self {
            SchemeConfig::DeltaGamma { delta } if delta.iter().any(|d| !(*d >= 0.0)) => {
                bad("delta widths must be nonnegative".into())
            }
            SchemeConfig::ExpSmoothing { q1, q2 }
                if !(0.0..=1.0).contains(q1) || !(0.0..=1.0).contains(q2) =>
            {
                bad(format!("smoothing weights ({q1}, {q2}) must lie in [0, 1]"))
            }
            SchemeConfig::MeanVar { alpha } | SchemeConfig::MeanCvar { alpha }
                if !(*alpha > 0.0 && *alpha < 1.0) =>
            {
                bad(format!("tail level {alpha} must lie in (0, 1)"))
            }
            _ => Ok(()),
        }
    }

    /// True for the kinds that need an optimiser rather than a formula.
    pub fn is_optimizer(&self) -> bool {
        matches!(
            self,
            SchemeConfig::RSupportedFull {} | SchemeConfig::RSupportedDro {} | SchemeConfig::MeanOnly {}
        )
    }
}

fn need_history(h: &HistoryWindow) -> Result<()> {
    if h.is_empty() {
        return Err(Error::Precondition("history is empty".into()));
    }
    Ok(())
}

fn ordered(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn scheme_most_recent(h: &HistoryWindow) -> Result<SignalVector> {
    need_history(h)?;
    SignalVector::new(
        (0..h.routes())
            .map(|m| {
                let c = h.latest(m).expect("nonempty");
                (c, c)
            })
            .collect(),
    )
}

/// Interval of width `δ_m` around the latest cost, jittered by
/// `ν ~ U(−δ_m/2, δ_m/2)`. An interval that would dip below zero is shifted
/// up so its width is kept.
pub fn scheme_delta_gamma<R: Rng + ?Sized>(
    h: &HistoryWindow,
    delta: &[f64],
    rng: &mut R,
) -> Result<SignalVector> {
    need_history(h)?;
    if delta.len() != h.routes() {
        return Err(Error::Precondition(format!(
            "{} widths for {} routes",
            delta.len(),
            h.routes()
        )));
    }
    let mut out = Vec::with_capacity(delta.len());
    for (m, &d) in delta.iter().enumerate() {
        let c = h.latest(m).expect("nonempty");
        let nu = if d > 0.0 {
            rng.gen_range(-0.5 * d..=0.5 * d)
        } else {
            0.0
        };
        let lo = (c + nu - 0.5 * d).max(0.0);
        out.push((lo, lo + d));
    }
    SignalVector::new(out)
}

/// Per-route min and max of the last `r` travel times.
pub fn scheme_r_extreme(h: &HistoryWindow, r: usize) -> Result<SignalVector> {
    need_history(h)?;
    SignalVector::new(
        (0..h.routes())
            .map(|m| {
                let w = h.window(m, r);
                let min = w.iter().copied().fold(f64::INFINITY, f64::min);
                let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (min, max)
            })
            .collect(),
    )
}

/// `lo = q1·prev_lo + (1−q1)·c`, `hi = q2·prev_hi + (1−q2)·|c − prev_lo|`,
/// with `hi` raised to `lo` when it falls below.
pub fn scheme_exp_smoothing(
    prev: &SignalVector,
    latest: &[f64],
    q1: f64,
    q2: f64,
) -> Result<SignalVector> {
    if latest.len() != prev.routes() {
        return Err(Error::Precondition("latest costs do not match the route count".into()));
    }
    SignalVector::new(
        latest
            .iter()
            .enumerate()
            .map(|(m, &c)| {
                let lo = q1 * prev.lo(m) + (1.0 - q1) * c;
                let hi = q2 * prev.hi(m) + (1.0 - q2) * (c - prev.lo(m)).abs();
                (lo, hi.max(lo))
            })
            .collect(),
    )
}

fn location_dispersion(
    h: &HistoryWindow,
    r: usize,
    second: impl Fn(&[f64], f64) -> f64,
) -> Result<SignalVector> {
    need_history(h)?;
    SignalVector::new(
        (0..h.routes())
            .map(|m| {
                let w = h.window(m, r);
                let mu = mean(&w);
                ordered(mu, second(&w, mu))
            })
            .collect(),
    )
}

/// Window mean paired with the mean squared deviation, ordered.
pub fn scheme_mean_std(h: &HistoryWindow, r: usize) -> Result<SignalVector> {
    location_dispersion(h, r, |w, mu| mean(&w.iter().map(|x| (x - mu).powi(2)).collect::<Vec<_>>()))
}

/// Window mean paired with the window's `var_alpha`, ordered.
pub fn scheme_mean_var(h: &HistoryWindow, r: usize, alpha: f64) -> Result<SignalVector> {
    check_alpha(alpha)?;
    location_dispersion(h, r, |w, _| var_alpha(w, alpha).expect("checked"))
}

/// Window mean paired with the window's `cvar_alpha`, ordered.
pub fn scheme_mean_cvar(h: &HistoryWindow, r: usize, alpha: f64) -> Result<SignalVector> {
    check_alpha(alpha)?;
    location_dispersion(h, r, |w, _| cvar_alpha(w, alpha).expect("checked"))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Precondition(format!("tail level {alpha} outside (0, 1)")));
    }
    Ok(())
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Precondition("no samples".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    Ok(x)
}

/// Smallest sample `l` with empirical `P(L > l) ≤ 1 − α`.
pub fn var_alpha(samples: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let x = sorted(samples)?;
    let n = x.len() as f64;
    // Budget of samples allowed above l; the slack absorbs 1 − α rounding.
    let budget = (1.0 - alpha) * n + 1e-12 * n;
    let mut i = 0;
    while i < x.len() {
        let mut j = i;
        while j + 1 < x.len() && x[j + 1] == x[i] {
            j += 1;
        }
        let above = (x.len() - 1 - j) as f64;
        if above <= budget {
            return Ok(x[i]);
        }
        i = j + 1;
    }
    Ok(x[x.len() - 1])
}

/// `(1/α)·∫₀^α VaR_γ dγ`, integrated exactly over the steps of the empirical
/// quantile function.
pub fn cvar_alpha(samples: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let x = sorted(samples)?;
    let n = x.len() as f64;
    let mut acc = 0.0;
    for (k, &v) in x.iter().enumerate() {
        let a = k as f64 / n;
        if a >= alpha {
            break;
        }
        let b = ((k + 1) as f64 / n).min(alpha);
        acc += (b - a) * v;
    }
    // an average of the lower tail, so keep it within the samples
    Ok((acc / alpha).clamp(x[0], x[x.len() - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxMode {
    /// `lo, hi ∈ [min, max]`.
    #[default]
    Extreme,
    /// `lo ∈ [min, avg]`, `hi ∈ [avg, max]`.
    Avg,
}

/// Feasible region for supported signals: independent ranges for each
/// route's lower and upper end, plus `lo ≤ hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportedBox {
    pub lo_range: Vec<(f64, f64)>,
    pub hi_range: Vec<(f64, f64)>,
}

impl SupportedBox {
    /// Extreme-mode box with the given per-route `(min, max)`.
    pub fn extreme(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &bounds {
            if !(a.is_finite() && b.is_finite() && 0.0 <= a && a <= b) {
                return Err(Error::Invalid(format!("bad route bounds ({a}, {b})")));
            }
        }
        Ok(SupportedBox {
            lo_range: bounds.clone(),
            hi_range: bounds,
        })
    }

    pub fn routes(&self) -> usize {
        self.lo_range.len()
    }

    /// Lowest lower end and highest upper end on every route.
    pub fn corner(&self) -> SignalVector {
        SignalVector::new(
            self.lo_range
                .iter()
                .zip(&self.hi_range)
                .map(|(l, h)| (l.0, h.1))
                .collect(),
        )
        .expect("box is valid")
    }

    pub fn contains(&self, s: &SignalVector, tol: f64) -> bool {
        s.routes() == self.routes()
            && (0..self.routes()).all(|m| {
                let (l, h) = (s.lo(m), s.hi(m));
                l >= self.lo_range[m].0 - tol
                    && l <= self.lo_range[m].1 + tol
                    && h >= self.hi_range[m].0 - tol
                    && h <= self.hi_range[m].1 + tol
                    && l <= h + tol
            })
    }

    /// Largest coordinate appearing in the box.
    pub fn max_entry(&self) -> f64 {
        self.hi_range
            .iter()
            .chain(&self.lo_range)
            .map(|r| r.1)
            .fold(0.0, f64::max)
    }

    /// Clamps `s` into the box, keeping `lo ≤ hi`.
    pub fn project(&self, s: &SignalVector) -> SignalVector {
        SignalVector::new(
            (0..self.routes())
                .map(|m| {
                    let l = s.lo(m).clamp(self.lo_range[m].0, self.lo_range[m].1);
                    let h = s.hi(m).clamp(self.hi_range[m].0, self.hi_range[m].1);
                    (l, h.max(l))
                })
                .collect(),
        )
        .expect("box is valid")
    }
}

pub fn supported_box(h: &HistoryWindow, r: usize, mode: BoxMode) -> Result<SupportedBox> {
    need_history(h)?;
    let mut lo_range = Vec::with_capacity(h.routes());
    let mut hi_range = Vec::with_capacity(h.routes());
    for m in 0..h.routes() {
        let w = h.window(m, r);
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match mode {
            BoxMode::Extreme => {
                lo_range.push((min, max));
                hi_range.push((min, max));
            }
            BoxMode::Avg => {
                let avg = mean(&w).clamp(min, max);
                lo_range.push((min, avg));
                hi_range.push((avg, max));
            }
        }
    }
    Ok(SupportedBox { lo_range, hi_range })
}

/// Any of the formula-based schemes, carrying its own random stream.
#[derive(Debug, Clone)]
pub struct HeuristicScheme {
    config: SchemeConfig,
    r: usize,
    rng: ChaCha8Rng,
}

impl HeuristicScheme {
    pub fn new(config: SchemeConfig, r: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if config.is_optimizer() {
            return Err(Error::Config(format!(
                "{} is not a heuristic scheme",
                config.name()
            )));
        }
        if r == 0 {
            return Err(Error::Config("window length r must be at least 1".into()));
        }
        Ok(HeuristicScheme {
            config,
            r,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl SignalScheme for HeuristicScheme {
    fn name(&self) -> &str {
        self.config.name()
    }

    fn signal(&mut self, ctx: &SchemeContext<'_>) -> Result<SignalVector> {
        let h = &ctx.state.history;
        match &self.config {
            SchemeConfig::MostRecent {} => scheme_most_recent(h),
            SchemeConfig::DeltaGamma { delta } => scheme_delta_gamma(h, delta, &mut self.rng),
            SchemeConfig::RExtreme {} => scheme_r_extreme(h, self.r),
            SchemeConfig::ExpSmoothing { q1, q2 } => {
                need_history(h)?;
                let latest: Vec<f64> = (0..h.routes()).map(|m| h.latest(m).unwrap()).collect();
                scheme_exp_smoothing(&ctx.state.last_signal, &latest, *q1, *q2)
            }
            SchemeConfig::MeanStd {} => scheme_mean_std(h, self.r),
            SchemeConfig::MeanVar { alpha } => scheme_mean_var(h, self.r, *alpha),
            SchemeConfig::MeanCvar { alpha } => scheme_mean_cvar(h, self.r, *alpha),
            _ => unreachable!("rejected in new"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(xs: &[f64]) -> HistoryWindow {
        HistoryWindow::from_entries(vec![xs.to_vec()], xs.len()).unwrap()
    }

    #[test]
    fn extreme_and_recent() {
        let h = window(&[4.0, 5.5, 4.8]);
        assert_eq!(scheme_r_extreme(&h, 3).unwrap().intervals(), &[(4.0, 5.5)]);
        assert_eq!(scheme_r_extreme(&h, 1).unwrap().intervals(), &[(4.8, 4.8)]);
        assert_eq!(scheme_most_recent(&h).unwrap().intervals(), &[(4.8, 4.8)]);
        assert!(scheme_most_recent(&HistoryWindow::new(1, 2).unwrap()).is_err());
    }

    #[test]
    fn smoothing_examples() {
        let prev = SignalVector::new(vec![(4.0, 7.0)]).unwrap();
        assert_eq!(scheme_exp_smoothing(&prev, &[5.0], 1.0, 1.0).unwrap(), prev);
        assert_eq!(
            scheme_exp_smoothing(&prev, &[5.0], 0.0, 0.0).unwrap().intervals(),
            &[(5.0, 5.0)]
        );
        assert_eq!(scheme_exp_smoothing(&prev, &[6.0], 0.5, 1.0).unwrap().lo(0), 5.0);
    }

    #[test]
    fn mean_dispersion_examples() {
        assert_eq!(scheme_mean_std(&window(&[5.0; 3]), 3).unwrap().intervals(), &[(0.0, 5.0)]);
        assert_eq!(scheme_mean_std(&window(&[4.0, 6.0]), 2).unwrap().intervals(), &[(1.0, 5.0)]);
    }

    #[test]
    fn var_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(var_alpha(&x, 0.8).unwrap(), 4.0);
        assert_eq!(var_alpha(&x, 0.999).unwrap(), 5.0);
        assert_eq!(var_alpha(&[5.0; 4], 0.3).unwrap(), 5.0);
        assert!((cvar_alpha(&x, 0.4).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(cvar_alpha(&[5.0; 3], 0.7).unwrap(), 5.0);
    }

    #[test]
    fn avg_box() {
        let h = window(&[4.0, 5.5, 4.8]);
        let b = supported_box(&h, 3, BoxMode::Avg).unwrap();
        let avg = (4.0 + 5.5 + 4.8) / 3.0;
        assert_eq!(b.lo_range[0], (4.0, avg));
        assert_eq!(b.hi_range[0], (avg, 5.5));
        let e = supported_box(&h, 3, BoxMode::Extreme).unwrap();
        assert_eq!(e.lo_range[0], (4.0, 5.5));
    }

    #[test]
    fn config_json() {
        let c: SchemeConfig = serde_json::from_str(r#"{"kind":"mean_var","alpha":0.8}"#).unwrap();
        assert_eq!(c, SchemeConfig::MeanVar { alpha: 0.8 });
        assert!(serde_json::from_str::<SchemeConfig>(r#"{"kind":"r_extreme","x":1}"#).is_err());
    }
}
