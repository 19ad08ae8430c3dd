//! Distances between dense distributions and the approximation predicates
//! built on them.
//!
//! The predicates quantify over every partial assignment, so they enumerate
//! `3^n` entries and refuse inputs beyond the oracle budget.

use serde::Serialize;

use crate::assignment::{index_to_bits, Assignment};
use crate::distribution::{decode_partial, DenseDistribution, Distribution, Mass};
use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::oracle::OracleBudget;

/// Both forms of the total variation distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvdReport {
    /// `½ Σ |P(x) − Q(x)|`
    pub half_sum: f64,
    /// `max_S P(S) − Q(S)`, attained at `S = {x : P(x) > Q(x)}`
    pub max_event: f64,
}

fn same_dims<T, U>(p: &Distribution<T>, q: &Distribution<U>) -> Result<()>
where
    T: Mass,
    U: Mass,
{
    if p.num_vars() != q.num_vars() {
        return Err(Error::DimensionMismatch(p.num_vars(), q.num_vars()));
    }
    Ok(())
}

pub fn tvd_report(p: &DenseDistribution, q: &DenseDistribution) -> Result<TvdReport> {
    same_dims(p, q)?;
    let mut half = KahanSum::new();
    let mut pos = KahanSum::new();
    for (a, b) in p.mass().iter().zip(q.mass()) {
        half.add((a - b).abs());
        if a > b {
            pos.add(a - b);
        }
    }
    Ok(TvdReport { half_sum: 0.5 * half.value(), max_event: pos.value() })
}

/// Total variation distance (half-sum form). Panics if the max-event form
/// disagrees by more than 1e-12 on normalized inputs.
pub fn tvd(p: &DenseDistribution, q: &DenseDistribution) -> Result<f64> {
    let r = tvd_report(p, q)?;
    if p.is_normalized() && q.is_normalized() {
        let slack = 1e-12 + 0.5 * (p.total() - q.total()).abs();
        assert!(
            (r.half_sum - r.max_event).abs() <= slack,
            "tvd forms disagree: {} vs {}",
            r.half_sum,
            r.max_event
        );
    }
    Ok(r.half_sum)
}

/// Exact total variation distance of rational (or any [`Mass`]) tables.
pub fn tvd_exact<T: Mass>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    same_dims(p, q)?;
    let diffs: Vec<T> =
        p.mass().iter().zip(q.mass()).map(|(a, b)| (a.clone() - b.clone()).abs()).collect();
    let two = T::one() + T::one();
    Ok(T::total(&diffs) / two)
}

/// Where the ratio `t = P/Q` may range for a divergence's convexity constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioDomain {
    /// `(0, ∞)`
    Positive,
    /// `(0, M]`
    UpTo,
    /// `[M, ∞)`
    AtLeast,
}

/// A registered f-divergence: generator, strong-convexity constant and ratio
/// domain. Logarithms are natural.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Divergence {
    Kl,
    TotalVariation,
    PearsonChi2,
    SquaredHellinger,
    ReverseKl,
    VinczeLeCam,
    JensenShannon,
    NeymanChi2,
    Sason { s: f64 },
    Alpha { alpha: f64 },
}

impl Divergence {
    pub const ALL_FIXED: [Divergence; 8] = [
        Divergence::Kl,
        Divergence::TotalVariation,
        Divergence::PearsonChi2,
        Divergence::SquaredHellinger,
        Divergence::ReverseKl,
        Divergence::VinczeLeCam,
        Divergence::JensenShannon,
        Divergence::NeymanChi2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Divergence::Kl => "kl",
            Divergence::TotalVariation => "tv",
            Divergence::PearsonChi2 => "chi2",
            Divergence::SquaredHellinger => "hellinger2",
            Divergence::ReverseKl => "reverse-kl",
            Divergence::VinczeLeCam => "vincze-le-cam",
            Divergence::JensenShannon => "js",
            Divergence::NeymanChi2 => "neyman-chi2",
            Divergence::Sason { .. } => "sason",
            Divergence::Alpha { .. } => "alpha",
        }
    }

    /// Looks up `kl`, `chi2`, `hellinger2`, …; `sason:<s>` and `alpha:<α>`
    /// carry their parameter.
    pub fn from_name(name: &str) -> Result<Divergence> {
        let bad = || Error::InvalidArgument(format!("unknown divergence `{name}`"));
        if let Some(s) = name.strip_prefix("sason:") {
            let s: f64 = s.parse().map_err(|_| bad())?;
            return Divergence::sason(s);
        }
        if let Some(a) = name.strip_prefix("alpha:") {
            let alpha: f64 = a.parse().map_err(|_| bad())?;
            return Divergence::alpha(alpha);
        }
        Divergence::ALL_FIXED.into_iter().find(|d| d.name() == name).ok_or_else(bad)
    }

    pub fn sason(s: f64) -> Result<Divergence> {
        if s <= (-1.5f64).exp() {
            return Err(Error::InvalidArgument(format!("sason parameter {s} must exceed e^(-3/2)")));
        }
        Ok(Divergence::Sason { s })
    }

    pub fn alpha(alpha: f64) -> Result<Divergence> {
        if (alpha.abs() - 1.0).abs() < f64::EPSILON {
            return Err(Error::InvalidArgument("alpha-divergence needs alpha != ±1".into()));
        }
        Ok(Divergence::Alpha { alpha })
    }

    /// The convex generator `f`, with `f(1) = 0`.
    pub fn generator(&self, t: f64) -> f64 {
        if t == 0.0 {
            return self.at_zero();
        }
        match *self {
            Divergence::Kl => t * t.ln(),
            Divergence::TotalVariation => (t - 1.0).abs() / 2.0,
            Divergence::PearsonChi2 => (t - 1.0).powi(2),
            Divergence::SquaredHellinger => 2.0 * (1.0 - t.sqrt()),
            Divergence::ReverseKl => -t.ln(),
            Divergence::VinczeLeCam => (t - 1.0).powi(2) / (t + 1.0),
            Divergence::JensenShannon => (t + 1.0) * (2.0 / (t + 1.0)).ln() + t * t.ln(),
            Divergence::NeymanChi2 => 1.0 / t - 1.0,
            Divergence::Sason { s } => xlogx_sq(s + t) - xlogx_sq(s + 1.0),
            Divergence::Alpha { alpha } => {
                4.0 * (1.0 - t.powf((1.0 + alpha) / 2.0)) / (1.0 - alpha * alpha)
            }
        }
    }

    /// `lim_{t→0+} f(t)`.
    fn at_zero(&self) -> f64 {
        match *self {
            Divergence::Kl => 0.0,
            Divergence::TotalVariation => 0.5,
            Divergence::PearsonChi2 => 1.0,
            Divergence::SquaredHellinger => 2.0,
            Divergence::ReverseKl | Divergence::NeymanChi2 => f64::INFINITY,
            Divergence::VinczeLeCam => 1.0,
            Divergence::JensenShannon => std::f64::consts::LN_2,
            Divergence::Sason { s } => xlogx_sq(s) - xlogx_sq(s + 1.0),
            Divergence::Alpha { alpha } => {
                let e = (1.0 + alpha) / 2.0;
                if e > 0.0 {
                    4.0 / (1.0 - alpha * alpha)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `lim_{t→∞} f(t)/t`: the contribution per unit of `P(x)` where `Q(x) = 0`.
    fn slope_at_infinity(&self) -> f64 {
        match *self {
            Divergence::Kl | Divergence::PearsonChi2 | Divergence::Sason { .. } => f64::INFINITY,
            Divergence::TotalVariation => 0.5,
            Divergence::SquaredHellinger | Divergence::ReverseKl | Divergence::NeymanChi2 => 0.0,
            Divergence::VinczeLeCam => 1.0,
            Divergence::JensenShannon => std::f64::consts::LN_2,
            // t^((1+α)/2) outgrows t exactly when α > 1
            Divergence::Alpha { alpha } if alpha > 1.0 => f64::INFINITY,
            Divergence::Alpha { .. } => 0.0,
        }
    }

    pub fn domain(&self) -> RatioDomain {
        match *self {
            Divergence::TotalVariation | Divergence::PearsonChi2 => RatioDomain::Positive,
            Divergence::Sason { .. } => RatioDomain::AtLeast,
            Divergence::Alpha { alpha } if alpha > 3.0 => RatioDomain::AtLeast,
            Divergence::Alpha { alpha } if alpha == 3.0 => RatioDomain::Positive,
            _ => RatioDomain::UpTo,
        }
    }

    /// Strong-convexity constant `k` of `f` on the domain bounded by `m`.
    pub fn kconvexity(&self, m: f64) -> f64 {
        match *self {
            Divergence::Kl => 1.0 / m,
            Divergence::TotalVariation => 0.0,
            Divergence::PearsonChi2 => 2.0,
            Divergence::SquaredHellinger => m.powf(-1.5) / 2.0,
            Divergence::ReverseKl => 1.0 / (m * m),
            Divergence::VinczeLeCam => 8.0 / (m + 1.0).powi(3),
            Divergence::JensenShannon => 1.0 / (m * (m + 1.0)),
            Divergence::NeymanChi2 => 2.0 / m.powi(3),
            Divergence::Sason { s } => 2.0 * (s + m).ln() + 3.0,
            Divergence::Alpha { alpha } => m.powf((alpha - 3.0) / 2.0),
        }
    }

    /// Samples the second difference of `f` on a grid over the domain bounded
    /// by `m` and returns the smallest `f'' − k` seen. A registered entry is
    /// consistent when this is `≥ −1e-6`.
    pub fn convexity_slack(&self, m: f64) -> f64 {
        let k = self.kconvexity(m);
        let (lo, hi) = match self.domain() {
            RatioDomain::UpTo => (m * 1e-2, m),
            RatioDomain::AtLeast => (m, m * 100.0),
            RatioDomain::Positive => (1e-2, 1e2),
        };
        let steps = 400;
        let mut worst = f64::INFINITY;
        for i in 0..=steps {
            // geometric grid, pulled inward so the stencil stays in the domain
            let t = lo * (hi / lo).powf(i as f64 / steps as f64);
            let h = (t * 1e-2).max(1e-4);
            let t = t.clamp(lo + h, hi - h);
            let d2 = (self.generator(t + h) - 2.0 * self.generator(t) + self.generator(t - h))
                / (h * h);
            worst = worst.min(d2 - k);
        }
        worst
    }
}

fn xlogx_sq(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * u * u.ln()
    }
}

/// `D_f(P‖Q) = Σ_x Q(x) f(P(x)/Q(x))`. Terms with `P = Q = 0` vanish; terms
/// with `Q(x) = 0 < P(x)` contribute `P(x) · lim f(t)/t` (infinite for KL and
/// Pearson χ²). A ratio outside the divergence's domain is an error; for
/// `[M, ∞)` domains that means any `P(x) = 0 < Q(x)`.
pub fn f_divergence(p: &DenseDistribution, q: &DenseDistribution, d: &Divergence) -> Result<f64> {
    same_dims(p, q)?;
    let mut acc = KahanSum::new();
    let mut infinite = false;
    for (i, (&a, &b)) in p.mass().iter().zip(q.mass()).enumerate() {
        if b == 0.0 {
            if a > 0.0 {
                let slope = d.slope_at_infinity();
                if slope.is_infinite() {
                    infinite = true;
                } else {
                    acc.add(a * slope);
                }
            }
            continue;
        }
        let t = a / b;
        if t == 0.0 && d.domain() == RatioDomain::AtLeast {
            return Err(Error::Domain {
                name: d.name().into(),
                assignment: index_to_bits(p.num_vars(), i as u64),
                ratio: t,
            });
        }
        let v = b * d.generator(t);
        if v.is_infinite() {
            infinite = true;
        } else {
            acc.add(v);
        }
    }
    Ok(if infinite { f64::INFINITY } else { acc.value() })
}

/// `sqrt(D_f / k)`: the total variation bound for a `k`-convex divergence.
pub fn kconvex_tvd_bound(df_value: f64, k: f64) -> Result<f64> {
    if k <= 0.0 {
        return Err(Error::InvalidArgument("k-convexity bound needs k > 0".into()));
    }
    if df_value < 0.0 {
        return Err(Error::InvalidArgument(format!("negative divergence {df_value}")));
    }
    Ok((df_value / k).sqrt())
}

/// Pinsker: `tvd ≤ sqrt(KL / 2)`.
pub fn pinsker_bound(kl_value: f64) -> f64 {
    (kl_value / 2.0).sqrt()
}

/// Observed ratio extremes over assignments with both masses positive.
pub fn ratio_range(p: &DenseDistribution, q: &DenseDistribution) -> (f64, f64) {
    p.mass()
        .iter()
        .zip(q.mass())
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| a / b)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), t| (lo.min(t), hi.max(t)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KConvexCheck {
    pub divergence: Divergence,
    /// Ratio bound the constant was instantiated at.
    pub m: f64,
    pub k: f64,
    pub df: f64,
    pub tvd: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Instantiates `k` at the observed ratio bound `M` and checks
/// `tvd² ≤ D_f/k + 1e-9`.
pub fn check_kconvex_bound(
    p: &DenseDistribution,
    q: &DenseDistribution,
    d: &Divergence,
) -> Result<KConvexCheck> {
    let (lo, hi) = ratio_range(p, q);
    let m = match d.domain() {
        RatioDomain::UpTo => hi,
        RatioDomain::AtLeast => lo,
        RatioDomain::Positive => 1.0,
    };
    let k = d.kconvexity(m);
    let df = f_divergence(p, q, d)?;
    let t = tvd(p, q)?;
    let bound = kconvex_tvd_bound(df, k)?;
    Ok(KConvexCheck { divergence: *d, m, k, df, tvd: t, bound, holds: t * t <= df / k + 1e-9 })
}

/// Worst ratio found by [`is_relative_approximator`].
#[derive(Debug, Clone, PartialEq)]
pub enum WorstRatio<T> {
    Finite(T),
    /// One measure is zero where the other is positive.
    Infinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationCheck<T> {
    pub holds: bool,
    pub worst: WorstRatio<T>,
    pub witness: Option<Assignment>,
}

fn budget_check(num_vars: usize, what: &'static str) -> Result<()> {
    OracleBudget::from_env().check_partial(num_vars, what)
}

/// Relative approximation of marginals:
/// `1/(1+ε) ≤ P(y)/Q(y) ≤ 1+ε` for every partial assignment `y`. `0/0` passes,
/// a one-sided zero fails. Reports the worst `max(P/Q, Q/P)`.
pub fn is_relative_approximator<T: Mass>(
    p: &Distribution<T>,
    q: &Distribution<T>,
    eps: &T,
) -> Result<ApproximationCheck<T>> {
    same_dims(p, q)?;
    budget_check(p.num_vars(), "relative approximation check")?;
    let pm = p.partial_marginals();
    let qm = q.partial_marginals();
    let limit = T::one() + eps.clone();
    let mut worst = T::one();
    let mut witness = None;
    for (code, (a, b)) in pm.iter().zip(&qm).enumerate() {
        match (a.is_zero(), b.is_zero()) {
            (true, true) => continue,
            (true, false) | (false, true) => {
                return Ok(ApproximationCheck {
                    holds: false,
                    worst: WorstRatio::Infinite,
                    witness: Some(decode_partial(code, p.num_vars())),
                })
            }
            (false, false) => {}
        }
        let r = if a > b { a.clone() / b.clone() } else { b.clone() / a.clone() };
        if r > worst {
            worst = r;
            witness = Some(decode_partial(code, p.num_vars()));
        }
    }
    Ok(ApproximationCheck { holds: worst <= limit, worst: WorstRatio::Finite(worst), witness })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapCheck<T> {
    /// `worst_gap < ε`
    pub holds: bool,
    pub worst_gap: T,
    pub witness: Assignment,
}

fn worst_gap<T: Mass>(a: &[T], b: &[T], num_vars: usize, eps: &T) -> GapCheck<T> {
    let mut worst = T::zero();
    let mut at = 0;
    for (code, (x, y)) in a.iter().zip(b).enumerate() {
        let g = (x.clone() - y.clone()).abs();
        if g > worst {
            worst = g;
            at = code;
        }
    }
    GapCheck { holds: worst < *eps, worst_gap: worst, witness: decode_partial(at, num_vars) }
}

/// Absolute approximation of marginals: `|P(y) − Q(y)| < ε` for every
/// partial assignment `y`.
pub fn is_absolute_marginal_approximator<T: Mass>(
    p: &Distribution<T>,
    q: &Distribution<T>,
    eps: &T,
) -> Result<GapCheck<T>> {
    same_dims(p, q)?;
    budget_check(p.num_vars(), "marginal approximation check")?;
    Ok(worst_gap(&p.partial_marginals(), &q.partial_marginals(), p.num_vars(), eps))
}

/// Absolute approximation of MAP: `|max_y P(y, e) − max_y Q(y, e)| < ε` for
/// every evidence `e` (a partial assignment; `y` ranges over its completions).
pub fn is_absolute_map_approximator<T: Mass>(
    p: &Distribution<T>,
    q: &Distribution<T>,
    eps: &T,
) -> Result<GapCheck<T>> {
    same_dims(p, q)?;
    budget_check(p.num_vars(), "MAP approximation check")?;
    Ok(worst_gap(&p.partial_max(), &q.partial_max(), p.num_vars(), eps))
}
