//! Time-dependent coefficient profiles with machine-checkable certificates.
//!
//! Profiles are restricted to forms whose extrema, Lipschitz constants and
//! logarithmic-derivative bounds can be computed structurally (not sampled),
//! so bounds certificates and regime classifications are sound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeId;

/// Time domain a certificate covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    pub fn contains(&self, t: f64) -> bool {
        match *self {
            Horizon::Finite(tau) => t <= tau * (1.0 + 1e-12),
            Horizon::Infinite => true,
        }
    }

    /// Horizon end as a float, `+inf` for the unbounded case.
    pub fn end(&self) -> f64 {
        match *self {
            Horizon::Finite(tau) => tau,
            Horizon::Infinite => f64::INFINITY,
        }
    }
}

/// A scalar time profile, positive on its certified horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientProfile {
    /// `v(t) = value`
    Constant { value: f64 },
    /// `v(t) = clamp(start + slope t)`, optionally clamped to `[lo, hi]`
    Affine {
        start: f64,
        slope: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clamp: Option<[f64; 2]>,
    },
    /// Linear interpolation of `(t, v)` samples, constant beyond the ends
    PiecewiseLinear { samples: Vec<[f64; 2]> },
    /// `v(t) = limit + amplitude * exp(-rate t)`
    ExpApproach {
        limit: f64,
        amplitude: f64,
        rate: f64,
    },
}

impl CoefficientProfile {
    pub fn constant(value: f64) -> Self {
        CoefficientProfile::Constant { value }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Coefficients(msg));
        match self {
            CoefficientProfile::Constant { value } => {
                if !value.is_finite() {
                    return fail("constant profile value is not finite".into());
                }
            }
            CoefficientProfile::Affine { start, slope, clamp } => {
                if !start.is_finite() || !slope.is_finite() {
                    return fail("affine profile parameters are not finite".into());
                }
                if let Some([lo, hi]) = clamp {
                    if !(lo <= hi) {
                        return fail(format!("affine clamp [{lo}, {hi}] is empty"));
                    }
                }
            }
            CoefficientProfile::PiecewiseLinear { samples } => {
                if samples.is_empty() {
                    return fail("piecewise profile has no samples".into());
                }
                for w in samples.windows(2) {
                    if !(w[0][0] < w[1][0]) {
                        return fail(format!(
                            "piecewise sample times must be strictly increasing ({} then {})",
                            w[0][0], w[1][0]
                        ));
                    }
                }
                if samples[0][0] < 0.0 {
                    return fail("piecewise sample times must be nonnegative".into());
                }
                if samples.iter().any(|s| !s[1].is_finite()) {
                    return fail("piecewise sample values must be finite".into());
                }
            }
            CoefficientProfile::ExpApproach {
                limit,
                amplitude,
                rate,
            } => {
                if !limit.is_finite() || !amplitude.is_finite() || !rate.is_finite() {
                    return fail("exp_approach parameters are not finite".into());
                }
                if *rate < 0.0 {
                    return fail(format!("exp_approach rate {rate} must be nonnegative"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Coefficients(format!(
                "profile evaluated at negative time {t}"
            )));
        }
        Ok(self.eval_raw(t))
    }

    pub(crate) fn eval_raw(&self, t: f64) -> f64 {
        match self {
            CoefficientProfile::Constant { value } => *value,
            CoefficientProfile::Affine { start, slope, clamp } => {
                let v = start + slope * t;
                match clamp {
                    Some([lo, hi]) => v.clamp(*lo, *hi),
                    None => v,
                }
            }
            CoefficientProfile::PiecewiseLinear { samples } => {
                if t <= samples[0][0] {
                    return samples[0][1];
                }
                if t >= samples[samples.len() - 1][0] {
                    return samples[samples.len() - 1][1];
                }
                let k = samples.partition_point(|s| s[0] <= t) - 1;
                let [t0, v0] = samples[k];
                let [t1, v1] = samples[k + 1];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
            CoefficientProfile::ExpApproach {
                limit,
                amplitude,
                rate,
            } => limit + amplitude * (-rate * t).exp(),
        }
    }

    /// Exact (inf, sup) of the profile over `[0, horizon]`.
    pub fn range(&self, horizon: Horizon) -> (f64, f64) {
        let end = horizon.end();
        match self {
            CoefficientProfile::Constant { value } => (*value, *value),
            CoefficientProfile::Affine { .. } => {
                // monotone, so the extrema sit at the ends
                let v0 = self.eval_raw(0.0);
                let v1 = match horizon {
                    Horizon::Finite(tau) => self.eval_raw(tau),
                    Horizon::Infinite => self.limit().unwrap_or_else(|| {
                        let slope = match self {
                            CoefficientProfile::Affine { slope, .. } => *slope,
                            _ => unreachable!(),
                        };
                        if slope > 0.0 {
                            f64::INFINITY
                        } else {
                            f64::NEG_INFINITY
                        }
                    }),
                };
                (v0.min(v1), v0.max(v1))
            }
            CoefficientProfile::PiecewiseLinear { samples } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut push = |v: f64| {
                    lo = lo.min(v);
                    hi = hi.max(v);
                };
                push(self.eval_raw(0.0));
                for s in samples {
                    if s[0] <= end {
                        push(s[1]);
                    }
                }
                if let Horizon::Finite(tau) = horizon {
                    push(self.eval_raw(tau));
                } else {
                    push(samples[samples.len() - 1][1]);
                }
                (lo, hi)
            }
            CoefficientProfile::ExpApproach { limit, .. } => {
                let v0 = self.eval_raw(0.0);
                let v1 = match horizon {
                    Horizon::Finite(tau) => self.eval_raw(tau),
                    Horizon::Infinite => *limit,
                };
                (v0.min(v1), v0.max(v1))
            }
        }
    }

    /// Structural Lipschitz constant over all of `[0, inf)`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            CoefficientProfile::Constant { .. } => 0.0,
            CoefficientProfile::Affine { slope, .. } => slope.abs(),
            CoefficientProfile::PiecewiseLinear { samples } => samples
                .windows(2)
                .map(|w| ((w[1][1] - w[0][1]) / (w[1][0] - w[0][0])).abs())
                .fold(0.0, f64::max),
            CoefficientProfile::ExpApproach {
                amplitude, rate, ..
            } => amplitude.abs() * rate,
        }
    }

    pub fn is_time_constant(&self) -> bool {
        match self {
            CoefficientProfile::Constant { .. } => true,
            CoefficientProfile::Affine { slope, .. } => *slope == 0.0,
            CoefficientProfile::PiecewiseLinear { samples } => {
                samples.iter().all(|s| s[1] == samples[0][1])
            }
            CoefficientProfile::ExpApproach {
                amplitude, rate, ..
            } => *amplitude == 0.0 || *rate == 0.0,
        }
    }

    /// Value approached as `t -> inf`, when one exists.
    pub fn limit(&self) -> Option<f64> {
        match self {
            CoefficientProfile::Constant { value } => Some(*value),
            CoefficientProfile::Affine { slope, clamp, .. } => {
                if *slope == 0.0 {
                    return Some(self.eval_raw(0.0));
                }
                clamp.map(|[lo, hi]| if *slope > 0.0 { hi } else { lo })
            }
            CoefficientProfile::PiecewiseLinear { samples } => {
                Some(samples[samples.len() - 1][1])
            }
            CoefficientProfile::ExpApproach {
                limit,
                amplitude,
                rate,
            } => {
                if *rate == 0.0 {
                    Some(limit + amplitude)
                } else {
                    Some(*limit)
                }
            }
        }
    }

    /// Smallest `T` with `|v(t) - limit| <= tol` for all `t >= T`.
    pub fn settle_time(&self, tol: f64) -> Option<f64> {
        match self {
            CoefficientProfile::Constant { .. } => Some(0.0),
            CoefficientProfile::Affine { start, slope, clamp } => {
                if *slope == 0.0 {
                    return Some(0.0);
                }
                let [lo, hi] = (*clamp)?;
                let bound = if *slope > 0.0 { hi } else { lo };
                Some(((bound - start) / slope).max(0.0))
            }
            CoefficientProfile::PiecewiseLinear { samples } => {
                Some(samples[samples.len() - 1][0])
            }
            CoefficientProfile::ExpApproach {
                amplitude, rate, ..
            } => {
                if *amplitude == 0.0 || *rate == 0.0 {
                    Some(0.0)
                } else {
                    Some(((amplitude.abs() / tol).ln() / rate).max(0.0))
                }
            }
        }
    }

    /// Earliest `(t, value)` at which the profile leaves `[lo, hi]`, if any.
    ///
    /// The reported value is the bound being crossed (the violation opens
    /// just past `t`); a value already outside at `t = 0` is reported as is.
    pub fn first_exit(&self, lo: f64, hi: f64, horizon: Horizon) -> Option<(f64, f64)> {
        let end = horizon.end();
        let v0 = self.eval_raw(0.0);
        if v0 < lo || v0 > hi {
            return Some((0.0, v0));
        }
        match self {
            CoefficientProfile::Constant { .. } => None,
            CoefficientProfile::Affine { start, slope, clamp } => {
                if *slope == 0.0 {
                    return None;
                }
                let (bound, reachable) = if *slope > 0.0 {
                    let sup = clamp.map_or(f64::INFINITY, |c| c[1]);
                    (hi, sup > hi)
                } else {
                    let inf = clamp.map_or(f64::NEG_INFINITY, |c| c[0]);
                    (lo, inf < lo)
                };
                if !reachable {
                    return None;
                }
                let t = (bound - start) / slope;
                (t < end).then_some((t.max(0.0), bound))
            }
            CoefficientProfile::PiecewiseLinear { samples } => {
                for w in samples.windows(2) {
                    let [t0, a] = w[0];
                    let [t1, b] = w[1];
                    if t0 >= end {
                        break;
                    }
                    for bound in [lo, hi] {
                        let crosses =
                            (a - bound) * (b - bound) < 0.0 || (a == bound && b != bound);
                        let exits = if bound == lo { b < lo } else { b > hi };
                        if crosses && exits {
                            let t = t0 + (bound - a) / (b - a) * (t1 - t0);
                            if t < end {
                                return Some((t, bound));
                            }
                        }
                    }
                    // segment endpoint already out (first violation inside segment)
                    if b < lo || b > hi {
                        let bound = if b < lo { lo } else { hi };
                        let t = t0 + (bound - a) / (b - a) * (t1 - t0);
                        if t < end {
                            return Some((t, bound));
                        }
                    }
                }
                None
            }
            CoefficientProfile::ExpApproach {
                limit,
                amplitude,
                rate,
            } => {
                if *amplitude == 0.0 || *rate == 0.0 {
                    return None;
                }
                // monotone toward the limit; only the bound on that side matters
                let bound = if *amplitude > 0.0 { lo } else { hi };
                let exits = if *amplitude > 0.0 {
                    *limit < lo
                } else {
                    *limit > hi
                };
                if !exits {
                    return None;
                }
                let ratio = (bound - limit) / amplitude;
                if !(ratio > 0.0 && ratio <= 1.0) {
                    return None;
                }
                let t = -ratio.ln() / rate;
                (t < end).then_some((t.max(0.0), bound))
            }
        }
    }

    /// Structural bounds (inf, sup) on `d/dt log v(t)` over `[0, horizon]`.
    ///
    /// Sound for profiles that stay positive on the horizon (certify first).
    pub fn log_deriv_bounds(&self, horizon: Horizon) -> (f64, f64) {
        let end = horizon.end();
        let ratio_bounds = |slope: f64, vmin: f64, vmax: f64| -> (f64, f64) {
            if vmin <= 0.0 {
                return (f64::NEG_INFINITY, f64::INFINITY);
            }
            if slope >= 0.0 {
                (slope / vmax, slope / vmin)
            } else {
                (slope / vmin, slope / vmax)
            }
        };
        match self {
            CoefficientProfile::Constant { .. } => (0.0, 0.0),
            CoefficientProfile::Affine { start, slope, clamp } => {
                if *slope == 0.0 {
                    return (0.0, 0.0);
                }
                // active interval where the clamp is not binding
                let (mut t_a, mut t_b) = (0.0_f64, end);
                if let Some([lo, hi]) = clamp {
                    let t_lo = (lo - start) / slope;
                    let t_hi = (hi - start) / slope;
                    let (enter, leave) = if *slope > 0.0 { (t_lo, t_hi) } else { (t_hi, t_lo) };
                    t_a = enter.max(0.0);
                    t_b = leave.min(end);
                }
                if !(t_a < t_b) {
                    return (0.0, 0.0);
                }
                let va = self.eval_raw(t_a);
                let vb = if t_b.is_finite() {
                    self.eval_raw(t_b)
                } else {
                    f64::INFINITY
                };
                let (vmin, vmax) = (va.min(vb), va.max(vb));
                let (mut inf, mut sup) = ratio_bounds(*slope, vmin, vmax);
                if t_a > 0.0 || t_b < end {
                    inf = inf.min(0.0);
                    sup = sup.max(0.0);
                }
                (inf, sup)
            }
            CoefficientProfile::PiecewiseLinear { samples } => {
                let mut inf = f64::INFINITY;
                let mut sup = f64::NEG_INFINITY;
                let mut has_flat = samples[0][0] > 0.0 || samples[samples.len() - 1][0] < end;
                for w in samples.windows(2) {
                    let [t0, a] = w[0];
                    let [t1, b] = w[1];
                    if t0 >= end {
                        break;
                    }
                    let slope = (b - a) / (t1 - t0);
                    if slope == 0.0 {
                        has_flat = true;
                        continue;
                    }
                    let (lo, hi) = ratio_bounds(slope, a.min(b), a.max(b));
                    inf = inf.min(lo);
                    sup = sup.max(hi);
                }
                if has_flat || !inf.is_finite() {
                    inf = inf.min(0.0);
                    sup = sup.max(0.0);
                }
                (inf, sup)
            }
            CoefficientProfile::ExpApproach {
                limit,
                amplitude,
                rate,
            } => {
                if *amplitude == 0.0 || *rate == 0.0 {
                    return (0.0, 0.0);
                }
                let g = |y: f64| -amplitude * rate * y / (limit + amplitude * y);
                let y_end = match horizon {
                    Horizon::Finite(tau) => (-rate * tau).exp(),
                    Horizon::Infinite => 0.0,
                };
                // g is monotone in y = exp(-rate t), so the ends bound it
                let (ga, gb) = (g(y_end), g(1.0));
                let lo = ga.min(gb);
                let hi = ga.max(gb);
                if (limit + amplitude * y_end) <= 0.0 || (limit + amplitude) <= 0.0 {
                    return (f64::NEG_INFINITY, f64::INFINITY);
                }
                (lo, hi)
            }
        }
    }
}

/// Per-edge diffusion (`mu`) and conductivity-normalization (`c`) profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    mu: Vec<CoefficientProfile>,
    c: Vec<CoefficientProfile>,
}

impl CoefficientSet {
    pub fn new(mu: Vec<CoefficientProfile>, c: Vec<CoefficientProfile>) -> Result<Self> {
        if mu.len() != c.len() {
            return Err(Error::Coefficients(format!(
                "mu has {} profiles but c has {}",
                mu.len(),
                c.len()
            )));
        }
        if mu.is_empty() {
            return Err(Error::Coefficients("no coefficient profiles".into()));
        }
        for p in mu.iter().chain(c.iter()) {
            p.validate()?;
        }
        Ok(CoefficientSet { mu, c })
    }

    /// All edges share constant-in-time coefficients with the given values.
    pub fn uniform_constant(m: usize, mu: f64, c: f64) -> Self {
        CoefficientSet::new(
            vec![CoefficientProfile::constant(mu); m],
            vec![CoefficientProfile::constant(c); m],
        )
        .expect("uniform constant set")
    }

    pub fn edge_count(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self, j: EdgeId) -> &CoefficientProfile {
        &self.mu[j - 1]
    }

    pub fn c(&self, j: EdgeId) -> &CoefficientProfile {
        &self.c[j - 1]
    }

    pub fn eval_mu(&self, j: EdgeId, t: f64) -> Result<f64> {
        self.mu[j - 1].eval(t)
    }

    pub fn eval_c(&self, j: EdgeId, t: f64) -> Result<f64> {
        self.c[j - 1].eval(t)
    }

    /// `b_j(t) = mu_j(t) / c_j(t)`.
    pub fn eval_b(&self, j: EdgeId, t: f64) -> Result<f64> {
        Ok(self.eval_mu(j, t)? / self.eval_c(j, t)?)
    }

    pub fn is_autonomous(&self) -> bool {
        self.mu
            .iter()
            .chain(self.c.iter())
            .all(CoefficientProfile::is_time_constant)
    }

    /// Limits of the `mu` profiles, when every one exists.
    pub fn mu_limits(&self) -> Option<Vec<f64>> {
        self.mu.iter().map(CoefficientProfile::limit).collect()
    }

    /// Time after which all profiles sit within `tol` of their limits.
    pub fn settle_time(&self, tol: f64) -> Option<f64> {
        self.mu
            .iter()
            .chain(self.c.iter())
            .map(|p| p.settle_time(tol))
            .try_fold(0.0_f64, |acc, t| t.map(|t| acc.max(t)))
    }

    /// Upper bound on the Lipschitz constant of `b_j` over the horizon.
    pub fn b_lipschitz(&self, j: EdgeId, horizon: Horizon) -> f64 {
        let (_, mu_hi) = self.mu[j - 1].range(horizon);
        let (c_lo, _) = self.c[j - 1].range(horizon);
        self.mu[j - 1].lipschitz() / c_lo
            + mu_hi * self.c[j - 1].lipschitz() / (c_lo * c_lo)
    }
}

/// Witness that all profiles stay in `[epsilon, 1/epsilon]` on the horizon.
#[derive(Debug, Clone)]
pub struct BoundsCertificate {
    pub epsilon: f64,
    /// Per-edge Lipschitz constants of the `mu` profiles.
    pub lipschitz_mu: Vec<f64>,
    /// `beta in (0,1)` with `beta^2 <= b_j(t) <= beta^-2` on the horizon.
    pub beta: f64,
    pub horizon: Horizon,
}

impl BoundsCertificate {
    pub fn max_lipschitz_mu(&self) -> f64 {
        self.lipschitz_mu.iter().copied().fold(0.0, f64::max)
    }
}

/// Checks the `[epsilon, 1/epsilon]` envelope structurally and derives the
/// certificate constants; fails on the first profile that leaves the band.
pub fn certify_bounds(
    set: &CoefficientSet,
    epsilon: f64,
    horizon: Horizon,
) -> Result<BoundsCertificate> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Coefficients(format!(
            "epsilon {epsilon} outside (0, 1)"
        )));
    }
    let hi = 1.0 / epsilon;
    for j in 1..=set.edge_count() {
        for (role, profile) in [("mu", set.mu(j)), ("c", set.c(j))] {
            if let Some((time, value)) = profile.first_exit(epsilon, hi, horizon) {
                return Err(Error::BoundsViolation {
                    edge: j,
                    role,
                    time,
                    value,
                    lo: epsilon,
                    hi,
                });
            }
        }
    }
    let lipschitz_mu: Vec<f64> = (1..=set.edge_count())
        .map(|j| set.mu(j).lipschitz())
        .collect();
    let mut b_inf = f64::INFINITY;
    let mut b_sup = 0.0_f64;
    for j in 1..=set.edge_count() {
        let (mu_lo, mu_hi) = set.mu(j).range(horizon);
        let (c_lo, c_hi) = set.c(j).range(horizon);
        b_inf = b_inf.min(mu_lo / c_hi);
        b_sup = b_sup.max(mu_hi / c_lo);
    }
    // beta = 1 is formally attained when b == 1; keep it inside (0, 1)
    let beta = b_inf.sqrt().min(1.0 / b_sup.sqrt()).min(1.0 - 1e-9);
    Ok(BoundsCertificate {
        epsilon,
        lipschitz_mu,
        beta,
        horizon,
    })
}

/// The stability regimes ordered from most to least structured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegimeClass {
    /// `b_j == 1`: the time-derivative weight is the identity.
    BIdentity,
    /// `db_j/dt <= 0` almost everywhere.
    BNonincreasing,
    /// `db_j/dt <= 2 c b_j` with the contained growth constant `c`.
    BGrowth(f64),
    General,
}

impl RegimeClass {
    pub fn name(&self) -> &'static str {
        match self {
            RegimeClass::BIdentity => "b_identity",
            RegimeClass::BNonincreasing => "b_nonincreasing",
            RegimeClass::BGrowth(_) => "b_growth",
            RegimeClass::General => "general",
        }
    }

    pub fn growth_constant(&self) -> Option<f64> {
        match self {
            RegimeClass::BGrowth(c) => Some(*c),
            _ => None,
        }
    }
}

/// Strongest regime whose defining inequality is structurally verified on
/// every edge. The growth constant is `max_j sup_t (d/dt log b_j) / 2`,
/// bounded through the per-profile logarithmic-derivative bounds.
pub fn classify_regime(
    set: &CoefficientSet,
    lambda2_lower: f64,
    horizon: Horizon,
) -> RegimeClass {
    if (1..=set.edge_count()).all(|j| set.mu(j) == set.c(j)) {
        return RegimeClass::BIdentity;
    }
    let mut growth = f64::NEG_INFINITY;
    for j in 1..=set.edge_count() {
        let (_, mu_sup) = set.mu(j).log_deriv_bounds(horizon);
        let (c_inf, _) = set.c(j).log_deriv_bounds(horizon);
        growth = growth.max(mu_sup - c_inf);
    }
    if growth <= 0.0 {
        return RegimeClass::BNonincreasing;
    }
    let c = growth / 2.0;
    if c.is_finite() && c < lambda2_lower {
        RegimeClass::BGrowth(c)
    } else {
        RegimeClass::General
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exp_profile(limit: f64, amplitude: f64, rate: f64) -> CoefficientProfile {
        CoefficientProfile::ExpApproach {
            limit,
            amplitude,
            rate,
        }
    }

    #[test]
    fn eval_examples() {
        let c = CoefficientProfile::constant(1.0);
        assert_relative_eq!(c.eval(7.0).unwrap(), 1.0);

        let e = exp_profile(1.0, 1.0, 1.0);
        assert_relative_eq!(e.eval(0.0).unwrap(), 2.0);

        let p = CoefficientProfile::PiecewiseLinear {
            samples: vec![[0.0, 1.0], [1.0, 2.0]],
        };
        assert_relative_eq!(p.eval(0.5).unwrap(), 1.5);
        assert_relative_eq!(p.eval(3.0).unwrap(), 2.0); // constant extension

        assert!(c.eval(-1.0).is_err());
    }

    #[test]
    fn eval_b_examples() {
        let two = CoefficientProfile::constant(2.0);
        let set = CoefficientSet::new(vec![two.clone()], vec![two]).unwrap();
        assert_relative_eq!(set.eval_b(1, 3.3).unwrap(), 1.0);

        let set = CoefficientSet::new(
            vec![CoefficientProfile::constant(1.0)],
            vec![CoefficientProfile::constant(2.0)],
        )
        .unwrap();
        assert_relative_eq!(set.eval_b(1, 0.0).unwrap(), 0.5);

        let set = CoefficientSet::new(
            vec![CoefficientProfile::constant(1.0)],
            vec![exp_profile(1.0, 1.0, 1.0)],
        )
        .unwrap();
        assert_relative_eq!(set.eval_b(1, 0.0).unwrap(), 0.5);
    }

    #[test]
    fn certify_constant_set() {
        let set = CoefficientSet::uniform_constant(3, 1.0, 1.0);
        let cert = certify_bounds(&set, 0.5, Horizon::Infinite).unwrap();
        assert_eq!(cert.lipschitz_mu, vec![0.0; 3]);
        assert!(cert.beta < 1.0 && cert.beta > 1.0 - 1e-8);
    }

    #[test]
    fn certify_detects_linear_crossing() {
        let set = CoefficientSet::new(
            vec![CoefficientProfile::Affine {
                start: 1.0,
                slope: -1.0,
                clamp: None,
            }],
            vec![CoefficientProfile::constant(1.0)],
        )
        .unwrap();
        match certify_bounds(&set, 0.5, Horizon::Finite(10.0)) {
            Err(Error::BoundsViolation { edge, time, .. }) => {
                assert_eq!(edge, 1);
                assert_relative_eq!(time, 0.5, epsilon = 1e-12);
            }
            other => panic!("expected bounds violation, got {other:?}"),
        }
    }

    #[test]
    fn exp_lipschitz_is_amplitude_times_rate() {
        // sup |d/dt e^{-t}| = 1
        assert_relative_eq!(exp_profile(1.0, 1.0, 1.0).lipschitz(), 1.0);
    }

    #[test]
    fn beta_from_b_in_one_two() {
        // b in [1, 2] gives beta = 1/sqrt(2)
        let set = CoefficientSet::new(
            vec![exp_profile(1.0, 1.0, 1.0)],
            vec![CoefficientProfile::constant(1.0)],
        )
        .unwrap();
        let cert = certify_bounds(&set, 0.4, Horizon::Infinite).unwrap();
        assert_relative_eq!(cert.beta, 0.5_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn regime_identity_when_profiles_match() {
        let mu = vec![
            CoefficientProfile::constant(2.0),
            exp_profile(1.0, 0.5, 2.0),
        ];
        let set = CoefficientSet::new(mu.clone(), mu).unwrap();
        assert_eq!(
            classify_regime(&set, 4.0, Horizon::Infinite),
            RegimeClass::BIdentity
        );
        // b == 1 exactly at sample times
        for t in [0.0, 0.7, 3.0] {
            assert_eq!(set.eval_b(1, t).unwrap(), 1.0);
            assert_eq!(set.eval_b(2, t).unwrap(), 1.0);
        }
    }

    #[test]
    fn regime_nonincreasing_for_decaying_b() {
        // b = 1 + e^{-t}
        let set = CoefficientSet::new(
            vec![exp_profile(1.0, 1.0, 1.0)],
            vec![CoefficientProfile::constant(1.0)],
        )
        .unwrap();
        assert_eq!(
            classify_regime(&set, 4.0, Horizon::Infinite),
            RegimeClass::BNonincreasing
        );
    }

    fn sine_like_pw(amp: f64, knots: usize) -> CoefficientProfile {
        let samples: Vec<[f64; 2]> = (0..=knots)
            .map(|i| {
                let t = i as f64 * std::f64::consts::PI / 8.0;
                [t, 1.0 + amp * t.sin()]
            })
            .collect();
        CoefficientProfile::PiecewiseLinear { samples }
    }

    #[test]
    fn regime_growth_for_sine_like_b() {
        let set = CoefficientSet::new(
            vec![sine_like_pw(0.1, 16)],
            vec![CoefficientProfile::constant(1.0)],
        )
        .unwrap();
        let regime = classify_regime(&set, 4.38, Horizon::Infinite);
        let c = regime.growth_constant().expect("growth regime");

        // independent oracle: maximize the difference quotient of log b
        // over a dense grid
        let profile = sine_like_pw(0.1, 16);
        let mut oracle = f64::NEG_INFINITY;
        let d = 1e-6;
        let mut t = 0.0;
        while t < 2.0 * std::f64::consts::PI {
            let b0 = profile.eval_raw(t);
            let b1 = profile.eval_raw(t + d);
            oracle = oracle.max((b1 - b0) / d / (2.0 * b0));
            t += 1e-3;
        }
        assert!(c >= oracle - 1e-3, "structural c {c} below oracle {oracle}");
        assert!(c <= oracle * 1.05 + 1e-3, "structural c {c} loose vs {oracle}");
        assert!(c < 4.38);
    }

    #[test]
    fn lipschitz_holds_on_dense_grid() {
        let profiles = [
            CoefficientProfile::Affine {
                start: 1.0,
                slope: 0.3,
                clamp: Some([0.5, 2.0]),
            },
            sine_like_pw(0.1, 16),
            exp_profile(1.0, 0.8, 1.7),
        ];
        for p in profiles {
            let l = p.lipschitz();
            let mut t = 0.0;
            while t < 8.0 {
                let (a, b) = (p.eval_raw(t), p.eval_raw(t + 0.013));
                assert!(
                    (b - a).abs() <= l * 0.013 + 1e-12,
                    "profile {p:?} violates Lipschitz bound at t={t}"
                );
                t += 0.1;
            }
        }
    }

    #[test]
    fn beta_squared_envelopes_b_samples() {
        let set = CoefficientSet::new(
            vec![exp_profile(1.0, 1.0, 1.0), sine_like_pw(0.1, 16)],
            vec![
                CoefficientProfile::constant(1.2),
                CoefficientProfile::constant(0.9),
            ],
        )
        .unwrap();
        let cert = certify_bounds(&set, 0.4, Horizon::Infinite).unwrap();
        let b2 = cert.beta * cert.beta;
        for j in 1..=2 {
            let mut t = 0.0;
            while t < 20.0 {
                let b = set.eval_b(j, t).unwrap();
                assert!(b2 <= b + 1e-12 && b <= 1.0 / b2 + 1e-12);
                t += 0.37;
            }
        }
    }

    #[test]
    fn settle_time_reaches_limits() {
        let set = CoefficientSet::new(
            vec![exp_profile(1.0, 1.0, 1.0)],
            vec![CoefficientProfile::constant(1.0)],
        )
        .unwrap();
        let t = set.settle_time(1e-6).unwrap();
        assert!((set.eval_mu(1, t).unwrap() - 1.0).abs() <= 1e-6 * (1.0 + 1e-9));
        assert!((set.eval_mu(1, t * 0.9).unwrap() - 1.0).abs() > 1e-6);
    }
}
