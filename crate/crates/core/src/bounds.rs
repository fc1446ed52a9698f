//! Gronwall-type envelopes for coupled differential inequalities and checks of
//! time series against them.

use crate::error::{Result, SedError};

/// Relative tolerance for envelope checks on analytic data.
pub const TOL_ANALYTIC: f64 = 1e-9;
/// Relative tolerance for envelope checks on simulation output.
pub const TOL_SIMULATION: f64 = 0.05;

/// Constants of `ȧ ≤ C b`, `ḃ ≤ λ(−c b + C a + d)` with initial values `a₀`, `b₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GronwallEnvelope {
    pub c_big: f64,
    pub c_small: f64,
    pub lambda: f64,
    pub d: f64,
    pub a0: f64,
    pub b0: f64,
}

impl GronwallEnvelope {
    pub fn new(c_big: f64, c_small: f64, lambda: f64, d: f64, a0: f64, b0: f64) -> Result<Self> {
        let env = GronwallEnvelope { c_big, c_small, lambda, d, a0, b0 };
        env.validate()?;
        Ok(env)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.c_big >= 1.0
            && self.c_small > 0.0
            && self.lambda > 0.0
            && self.d >= 0.0
            && self.a0 >= 0.0
            && self.b0 >= 0.0
            && [self.c_big, self.c_small, self.lambda, self.d, self.a0, self.b0].iter().all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(SedError::invalid(format!("envelope parameters out of range: {self:?}")))
        }
    }

    /// Whether `λ(C − c) ≤ C`. Outside this range the growth rate of the equality
    /// system exceeds `C` and the envelopes fail for large `t`. Inside it they can still
    /// fail at short times: the equality system starts with `ȧ(0) = C b₀` while
    /// [`envelope_a`] starts with slope `C a₀ + d(1 + cλ/C) + b₀`.
    pub fn in_dominated_regime(&self) -> bool {
        self.lambda * (self.c_big - self.c_small) <= self.c_big
    }

    /// Largest eigenvalue of the equality system `ȧ = C b`, `ḃ = λ(−c b + C a)`.
    pub fn growth_rate(&self) -> f64 {
        let (lc, c) = (self.lambda * self.c_small, self.c_big);
        0.5 * (-lc + (lc * lc + 4.0 * self.lambda * c * c).sqrt())
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(SedError::invalid(format!("t must be >= 0, got {t}")))
    }
}

/// `a₀e^{Ct} + (d/C + b₀/(cλ + C))(e^{Ct} − e^{−cλt})`.
pub fn envelope_a(env: &GronwallEnvelope, t: f64) -> Result<f64> {
    env.validate()?;
    check_time(t)?;
    let (c, cl) = (env.c_big, env.c_small * env.lambda);
    let grow = (c * t).exp();
    Ok(env.a0 * grow + (env.d / c + env.b0 / (cl + c)) * (grow - (-cl * t).exp()))
}

/// `b₀e^{−cλt} + C(a₀ + b₀/(cλ + C) + 2d)(e^{Ct} − e^{−cλt})`.
pub fn envelope_b(env: &GronwallEnvelope, t: f64) -> Result<f64> {
    env.validate()?;
    check_time(t)?;
    let (c, cl) = (env.c_big, env.c_small * env.lambda);
    let decay = (-cl * t).exp();
    Ok(env.b0 * decay + c * (env.a0 + env.b0 / (cl + c) + 2.0 * env.d) * ((c * t).exp() - decay))
}

/// Bounds for `|ȧ| ≤ b`, `ḃ ≤ λ(α a − b) + β e^{−λs}` with `λ ≥ 4 max(1, sup α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerBounds {
    pub alpha_sup: f64,
    pub lambda: f64,
    pub beta: f64,
    /// Whether `a(T) = 0`; required by [`LayerBounds::a_bound`] and [`LayerBounds::b_decay`].
    pub a_end_zero: bool,
}

pub fn layer_bounds(alpha_sup: f64, lambda: f64, beta: f64, a_end_zero: bool) -> Result<LayerBounds> {
    if !(alpha_sup >= 0.0) || !(beta >= 0.0) || !(lambda > 0.0) {
        return Err(SedError::invalid("layer bounds need alpha_sup >= 0, beta >= 0, lambda > 0"));
    }
    if lambda < 4.0 * alpha_sup.max(1.0) {
        return Err(SedError::Assumption(format!("λ = {lambda} is below 4·max(1, sup α) = {}", 4.0 * alpha_sup.max(1.0))));
    }
    Ok(LayerBounds { alpha_sup, lambda, beta, a_end_zero })
}

impl LayerBounds {
    fn need_end_zero(&self) -> Result<()> {
        if self.a_end_zero {
            Ok(())
        } else {
            Err(SedError::Assumption("bound requires a(T) = 0".into()))
        }
    }

    /// `a(t) ≤ (2/λ) b(t) + (4/λ²) β e^{−λt}`.
    pub fn a_bound(&self, b_t: f64, t: f64) -> Result<f64> {
        self.need_end_zero()?;
        let l = self.lambda;
        Ok(2.0 / l * b_t + 4.0 / (l * l) * self.beta * (-l * t).exp())
    }

    /// `b(t) ≤ exp((2 sup α − λ)(t − s)) (b(s) + (2β/λ) e^{−λs})` for `s ≤ t`.
    pub fn b_decay(&self, b_s: f64, s: f64, t: f64) -> Result<f64> {
        self.need_end_zero()?;
        if t < s {
            return Err(SedError::invalid("b_decay needs s <= t"));
        }
        let l = self.lambda;
        Ok(((2.0 * self.alpha_sup - l) * (t - s)).exp() * (b_s + 2.0 * self.beta / l * (-l * s).exp()))
    }

    /// `b(t) ≤ 2 sup α · a(t)`, valid when `β = 0` and `b(0) = 0`.
    pub fn b_from_a(&self, a_t: f64, b0: f64) -> Result<f64> {
        if self.beta != 0.0 || b0 != 0.0 {
            return Err(SedError::Assumption("bound requires beta = 0 and b(0) = 0".into()));
        }
        Ok(2.0 * self.alpha_sup * a_t)
    }
}

/// A point of a series that exceeds its envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub t: f64,
    pub value: f64,
    pub envelope: f64,
}

/// Points of `series` with `value > envelope(t)·(1 + tol)`; empty means the series passes.
pub fn check_series_against(envelope: impl Fn(f64) -> f64, series: &[(f64, f64)], tol: f64) -> Vec<Violation> {
    series
        .iter()
        .filter_map(|&(t, value)| {
            let e = envelope(t);
            (value > e * (1.0 + tol)).then_some(Violation { t, value, envelope: e })
        })
        .collect()
}

/// Smallest `Ĉ ≥ 1` with `d(t) ≥ d(0)e^{−Ĉt}/Ĉ` along the series, or `None` if `d` reaches 0.
pub fn fit_dmin_constant(series: &[(f64, f64)]) -> Option<f64> {
    let &(t0, d0) = series.first()?;
    if series.iter().any(|(_, d)| !(*d > 0.0)) {
        return None;
    }
    let holds = |c: f64| series.iter().all(|&(t, d)| d >= d0 * (-c * (t - t0)).exp() / c);
    if holds(1.0) {
        return Some(1.0);
    }
    let mut hi = 2.0;
    while !holds(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    let mut lo = hi / 2.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Smallest `C` on a geometric grid (with `c = C`, `d = 0`) whose envelopes dominate both
/// series within `tol`. The series must share their time points.
pub fn fit_envelope(a: &[(f64, f64)], b: &[(f64, f64)], lambda: f64, tol: f64) -> Option<GronwallEnvelope> {
    let (&(t0, a0), &(_, b0)) = (a.first()?, b.first()?);
    let shift = |s: &[(f64, f64)]| s.iter().map(|(t, v)| (t - t0, *v)).collect::<Vec<_>>();
    let (sa, sb) = (shift(a), shift(b));
    let mut c = 1.0;
    while c < 1e6 {
        let env = GronwallEnvelope::new(c, c, lambda, 0.0, a0.max(0.0), b0.max(0.0)).ok()?;
        let fa = |t: f64| envelope_a(&env, t).unwrap_or(f64::INFINITY);
        let fb = |t: f64| envelope_b(&env, t).unwrap_or(f64::INFINITY);
        if check_series_against(fa, &sa, tol).is_empty() && check_series_against(fb, &sb, tol).is_empty() {
            return Some(env);
        }
        c *= 1.05;
    }
    None
}
