use crate::error::{Result, SedError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// `y = a x^s`, fitted as `ln y` against `ln x`.
    PowerLaw,
    /// `y = a e^{s x}`, fitted as `ln y` against `x`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Exponent or rate `s`.
    pub slope: f64,
    /// `ln a`.
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares line in log coordinates.
pub fn rate_fit(series: &[(f64, f64)], model: FitModel) -> Result<RateFit> {
    if series.len() < 3 {
        return Err(SedError::invalid("rate fit needs at least 3 points"));
    }
    let mut pts = Vec::with_capacity(series.len());
    for &(x, y) in series {
        if !(y > 0.0) || !y.is_finite() {
            return Err(SedError::invalid(format!("rate fit needs positive data, got {y}")));
        }
        let x = match model {
            FitModel::PowerLaw if !(x > 0.0) => return Err(SedError::invalid(format!("power-law fit needs x > 0, got {x}"))),
            FitModel::PowerLaw => x.ln(),
            FitModel::Exponential => x,
        };
        pts.push((x, y.ln()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SedError::invalid("rate fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit { slope, intercept: my - slope * mx, r2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_and_exponential() {
        let s: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0].iter().map(|x| (*x, 7.0 / x)).collect();
        let f = rate_fit(&s, FitModel::PowerLaw).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-9 && (f.r2 - 1.0).abs() < 1e-12);
        let s: Vec<(f64, f64)> = (0..10).map(|i| (0.1 * i as f64, 3.0 * (-5.0 * 0.1 * i as f64).exp())).collect();
        assert!((rate_fit(&s, FitModel::Exponential).unwrap().slope + 5.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_data() {
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)], FitModel::PowerLaw).is_err());
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 1.0)], FitModel::PowerLaw).is_err());
        assert!(rate_fit(&[(0.0, 1.0), (2.0, 1.0), (3.0, 1.0)], FitModel::PowerLaw).is_err());
    }
}
