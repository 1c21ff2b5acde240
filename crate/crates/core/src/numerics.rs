//! Small numerical helpers: polynomial extrapolation and least-squares line fits.

/// Value at `u = 0` of the interpolating polynomial through `(u_i, v_i)` (Neville).
pub fn extrapolate_to_zero(u: &[f64], v: &[f64]) -> f64 {
    assert_eq!(u.len(), v.len());
    assert!(!u.is_empty());
    let mut p = v.to_vec();
    let n = u.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (u[i + m] * p[i] - u[i] * p[i + 1]) / (u[i + m] - u[i]);
        }
    }
    p[0]
}

/// Richardson extrapolation of `v(λ)` to `λ → ∞` assuming an expansion in powers of `λ^{-ε}`.
pub fn richardson_lambda(lambdas: &[f64], values: &[f64], epsilon: f64) -> f64 {
    let u: Vec<f64> = lambdas.iter().map(|l| l.powf(-epsilon)).collect();
    extrapolate_to_zero(&u, values)
}

/// Ordinary least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some(LineFit { slope, intercept: my - slope * mx })
}

/// Slope of `log y` against `log x`. Non-positive entries are skipped.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .unzip();
    linear_fit(&lx, &ly).map(|f| f.slope)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neville_reproduces_polynomials() {
        let u = [0.5, 0.3, 0.2, 0.1];
        let v: Vec<f64> = u.iter().map(|x| 2.0 - 3.0 * x + x * x * x).collect();
        assert!((extrapolate_to_zero(&u, &v) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn richardson_removes_power_tail() {
        let lam = [10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0];
        let eps = 0.5;
        let v: Vec<f64> = lam.iter().map(|l: &f64| 1.0 + 0.7 * l.powf(-eps) - 0.2 * l.powf(-2.0 * eps)).collect();
        assert!((richardson_lambda(&lam, &v, eps) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fits() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        let yy: Vec<f64> = x.iter().map(|v: &f64| 5.0 * v.powf(-1.5)).collect();
        assert!((loglog_slope(&x, &yy).unwrap() + 1.5).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
