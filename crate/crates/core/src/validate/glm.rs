//! Log-link Poisson and gamma GLMs fitted by iteratively reweighted least
//! squares.

use ndarray::{Array1, Array2, ArrayView2};

use crate::linalg;
use crate::{Error, Result, Scalar};

pub const MAX_ITERATIONS: usize = 100;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-8;
const MAX_HALVINGS: usize = 30;
const ALIAS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Poisson,
    Gamma,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::Gamma => "gamma",
        }
    }

    fn variance<T: Scalar>(self, mu: T) -> T {
        match self {
            Family::Poisson => mu,
            Family::Gamma => mu * mu,
        }
    }

    fn unit_deviance<T: Scalar>(self, y: T, mu: T) -> T {
        let two = T::of(2.0);
        match self {
            Family::Poisson => {
                let a = if y > T::zero() {
                    y * (y / mu).ln()
                } else {
                    T::zero()
                };
                two * (a - (y - mu))
            }
            Family::Gamma => two * (-(y / mu).ln() + (y - mu) / mu),
        }
    }
}

/// A fitted log-link GLM. `coefficients[0]` is the intercept, followed by
/// one entry per design column; aliased columns carry a zero coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit<T> {
    pub family: Family,
    pub coefficients: Vec<T>,
    pub aliased: Vec<bool>,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: T,
    /// Pearson estimate; not used by predictions.
    pub dispersion: T,
    pub warnings: Vec<String>,
}

impl<T: Scalar> GlmFit<T> {
    pub fn n_columns(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn linear_predictor(&self, row: &[T]) -> T {
        let beta = &self.coefficients;
        row.iter()
            .zip(&beta[1..])
            .fold(beta[0], |acc, (&x, &b)| acc + x * b)
    }
}

/// Fits `log E[y] = β₀ + Xβ + offset` with optional prior weights.
pub fn fit_glm<T: Scalar>(
    family: Family,
    design: ArrayView2<'_, T>,
    y: &[T],
    offset: Option<&[T]>,
    weights: Option<&[T]>,
) -> Result<GlmFit<T>> {
    let (n, d) = design.dim();
    if y.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: y.len(),
        });
    }
    if n <= d {
        return Err(Error::InvalidArgument(format!(
            "GLM needs more rows than design columns ({n} rows, {d} columns)"
        )));
    }
    for (name, v) in [("offset", offset), ("weights", weights)] {
        if let Some(v) = v {
            if v.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be finite")));
            }
        }
    }
    if weights.is_some_and(|w| w.iter().any(|&x| x < T::zero())) {
        return Err(Error::InvalidArgument("weights must be nonnegative".into()));
    }
    for &yi in y {
        let ok = match family {
            Family::Poisson => yi >= T::zero() && yi.fract() == T::zero(),
            Family::Gamma => yi > T::zero() && yi.is_finite(),
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "{} response out of range: {yi}",
                family.as_str()
            )));
        }
    }
    if design.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "design matrix must be finite".into(),
        ));
    }

    let off = |i: usize| offset.map_or(T::zero(), |o| o[i]);
    let pw = |i: usize| weights.map_or(T::one(), |w| w[i]);

    // Intercept plus design columns, then drop the aliased ones.
    let mut full = Array2::<T>::ones((n, d + 1));
    full.slice_mut(ndarray::s![.., 1..]).assign(&design);
    let aliased = linalg::aliased_columns(full.t().dot(&full).view(), T::of(ALIAS_TOLERANCE));
    let kept: Vec<usize> = (0..=d).filter(|&j| !aliased[j]).collect();
    let mut warnings = Vec::new();
    let n_aliased = aliased.iter().filter(|&&a| a).count();
    if n_aliased > 0 {
        warnings.push(format!("dropped {n_aliased} aliased column(s)"));
    }
    let x = full.select(ndarray::Axis(1), &kept);
    let p = kept.len();

    let deviance = |eta: &Array1<T>| -> T {
        (0..n)
            .map(|i| pw(i) * family.unit_deviance(y[i], eta[i].exp()))
            .sum::<T>()
    };

    let mut mu: Array1<T> = (0..n)
        .map(|i| match family {
            Family::Poisson => y[i] + T::of(0.1),
            Family::Gamma => y[i],
        })
        .collect();
    let mut eta: Array1<T> = mu.mapv(|m| m.ln());
    let mut beta: Option<Array1<T>> = None;
    let mut dev_old = deviance(&eta);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut xtwx = Array2::<T>::zeros((p, p));
        let mut xtwz = Array1::<T>::zeros(p);
        for i in 0..n {
            let m = mu[i];
            // With the log link, dμ/dη = μ.
            let w = pw(i) * m * m / family.variance(m);
            let z = eta[i] - off(i) + (y[i] - m) / m;
            let row = x.row(i);
            for a in 0..p {
                let wa = w * row[a];
                xtwz[a] += wa * z;
                for b in 0..=a {
                    xtwx[[a, b]] += wa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtwx[[b, a]] = xtwx[[a, b]];
            }
        }
        let (l, _) = linalg::cholesky_with_jitter(xtwx.view(), T::of(1e-10)).ok_or_else(|| {
            Error::Numeric("IRLS normal equations are not positive definite".into())
        })?;
        let mut next = linalg::cholesky_solve(l.view(), xtwz.view());
        let linear = |b: &Array1<T>| -> Array1<T> {
            let mut e = x.dot(b);
            for (i, v) in e.iter_mut().enumerate() {
                *v += off(i);
            }
            e
        };
        let mut next_eta = linear(&next);
        let mut dev_new = deviance(&next_eta);
        if let Some(prev) = &beta {
            let slack = T::of(100.0) * T::epsilon() * (dev_old.abs() + T::one());
            let mut halvings = 0;
            while !(dev_new.is_finite() && dev_new <= dev_old + slack) {
                if halvings == MAX_HALVINGS {
                    return Err(Error::Numeric(
                        "IRLS step-halving failed to reduce the deviance".into(),
                    ));
                }
                next = (&next + prev).mapv(|v| v * T::of(0.5));
                next_eta = linear(&next);
                dev_new = deviance(&next_eta);
                halvings += 1;
            }
        } else if !dev_new.is_finite() {
            return Err(Error::Numeric("IRLS produced a non-finite deviance".into()));
        }
        let change = beta.as_ref().map_or(T::infinity(), |prev| {
            next.iter()
                .zip(prev.iter())
                .fold(T::zero(), |m, (a, b)| m.max((*a - *b).abs()))
        });
        eta = next_eta;
        mu = eta.mapv(|e| e.exp());
        dev_old = dev_new;
        beta = Some(next);
        if change < T::of(CONVERGENCE_TOLERANCE) {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "IRLS did not converge in {MAX_ITERATIONS} iterations"
        ));
    }
    let beta = beta.expect("at least one iteration");
    let mut coefficients = vec![T::zero(); d + 1];
    for (k, &j) in kept.iter().enumerate() {
        coefficients[j] = beta[k];
    }
    if coefficients.iter().any(|b| !b.is_finite()) {
        return Err(Error::Numeric("GLM coefficients are not finite".into()));
    }
    let pearson: T = (0..n)
        .map(|i| {
            let r = y[i] - mu[i];
            pw(i) * r * r / family.variance(mu[i])
        })
        .sum();
    let dispersion = match family {
        Family::Poisson => T::one(),
        Family::Gamma => pearson / T::of((n - p).max(1) as f64),
    };
    Ok(GlmFit {
        family,
        coefficients,
        aliased,
        converged,
        iterations,
        deviance: dev_old,
        dispersion,
        warnings,
    })
}

/// `exp(β₀ + Xβ + offset)` for every row of `design`.
pub fn predict_glm<T: Scalar>(
    fit: &GlmFit<T>,
    design: ArrayView2<'_, T>,
    offset: Option<&[T]>,
) -> Result<Vec<T>> {
    if design.ncols() != fit.n_columns() {
        return Err(Error::Dimension {
            expected: fit.n_columns(),
            found: design.ncols(),
        });
    }
    if let Some(o) = offset {
        if o.len() != design.nrows() {
            return Err(Error::Dimension {
                expected: design.nrows(),
                found: o.len(),
            });
        }
    }
    Ok(design
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let eta = r
                .iter()
                .zip(&fit.coefficients[1..])
                .fold(fit.coefficients[0], |a, (&x, &b)| a + x * b);
            (eta + offset.map_or(T::zero(), |o| o[i])).exp()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn no_columns(n: usize) -> Array2<f64> {
        Array2::zeros((n, 0))
    }

    #[test]
    fn intercept_only_poisson_is_log_mean() {
        let y = [0.0, 1.0, 2.0, 1.0];
        let fit = fit_glm(Family::Poisson, no_columns(4).view(), &y, None, None).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() < 1e-8);
    }

    #[test]
    fn intercept_only_gamma_is_log_mean() {
        let fit = fit_glm(Family::Gamma, no_columns(2).view(), &[2.0, 4.0], None, None).unwrap();
        assert!((fit.coefficients[0] - 3f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn intercept_only_poisson_with_offset() {
        let y = [3.0, 0.0, 5.0, 2.0];
        let exposure: [f64; 4] = [1.0, 0.5, 2.0, 1.5];
        let offset: Vec<f64> = exposure.iter().map(|e| e.ln()).collect();
        let fit = fit_glm(
            Family::Poisson,
            no_columns(4).view(),
            &y,
            Some(&offset),
            None,
        )
        .unwrap();
        let expected = (10.0f64 / 5.0).ln();
        assert!((fit.coefficients[0] - expected).abs() < 1e-8);
    }

    #[test]
    fn weighted_gamma_intercept_is_weighted_mean() {
        let y = [2.0, 4.0, 9.0];
        let w = [1.0, 2.0, 1.0];
        let fit = fit_glm(Family::Gamma, no_columns(3).view(), &y, None, Some(&w)).unwrap();
        assert!((fit.coefficients[0] - (19.0f64 / 4.0).ln()).abs() < 1e-8);
    }

    #[test]
    fn zero_coefficients_predict_one() {
        let fit = GlmFit {
            family: Family::Poisson,
            coefficients: vec![0.0; 3],
            aliased: vec![false; 3],
            converged: true,
            iterations: 0,
            deviance: 0.0,
            dispersion: 1.0,
            warnings: vec![],
        };
        let x = Array2::from_shape_vec((2, 2), vec![1.0, 2.0, -3.0, 0.5]).unwrap();
        assert_eq!(predict_glm(&fit, x.view(), None).unwrap(), vec![1.0, 1.0]);
        let shifted = predict_glm(&fit, x.view(), Some(&[0.7, 0.7])).unwrap();
        assert!((shifted[0] - 0.7f64.exp()).abs() < 1e-12);
        assert!(predict_glm(&fit, Array2::zeros((1, 3)).view(), None).is_err());
    }

    #[test]
    fn intercept_only_prediction_is_mean() {
        let y = [1.0, 4.0, 2.0, 0.0, 3.0];
        let fit = fit_glm(Family::Poisson, no_columns(5).view(), &y, None, None).unwrap();
        for p in predict_glm(&fit, no_columns(5).view(), None).unwrap() {
            assert!((p - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn duplicate_column_is_dropped_with_warning() {
        let x = Array2::from_shape_fn((6, 2), |(i, _)| i as f64);
        let y = [0.0, 1.0, 1.0, 2.0, 3.0, 5.0];
        let fit = fit_glm(Family::Poisson, x.view(), &y, None, None).unwrap();
        assert_eq!(fit.aliased, vec![false, false, true]);
        assert_eq!(fit.coefficients[2], 0.0);
        assert!(!fit.warnings.is_empty());
    }

    #[test]
    fn rejects_invalid_responses() {
        assert!(fit_glm(
            Family::Poisson,
            no_columns(2).view(),
            &[1.5, 1.0],
            None,
            None
        )
        .is_err());
        assert!(fit_glm(Family::Gamma, no_columns(2).view(), &[0.0, 1.0], None, None).is_err());
        assert!(fit_glm(
            Family::Gamma,
            Array2::<f64>::zeros((2, 2)).view(),
            &[1.0, 1.0],
            None,
            None
        )
        .is_err());
    }

    #[test]
    fn single_precision_fit() {
        let y = [0.0f32, 1.0, 2.0, 1.0];
        let fit = fit_glm(
            Family::Poisson,
            Array2::<f32>::zeros((4, 0)).view(),
            &y,
            None,
            None,
        )
        .unwrap();
        assert!(fit.coefficients[0].abs() < 1e-5);
    }
}
