use crate::error::{Error, Result};

pub const DEFAULT_DEGREE_CAP: usize = 5;

/// Univariate polynomial, coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySpec {
    coeffs: Vec<f64>,
}

impl PolySpec {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        Self::with_cap(coeffs, DEFAULT_DEGREE_CAP)
    }

    pub fn with_cap(mut coeffs: Vec<f64>, cap: usize) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config(
                "key `g_coeffs`: non-finite coefficient".into(),
            ));
        }
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        let p = Self { coeffs };
        if let Some(d) = p.degree() {
            if d > cap {
                return Err(Error::CapExceeded {
                    what: "polynomial degree",
                    value: d,
                    cap,
                });
            }
        }
        Ok(p)
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    /// `x^d`.
    pub fn monomial(d: usize) -> Self {
        let mut coeffs = vec![0.0; d + 1];
        coeffs[d] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Nonzero `(degree, coefficient)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(d, c)| (d, *c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_and_evaluates() {
        let p = PolySpec::new(vec![1.0, 0.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.degree(), Some(2));
        assert_eq!(p.eval(3.0), 19.0);
        assert!(PolySpec::new(vec![0.0, 0.0]).unwrap().is_zero());
        assert_eq!(PolySpec::monomial(3).eval(2.0), 8.0);
    }

    #[test]
    fn degree_cap() {
        assert!(PolySpec::new(vec![0.0; 6].into_iter().chain([1.0]).collect()).is_err());
        assert!(PolySpec::with_cap(vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0], 7).is_ok());
    }
}
