use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use super::coef::Coef;
use super::wick::tri_index;
use crate::error::{Error, Result};

/// Iterated integral
/// `mu_t^o0 gamma(t)^o1 * int_{t_1 < .. < t_n <= t} prod_i mu_{t_i;t}^{p_i}
/// gamma(t_i,t;t)^{q_i} prod_{i<=j} gamma(t_i,t_j;t)^{r_ij} prod_i dl^{alpha_i}_{t_i}`
/// with `dl^0 = ds` and `dl^1 = dY_s - c mu_{s;t} ds`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ATerm {
    pub(crate) p: Vec<u8>,
    pub(crate) q: Vec<u8>,
    /// Upper triangle including the diagonal, row-major.
    pub(crate) r: Vec<u8>,
    pub(crate) alpha: Vec<u8>,
    /// Exponents of `(mu_{t;t}, gamma(t))`.
    pub(crate) outer: [u8; 2],
}

impl ATerm {
    pub fn new(p: Vec<u8>, q: Vec<u8>, r: Vec<u8>, alpha: Vec<u8>) -> Result<Self> {
        let n = p.len();
        if q.len() != n || alpha.len() != n || r.len() != n * (n + 1) / 2 {
            return Err(Error::Contract(format!(
                "A-term shape: n={n}, |q|={}, |r|={}, |alpha|={}",
                q.len(),
                r.len(),
                alpha.len()
            )));
        }
        if alpha.iter().any(|&a| a > 1) {
            return Err(Error::Contract(
                "A-term measure selector must be 0 or 1".into(),
            ));
        }
        Ok(Self {
            p,
            q,
            r,
            alpha,
            outer: [0, 0],
        })
    }

    /// Single-level term `A(p, q, r, alpha; 1)`.
    pub fn single(p: u8, q: u8, r: u8, alpha: u8) -> Self {
        Self::new(vec![p], vec![q], vec![r], vec![alpha]).expect("single-level shape")
    }

    /// The constant `1` (depth zero).
    pub fn one() -> Self {
        Self::new(vec![], vec![], vec![], vec![]).expect("empty shape")
    }

    pub fn with_outer(mut self, mu: u8, gamma: u8) -> Self {
        self.outer = [mu, gamma];
        self
    }

    pub fn depth(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[u8] {
        &self.p
    }

    pub fn q(&self) -> &[u8] {
        &self.q
    }

    pub fn alpha(&self) -> &[u8] {
        &self.alpha
    }

    pub fn outer(&self) -> [u8; 2] {
        self.outer
    }

    pub fn r(&self, i: usize, j: usize) -> u8 {
        self.r[tri_index(self.depth(), i, j)]
    }

    pub(crate) fn r_mut(&mut self, i: usize, j: usize) -> &mut u8 {
        let n = self.depth();
        &mut self.r[tri_index(n, i, j)]
    }

    /// The integral without its outer factor.
    pub fn core(&self) -> ATerm {
        let mut c = self.clone();
        c.outer = [0, 0];
        c
    }

    fn key(&self) -> (usize, &[u8], &[u8], &[u8], &[u8], [u8; 2]) {
        (
            self.depth(),
            &self.p,
            &self.q,
            &self.r,
            &self.alpha,
            self.outer,
        )
    }
}

impl Ord for ATerm {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl PartialOrd for ATerm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn list(v: &[u8]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(","))
}

impl fmt::Display for ATerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut factors = Vec::new();
        for (name, e) in [("mu", self.outer[0]), ("gamma", self.outer[1])] {
            match e {
                0 => {}
                1 => factors.push(name.to_string()),
                _ => factors.push(format!("{name}^{e}")),
            }
        }
        match self.depth() {
            0 => {}
            1 => factors.push(format!(
                "A({},{},{},{};1)",
                self.p[0], self.q[0], self.r[0], self.alpha[0]
            )),
            n => factors.push(format!(
                "A({},{},{},{};{n})",
                list(&self.p),
                list(&self.q),
                list(&self.r),
                list(&self.alpha)
            )),
        }
        if factors.is_empty() {
            f.write_str("1")
        } else {
            f.write_str(&factors.join(" * "))
        }
    }
}

/// Linear combination of A-terms with coefficients polynomial in the model
/// constants.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TermPolynomial(BTreeMap<ATerm, Coef>);

impl TermPolynomial {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, term: ATerm, coef: &Coef) {
        if coef.is_zero() {
            return;
        }
        let e = self.0.entry(term.clone()).or_default();
        e.add_assign(coef);
        if e.is_zero() {
            self.0.remove(&term);
        }
    }

    pub fn add_poly(&mut self, other: &TermPolynomial) {
        for (t, c) in &other.0 {
            self.add(t.clone(), c);
        }
    }

    pub fn scaled(&self, w: f64) -> TermPolynomial {
        let mut out = TermPolynomial::new();
        for (t, c) in &self.0 {
            out.add(t.clone(), &c.scaled(w, super::coef::Mono::ONE));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, term: &ATerm) -> Option<&Coef> {
        self.0.get(term)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ATerm, &Coef)> {
        self.0.iter()
    }

    /// Distinct integrals (outer factors stripped) of depth at least one.
    pub fn cores(&self) -> impl Iterator<Item = ATerm> + '_ {
        self.0.keys().map(ATerm::core).filter(|c| c.depth() > 0)
    }
}

impl fmt::Display for TermPolynomial {
    /// One `coefficient * term` per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return writeln!(f, "0");
        }
        for (t, c) in &self.0 {
            writeln!(f, "({c}) * {t}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::coef::Mono;

    #[test]
    fn shape_is_checked() {
        assert!(ATerm::new(vec![1, 0], vec![0, 0], vec![0, 0], vec![1, 1]).is_err());
        assert!(ATerm::new(vec![1], vec![0], vec![0], vec![2]).is_err());
        let t = ATerm::new(vec![1, 0], vec![0, 2], vec![0, 1, 0], vec![1, 0]).unwrap();
        assert_eq!(t.r(0, 1), 1);
        assert_eq!(t.r(1, 0), 1);
        assert_eq!(t.to_string(), "A([1,0],[0,2],[0,1,0],[1,0];2)");
    }

    #[test]
    fn display_with_outer() {
        assert_eq!(ATerm::one().to_string(), "1");
        assert_eq!(ATerm::one().with_outer(1, 2).to_string(), "mu * gamma^2");
        assert_eq!(
            ATerm::single(1, 0, 0, 1).with_outer(0, 1).to_string(),
            "gamma * A(1,0,0,1;1)"
        );
    }

    #[test]
    fn ordering_is_by_depth_first() {
        let deep = ATerm::new(vec![0, 0], vec![0, 0], vec![0, 0, 0], vec![0, 0]).unwrap();
        assert!(ATerm::single(5, 5, 5, 1) < deep);
        assert!(ATerm::one() < ATerm::single(0, 0, 0, 0));
    }

    #[test]
    fn cancelling_coefficients_are_dropped() {
        let mut p = TermPolynomial::new();
        let t = ATerm::single(1, 1, 0, 0);
        p.add(t.clone(), &Coef::term(2.0, Mono::new(0, 1, 0)));
        p.add(t.clone(), &Coef::term(-2.0, Mono::new(0, 1, 0)));
        assert!(p.is_empty());
        p.add(t.clone(), &Coef::zero());
        assert!(p.is_empty());
    }
}
