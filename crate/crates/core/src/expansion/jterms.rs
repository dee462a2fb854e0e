use std::collections::BTreeSet;

use super::aterm::{ATerm, TermPolynomial};
use super::coef::{Coef, Mono};
use super::wick::{tri_index, wick_symbolic};
use super::ExpansionLimits;
use crate::error::{Error, Result};
use crate::model::PolySpec;

/// `J^i(X_t)` and `J^i(1)` for `i = 0..=order`.
#[derive(Debug, Clone, PartialEq)]
pub struct JTerms {
    pub x: Vec<TermPolynomial>,
    pub one: Vec<TermPolynomial>,
}

impl JTerms {
    pub fn order(&self) -> usize {
        self.x.len() - 1
    }

    /// Every polynomial, `J^i(X)` then `J^i(1)`.
    pub fn all(&self) -> impl Iterator<Item = &TermPolynomial> {
        self.x.iter().chain(self.one.iter())
    }
}

/// How `dY - c X ds` is split at one level:
/// `dl^1 + c mu ds - c X ds`.
#[derive(Clone, Copy, PartialEq)]
enum Split {
    Innovation,
    MeanDrift,
    StateDrift,
}

const SPLITS: [Split; 3] = [Split::Innovation, Split::MeanDrift, Split::StateDrift];

/// Expands `J^i(U) = sigma^{-2i} E_t[U int_{t_1<..<t_i} prod g(X_{t_k}) (dY - c X dt)_{t_k}]`
/// into A-terms by symbolic Gaussian moments.
pub fn build_j_terms(g: &PolySpec, order: usize, limits: &ExpansionLimits) -> Result<JTerms> {
    if order > limits.max_order {
        return Err(Error::CapExceeded {
            what: "expansion order",
            value: order,
            cap: limits.max_order,
        });
    }
    let mut x = vec![TermPolynomial::new(); order + 1];
    let mut one = vec![TermPolynomial::new(); order + 1];
    x[0].add(ATerm::one().with_outer(1, 0), &Coef::constant(1.0));
    one[0].add(ATerm::one(), &Coef::constant(1.0));
    let gterms: Vec<(usize, f64)> = g.terms().collect();
    for i in 1..=order {
        let choices: Vec<(usize, f64, Split)> = gterms
            .iter()
            .flat_map(|&(d, w)| SPLITS.iter().map(move |&s| (d, w, s)))
            .collect();
        let mut idx = vec![0usize; i];
        if choices.is_empty() {
            continue;
        }
        loop {
            let levels: Vec<_> = idx.iter().map(|&k| choices[k]).collect();
            for (with_x, target) in [(true, &mut x[i]), (false, &mut one[i])] {
                expand_levels(&levels, with_x, limits, target)?;
            }
            let mut k = 0;
            while k < i {
                idx[k] += 1;
                if idx[k] < choices.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == i {
                break;
            }
        }
        // every core becomes a state of the closure
        let cores: BTreeSet<ATerm> = x[..=i]
            .iter()
            .chain(&one[..=i])
            .flat_map(|p| p.cores())
            .collect();
        if cores.len() > limits.term_cap {
            return Err(Error::ClosureOverflow {
                pass: 0,
                count: cores.len(),
                cap: limits.term_cap,
            });
        }
    }
    Ok(JTerms { x, one })
}

fn expand_levels(
    levels: &[(usize, f64, Split)],
    with_x: bool,
    limits: &ExpansionLimits,
    out: &mut TermPolynomial,
) -> Result<()> {
    let n = levels.len();
    let m = n + 1;
    let mut exps = vec![with_x as u8; m];
    let mut weight = 1.0;
    let mut mono = Mono::new(0, 0, n as i8);
    for (k, &(d, w, split)) in levels.iter().enumerate() {
        let d = u8::try_from(d).map_err(|_| Error::CapExceeded {
            what: "polynomial degree",
            value: d,
            cap: u8::MAX as usize,
        })?;
        exps[k + 1] = d + (split == Split::StateDrift) as u8;
        weight *= w;
        match split {
            Split::Innovation => {}
            Split::MeanDrift => mono.c += 1,
            Split::StateDrift => {
                mono.c += 1;
                weight = -weight;
            }
        }
    }
    let coef = Coef::term(weight, mono);
    for (wm, ww) in wick_symbolic(&exps, limits.wick_degree_cap)? {
        let p = (0..n)
            .map(|k| wm.mean[k + 1] + (levels[k].2 == Split::MeanDrift) as u8)
            .collect();
        let q = (0..n).map(|k| wm.cov[tri_index(m, 0, k + 1)]).collect();
        let mut r = vec![0; n * (n + 1) / 2];
        for k in 0..n {
            for l in k..n {
                r[tri_index(n, k, l)] = wm.cov[tri_index(m, k + 1, l + 1)];
            }
        }
        let alpha = levels
            .iter()
            .map(|l| (l.2 == Split::Innovation) as u8)
            .collect();
        let term = ATerm::new(p, q, r, alpha)?.with_outer(wm.mean[0], wm.cov[0]);
        out.add(term, &coef.scaled(ww, Mono::ONE));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(w: f64, a: u8, cc: u8, s: i8) -> Coef {
        Coef::term(w, Mono::new(a, cc, s))
    }

    #[test]
    fn zero_perturbation_has_no_corrections() {
        let j = build_j_terms(&PolySpec::zero(), 2, &ExpansionLimits::default()).unwrap();
        assert_eq!(j.x[0].len(), 1);
        for i in 1..=2 {
            assert!(j.x[i].is_empty() && j.one[i].is_empty());
        }
    }

    #[test]
    fn linear_sensor_first_order() {
        // E[X_t X_s] = mu_t mu_s + gamma(s,t;t), E[X_s] = mu_s, E[X_s (X_s - mu_s)] = gamma(s,s;t)
        let j = build_j_terms(&PolySpec::monomial(1), 1, &ExpansionLimits::default()).unwrap();
        let mut want_one = TermPolynomial::new();
        want_one.add(ATerm::single(1, 0, 0, 1), &c(1.0, 0, 0, 1));
        want_one.add(ATerm::single(0, 0, 1, 0), &c(-1.0, 0, 1, 1));
        assert_eq!(j.one[1], want_one);
        let mut want_x = TermPolynomial::new();
        want_x.add(ATerm::single(1, 0, 0, 1).with_outer(1, 0), &c(1.0, 0, 0, 1));
        want_x.add(ATerm::single(0, 1, 0, 1), &c(1.0, 0, 0, 1));
        want_x.add(
            ATerm::single(0, 0, 1, 0).with_outer(1, 0),
            &c(-1.0, 0, 1, 1),
        );
        want_x.add(ATerm::single(1, 1, 0, 0), &c(-1.0, 0, 1, 1));
        assert_eq!(j.x[1], want_x);
    }

    #[test]
    fn cubic_sensor_first_order() {
        let j = build_j_terms(&PolySpec::monomial(3), 1, &ExpansionLimits::default()).unwrap();
        let mut want_one = TermPolynomial::new();
        want_one.add(ATerm::single(0, 0, 2, 0), &c(-3.0, 0, 1, 1));
        want_one.add(ATerm::single(1, 0, 1, 1), &c(3.0, 0, 0, 1));
        want_one.add(ATerm::single(2, 0, 1, 0), &c(-3.0, 0, 1, 1));
        want_one.add(ATerm::single(3, 0, 0, 1), &c(1.0, 0, 0, 1));
        assert_eq!(j.one[1], want_one);
        // J1(X) = mu J1(1) + covariance terms
        let mut want_x = TermPolynomial::new();
        for (t, w) in want_one.iter() {
            want_x.add(t.clone().with_outer(1, 0), w);
        }
        want_x.add(ATerm::single(0, 1, 1, 1), &c(3.0, 0, 0, 1));
        want_x.add(ATerm::single(1, 1, 1, 0), &c(-9.0, 0, 1, 1));
        want_x.add(ATerm::single(2, 1, 0, 1), &c(3.0, 0, 0, 1));
        want_x.add(ATerm::single(3, 1, 0, 0), &c(-1.0, 0, 1, 1));
        assert_eq!(j.x[1], want_x);
    }

    #[test]
    fn oversized_expansion_trips_term_cap() {
        let limits = ExpansionLimits {
            max_order: 4,
            term_cap: 500,
            wick_degree_cap: 40,
        };
        let err = build_j_terms(&PolySpec::monomial(7), 4, &limits).unwrap_err();
        assert!(
            matches!(err, Error::ClosureOverflow { pass: 0, .. }),
            "{err}"
        );
        assert!(err.to_string().contains("term cap"));
    }
}
