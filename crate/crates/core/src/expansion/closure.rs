use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::aterm::{ATerm, TermPolynomial};
use super::coef::{Coef, Mono};
use super::ExpansionLimits;
use crate::error::{Error, Result};

/// Closed set of A-terms with their stochastic differentials
/// `dA = drift dt + diffusion (dY_t - c mu_{t;t} dt)`.
///
/// Drift and diffusion polynomials reference states by their integral part;
/// outer factors are powers of the filter mean and variance at time `t`,
/// which are supplied externally.
#[derive(Debug, Clone, PartialEq)]
pub struct TermSystem {
    pub states: Vec<ATerm>,
    pub drift: Vec<TermPolynomial>,
    pub diffusion: Vec<TermPolynomial>,
    /// Part of each drift that stems from the quadratic variation
    /// `(dl_t)^2 = sigma^2 dt`.
    pub quadratic: Vec<TermPolynomial>,
    /// Generation passes needed to close the system.
    pub passes: usize,
}

impl TermSystem {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, core: &ATerm) -> Option<usize> {
        self.states.binary_search(core).ok()
    }

    /// Every integral referenced by a drift or diffusion is a state.
    pub fn is_closed(&self) -> bool {
        self.drift
            .iter()
            .chain(self.diffusion.iter())
            .all(|p| p.cores().all(|c| self.index_of(&c).is_some()))
    }
}

impl fmt::Display for TermSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# s = 1/sigma^2; mu = mu_(t;t); gamma = gamma(t); dl = dY - c mu dt"
        )?;
        writeln!(f, "states {} passes {}", self.states.len(), self.passes)?;
        for (i, s) in self.states.iter().enumerate() {
            writeln!(f, "d {s}")?;
            for (name, poly) in [("dt", &self.drift[i]), ("dl", &self.diffusion[i])] {
                writeln!(f, "  {name}:")?;
                if poly.is_empty() {
                    writeln!(f, "    0")?;
                }
                for (t, c) in poly.iter() {
                    writeln!(f, "    ({c}) * {t}")?;
                }
            }
        }
        Ok(())
    }
}

fn m(a: u8, c: u8, s: i8) -> Mono {
    Mono::new(a, c, s)
}

/// Evaluates the integrand at `t_n = t`, moving the last level's factors
/// into the outer monomial.
fn boundary(t: &ATerm) -> ATerm {
    let n = t.depth();
    let last = n - 1;
    let mut out = t.clone();
    out.outer[0] += t.p[last];
    out.outer[1] += t.q[last] + t.r(last, last);
    for i in 0..last {
        out.q[i] += t.r(i, last);
    }
    out.p.pop();
    out.q.pop();
    out.alpha.pop();
    let mut r = Vec::with_capacity(last * n / 2);
    for i in 0..last {
        for j in i..last {
            r.push(t.r(i, j));
        }
    }
    out.r = r;
    out
}

fn with(t: &ATerm, edit: impl FnOnce(&mut ATerm)) -> ATerm {
    let mut out = t.clone();
    edit(&mut out);
    out
}

/// `d_t` of an integral with no outer factor, as `(drift, diffusion,
/// quadratic)` where `quadratic` is the part of the drift produced by
/// `(dl_t)^2 = sigma^2 dt`.
fn differentiate(t: &ATerm) -> (TermPolynomial, TermPolynomial, TermPolynomial) {
    let n = t.depth();
    let last = n - 1;
    let mut drift = TermPolynomial::new();
    let mut diff = TermPolynomial::new();
    let mut quad = TermPolynomial::new();
    let add = |poly: &mut TermPolynomial, term: ATerm, w: f64, mono: Mono| {
        poly.add(term, &Coef::term(w, mono));
    };

    // Upper limit.
    let b = boundary(t);
    if t.alpha[last] == 0 {
        add(&mut drift, b, 1.0, Mono::ONE);
    } else {
        add(&mut diff, b, 1.0, Mono::ONE);
    }

    // Stochastic atoms: each power of mu_{t_i;t} moves with (c/sigma^2) gamma(t_i,t;t) dl_t,
    // each dl^1 measure through its -c mu ds part with -(c^2/sigma^2) gamma(t_i,t;t) dl_t.
    let mu_step = |i: usize| {
        with(t, |x| {
            x.p[i] -= 1;
            x.q[i] += 1;
        })
    };
    let meas_step = |x: &ATerm, i: usize| {
        with(x, |y| {
            y.alpha[i] = 0;
            y.q[i] += 1;
        })
    };

    for i in 0..n {
        if t.p[i] > 0 {
            add(&mut diff, mu_step(i), t.p[i] as f64, m(0, 1, 1));
        }
        if t.alpha[i] == 1 {
            add(&mut diff, meas_step(t, i), -1.0, m(0, 2, 1));
        }
        if t.q[i] > 0 {
            let q = t.q[i] as f64;
            add(&mut drift, t.clone(), q, m(1, 0, 0));
            add(&mut drift, t.clone().with_outer(0, 1), -q, m(0, 2, 1));
        }
        for j in i..n {
            let r = t.r(i, j);
            if r == 0 {
                continue;
            }
            let next = with(t, |x| {
                *x.r_mut(i, j) -= 1;
                x.q[i] += 1;
                x.q[j] += 1;
            });
            add(&mut drift, next, -(r as f64), m(0, 2, 1));
        }
    }

    // Quadratic covariation between atoms, (dl_t)^2 = sigma^2 dt.
    for i in 0..n {
        let pi = t.p[i] as f64;
        if t.p[i] >= 2 {
            let next = with(t, |x| {
                x.p[i] -= 2;
                x.q[i] += 2;
            });
            add(&mut quad, next, pi * (pi - 1.0) / 2.0, m(0, 2, 1));
        }
        for j in i + 1..n {
            if t.p[i] > 0 && t.p[j] > 0 {
                let next = with(&mu_step(i), |x| {
                    x.p[j] -= 1;
                    x.q[j] += 1;
                });
                add(&mut quad, next, pi * t.p[j] as f64, m(0, 2, 1));
            }
            if t.alpha[i] == 1 && t.alpha[j] == 1 {
                add(&mut quad, meas_step(&meas_step(t, i), j), 1.0, m(0, 4, 1));
            }
        }
        if t.p[i] > 0 {
            for j in 0..n {
                if t.alpha[j] == 1 {
                    add(&mut quad, meas_step(&mu_step(i), j), -pi, m(0, 3, 1));
                }
            }
        }
    }

    // Ito correction of the outer dY integral: sigma^2 times the dl_t
    // coefficient of the integrand, taken on the boundary.
    if t.alpha[last] == 1 {
        for i in 0..n {
            if t.p[i] > 0 {
                add(&mut quad, boundary(&mu_step(i)), t.p[i] as f64, m(0, 1, 0));
            }
            if i < last && t.alpha[i] == 1 {
                add(&mut quad, boundary(&meas_step(t, i)), -1.0, m(0, 2, 0));
            }
        }
    }
    drift.add_poly(&quad);
    (drift, diff, quad)
}

/// Differentiates every integral appearing in `seeds` and everything they
/// generate until the set is closed.
pub fn derive_closure<'a>(
    seeds: impl IntoIterator<Item = &'a TermPolynomial>,
    limits: &ExpansionLimits,
) -> Result<TermSystem> {
    let mut frontier: BTreeSet<ATerm> = seeds.into_iter().flat_map(|p| p.cores()).collect();
    let mut done: BTreeMap<ATerm, (TermPolynomial, TermPolynomial, TermPolynomial)> =
        BTreeMap::new();
    let mut passes = 0;
    while !frontier.is_empty() {
        passes += 1;
        let mut next = BTreeSet::new();
        for core in std::mem::take(&mut frontier) {
            let (drift, diff, quad) = differentiate(&core);
            for c in drift.cores().chain(diff.cores()) {
                if !done.contains_key(&c) && c != core {
                    next.insert(c);
                }
            }
            done.insert(core, (drift, diff, quad));
        }
        next.retain(|c| !done.contains_key(c));
        let count = done.len() + next.len();
        if count > limits.term_cap {
            return Err(Error::ClosureOverflow {
                pass: passes,
                count,
                cap: limits.term_cap,
            });
        }
        frontier = next;
    }
    let mut sys = TermSystem {
        states: Vec::with_capacity(done.len()),
        drift: Vec::with_capacity(done.len()),
        diffusion: Vec::with_capacity(done.len()),
        quadratic: Vec::with_capacity(done.len()),
        passes,
    };
    for (s, (d, g, q)) in done {
        sys.states.push(s);
        sys.drift.push(d);
        sys.diffusion.push(g);
        sys.quadratic.push(q);
    }
    Ok(sys)
}
