use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const DEFAULT_WICK_DEGREE_CAP: usize = 12;

fn check_degree(exps: &[u8], cap: usize) -> Result<()> {
    let deg: usize = exps.iter().map(|&k| k as usize).sum();
    if deg > cap {
        return Err(Error::CapExceeded {
            what: "moment degree",
            value: deg,
            cap,
        });
    }
    Ok(())
}

/// `E[prod X_i^{k_i}]` for a Gaussian vector with the given mean and covariance.
///
/// Uses the Stein recursion `E[X_v M] = mu_v E[M] + sum_w C_vw E[d_w M]`,
/// which enumerates the Isserlis pairings without repeating sub-moments.
pub fn wick_moment(means: &[f64], cov: &DMatrix<f64>, exps: &[u8]) -> Result<f64> {
    wick_moment_capped(means, cov, exps, DEFAULT_WICK_DEGREE_CAP)
}

pub fn wick_moment_capped(
    means: &[f64],
    cov: &DMatrix<f64>,
    exps: &[u8],
    cap: usize,
) -> Result<f64> {
    let m = means.len();
    if exps.len() != m || cov.nrows() != m || cov.ncols() != m {
        return Err(Error::Contract(format!(
            "wick_moment: {} means, {}x{} covariance, {} exponents",
            m,
            cov.nrows(),
            cov.ncols(),
            exps.len()
        )));
    }
    check_degree(exps, cap)?;
    let mut memo = HashMap::new();
    Ok(numeric(means, cov, exps.to_vec(), &mut memo))
}

fn numeric(
    means: &[f64],
    cov: &DMatrix<f64>,
    mut k: Vec<u8>,
    memo: &mut HashMap<Vec<u8>, f64>,
) -> f64 {
    let Some(v) = k.iter().position(|&e| e > 0) else {
        return 1.0;
    };
    if let Some(&x) = memo.get(&k) {
        return x;
    }
    let key = k.clone();
    k[v] -= 1;
    let mut acc = means[v] * numeric(means, cov, k.clone(), memo);
    for w in 0..k.len() {
        if k[w] > 0 && cov[(v, w)] != 0.0 {
            let mult = k[w] as f64;
            k[w] -= 1;
            acc += cov[(v, w)] * mult * numeric(means, cov, k.clone(), memo);
            k[w] += 1;
        }
    }
    memo.insert(key, acc);
    acc
}

/// Monomial in the symbolic means `mu_i` and covariances `C_ij` (`i <= j`,
/// row-major upper triangle).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct WickMono {
    pub mean: Vec<u8>,
    pub cov: Vec<u8>,
}

pub(crate) fn tri_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * m - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Symbolic Gaussian moment: the polynomial in means and covariances that
/// equals `E[prod X_i^{k_i}]`.
pub(crate) fn wick_symbolic(exps: &[u8], cap: usize) -> Result<BTreeMap<WickMono, f64>> {
    check_degree(exps, cap)?;
    let mut memo = HashMap::new();
    Ok(symbolic(exps.to_vec(), &mut memo))
}

fn symbolic(
    mut k: Vec<u8>,
    memo: &mut HashMap<Vec<u8>, BTreeMap<WickMono, f64>>,
) -> BTreeMap<WickMono, f64> {
    let m = k.len();
    let Some(v) = k.iter().position(|&e| e > 0) else {
        let one = WickMono {
            mean: vec![0; m],
            cov: vec![0; m * (m + 1) / 2],
        };
        return BTreeMap::from([(one, 1.0)]);
    };
    if let Some(x) = memo.get(&k) {
        return x.clone();
    }
    let key = k.clone();
    k[v] -= 1;
    let mut out: BTreeMap<WickMono, f64> = BTreeMap::new();
    for (mut mono, w) in symbolic(k.clone(), memo) {
        mono.mean[v] += 1;
        *out.entry(mono).or_insert(0.0) += w;
    }
    for w in 0..m {
        if k[w] == 0 {
            continue;
        }
        let mult = k[w] as f64;
        k[w] -= 1;
        let idx = tri_index(m, v, w);
        for (mut mono, x) in symbolic(k.clone(), memo) {
            mono.cov[idx] += 1;
            *out.entry(mono).or_insert(0.0) += mult * x;
        }
        k[w] += 1;
    }
    memo.insert(key, out.clone());
    out
}
