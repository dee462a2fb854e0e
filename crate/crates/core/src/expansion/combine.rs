use crate::io::CsvTable;
use crate::model::TimeGrid;

/// Coefficients of the series quotient
/// `(sum_i J^i(X) eps^i) / (sum_i J^i(1) eps^i)` up to the common order,
/// with `J^0(1) = 1`.
pub fn combine(jx: &[f64], jone: &[f64]) -> Vec<f64> {
    let len = jx.len().min(jone.len());
    let mut n = Vec::with_capacity(len);
    for k in 0..len {
        let mut v = jx[k];
        for j in 1..=k {
            v -= jone[j] * n[k - j];
        }
        n.push(v);
    }
    n
}

/// Clips each term `n^i eps^i` to at most `r` times the previous clipped
/// term, keeping its sign. `r = inf` leaves the coefficients unchanged.
pub fn clip(coeffs: &[f64], epsilon: f64, r: f64) -> Vec<f64> {
    let mut out = coeffs.to_vec();
    if r.is_infinite() {
        return out;
    }
    for i in 1..out.len() {
        let prev = (out[i - 1] * epsilon.powi(i as i32 - 1)).abs();
        let bound = r * prev;
        let term = out[i] * epsilon.powi(i as i32);
        if term.abs() > bound {
            out[i] = bound.copysign(out[i]) / epsilon.powi(i as i32);
        }
    }
    out
}

/// `sum_i n^i eps^i`.
pub fn series(coeffs: &[f64], epsilon: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * epsilon + c)
}

/// Clipped filter `sum_i ñ^i eps^i` at every node.
pub fn clip_path(coeffs: &[Vec<f64>], epsilon: f64, r: f64) -> Vec<f64> {
    let nodes = coeffs.first().map_or(0, Vec::len);
    (0..nodes)
        .map(|k| {
            let at: Vec<f64> = coeffs.iter().map(|c| c[k]).collect();
            series(&clip(&at, epsilon, r), epsilon)
        })
        .collect()
}

/// Expansion filter output along one path.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionResult {
    pub grid: TimeGrid,
    pub epsilon: f64,
    /// `coeffs[i][node]` is `n^i_t`.
    pub coeffs: Vec<Vec<f64>>,
    /// `N_t = sum_i n^i_t eps^i`.
    pub raw: Vec<f64>,
    /// `(r, clipped filter path)` per requested clipping ratio.
    pub clipped: Vec<(f64, Vec<f64>)>,
}

impl ExpansionResult {
    pub fn new(grid: TimeGrid, epsilon: f64, coeffs: Vec<Vec<f64>>, rs: &[f64]) -> Self {
        let raw = clip_path(&coeffs, epsilon, f64::INFINITY);
        let clipped = rs
            .iter()
            .map(|&r| (r, clip_path(&coeffs, epsilon, r)))
            .collect();
        Self {
            grid,
            epsilon,
            coeffs,
            raw,
            clipped,
        }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Columns `t, n0, .., nk, N_raw, N_clipped_r<r>..`.
    pub fn to_csv(&self) -> CsvTable {
        let mut header = vec!["t".to_string()];
        header.extend((0..self.coeffs.len()).map(|i| format!("n{i}")));
        header.push("N_raw".into());
        header.extend(self.clipped.iter().map(|(r, _)| format!("N_clipped_r{r}")));
        let mut table = CsvTable::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
        for k in 0..self.grid.len() {
            let mut row = vec![self.grid.time(k)];
            row.extend(self.coeffs.iter().map(|c| c[k]));
            row.push(self.raw[k]);
            row.extend(self.clipped.iter().map(|(_, p)| p[k]));
            table.push(&row);
        }
        table
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn series_division() {
        let jx = [0.4, -1.3, 2.2];
        let jone = [1.0, 0.7, -0.5];
        let n = combine(&jx, &jone);
        assert_eq!(n[0], 0.4);
        assert!((n[1] - (-1.3 - 0.7 * 0.4)).abs() < 1e-15);
        assert!((n[2] - (2.2 + 0.5 * 0.4 - 0.7 * n[1])).abs() < 1e-15);
        // quotient of truncated series agrees to O(eps^3)
        for eps in [1e-2, 5e-3] {
            let q = series(&jx, eps) / series(&jone, eps);
            assert!((q - series(&n, eps)).abs() < 10.0 * eps.powi(3));
        }
    }

    #[test]
    fn zero_epsilon_keeps_mean() {
        let n = [0.3, 5.0, -7.0];
        assert_eq!(series(&clip(&n, 0.0, 0.2), 0.0), 0.3);
    }

    #[test]
    fn infinite_ratio_is_identity() {
        let n = [0.0, 5.0, -7.0];
        assert_eq!(clip(&n, 0.3, f64::INFINITY), n.to_vec());
    }

    #[test]
    fn within_bound_is_unchanged() {
        let n = [1.0, 0.5, 0.2];
        assert_eq!(clip(&n, 0.1, 0.2), n.to_vec());
    }

    #[test]
    fn rescales_with_sign() {
        let c = clip(&[1.0, -10.0, 100.0], 0.1, 0.2);
        assert!((c[1] - -2.0).abs() < 1e-12);
        assert!((c[2] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn csv_header() {
        let grid = TimeGrid::on_interval(0.02, 0.01).unwrap();
        let coeffs = vec![vec![0.0, 0.1, 0.2], vec![1.0, 1.0, 1.0]];
        let res = ExpansionResult::new(grid, 0.1, coeffs, &[0.2, f64::INFINITY]);
        let csv = res.to_csv();
        assert!(csv
            .as_str()
            .starts_with("t,n0,n1,N_raw,N_clipped_r0.2,N_clipped_rinf\n"));
        assert_eq!(csv.as_str().lines().count(), 4);
    }

    proptest! {
        #[test]
        fn clipped_terms_respect_bound(
            n in proptest::collection::vec(-100.0f64..100.0, 1..5),
            eps in 0.01f64..0.99,
            r in 0.01f64..2.0,
        ) {
            let c = clip(&n, eps, r);
            for i in 1..c.len() {
                let lhs = (c[i] * eps.powi(i as i32)).abs();
                let rhs = r * (c[i - 1] * eps.powi(i as i32 - 1)).abs();
                prop_assert!(lhs <= rhs * (1.0 + 1e-12) || lhs == 0.0);
            }
            let cc = clip(&c, eps, r);
            for (x, y) in c.iter().zip(&cc) {
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
            }
        }
    }
}
