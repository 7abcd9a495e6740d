//! Dense two-phase simplex for feasibility of `A x = b, x ≥ 0`.
//!
//! Bland's rule keeps it finite on the tiny degenerate problems the
//! classical divisibility route produces.

/// Pivot and reduced-cost tolerance.
const EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    /// A basic feasible point.
    Feasible(Vec<f64>),
    /// Farkas certificate `y` with `yᵀA ≤ 0` componentwise and `yᵀb > 0`.
    Infeasible(Vec<f64>),
}

/// Decides `{x ≥ 0 : A x = b}` with phase I of the simplex method.
pub fn feasible_point(a: &[Vec<f64>], b: &[f64]) -> LpOutcome {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    assert_eq!(b.len(), m, "one right-hand side per row");
    // Flip rows so that b >= 0; remember the signs for the certificate.
    let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let width = n + m + 1;
    let mut tab = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        for j in 0..n {
            tab[i][j] = sign[i] * a[i][j];
        }
        tab[i][n + i] = 1.0;
        tab[i][width - 1] = sign[i] * b[i];
    }
    // Objective row holds reduced costs of `min Σ artificials`, and -value in the last column.
    for j in 0..n {
        tab[m][j] = -(0..m).map(|i| tab[i][j]).sum::<f64>();
    }
    tab[m][width - 1] = -(0..m).map(|i| tab[i][width - 1]).sum::<f64>();
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        let Some(enter) = (0..n + m).find(|&j| tab[m][j] < -EPS) else { break };
        let mut leave: Option<usize> = None;
        for i in 0..m {
            if tab[i][enter] > EPS {
                let ratio = tab[i][width - 1] / tab[i][enter];
                leave = match leave {
                    None => Some(i),
                    Some(l) => {
                        let best = tab[l][width - 1] / tab[l][enter];
                        if ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[l]) {
                            Some(i)
                        } else {
                            Some(l)
                        }
                    }
                };
            }
        }
        // Phase I is bounded below by 0, so an entering column always has a pivot row.
        let Some(row) = leave else { break };
        pivot(&mut tab, row, enter);
        basis[row] = enter;
    }

    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let infeasibility = -tab[m][width - 1];
    if infeasibility > 1e-9 * scale {
        // Reduced cost of artificial k is 1 - y_k.
        let y: Vec<f64> = (0..m).map(|k| sign[k] * (1.0 - tab[m][n + k])).collect();
        return LpOutcome::Infeasible(y);
    }
    let mut x = vec![0.0; n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = tab[i][width - 1].max(0.0);
        }
    }
    LpOutcome::Feasible(x)
}

fn pivot(tab: &mut [Vec<f64>], row: usize, col: usize) {
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
    }
}

/// `max_j (yᵀA)_j` and `yᵀb` for checking a Farkas certificate.
pub fn certificate_values(a: &[Vec<f64>], b: &[f64], y: &[f64]) -> (f64, f64) {
    let n = a.first().map_or(0, Vec::len);
    let worst = (0..n).map(|j| a.iter().zip(y).map(|(row, yi)| row[j] * yi).sum::<f64>()).fold(f64::NEG_INFINITY, f64::max);
    let yb = b.iter().zip(y).map(|(bi, yi)| bi * yi).sum();
    (worst, yb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_a_feasible_point() {
        // x0 + x1 = 1, x1 - x2 = 0.25
        let a = vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, -1.0]];
        let b = vec![1.0, 0.25];
        match feasible_point(&a, &b) {
            LpOutcome::Feasible(x) => {
                assert!((x[0] + x[1] - 1.0).abs() < 1e-12);
                assert!((x[1] - x[2] - 0.25).abs() < 1e-12);
                assert!(x.iter().all(|&v| v >= 0.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn certifies_infeasibility() {
        // x0 + x1 = 1, x0 + x1 = 2
        let a = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        let b = vec![1.0, 2.0];
        match feasible_point(&a, &b) {
            LpOutcome::Infeasible(y) => {
                let (worst, yb) = certificate_values(&a, &b, &y);
                assert!(worst <= 1e-12 && yb > 1e-9, "{worst} {yb}");
            }
            other => panic!("{other:?}"),
        }
        // x0 = -1
        match feasible_point(&[vec![1.0]], &[-1.0]) {
            LpOutcome::Infeasible(y) => {
                let (worst, yb) = certificate_values(&[vec![1.0]], &[-1.0], &y);
                assert!(worst <= 1e-12 && yb > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn redundant_rows_are_harmless() {
        let a = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![1.0, 0.0]];
        let b = vec![1.0, 2.0, 0.5];
        assert!(matches!(feasible_point(&a, &b), LpOutcome::Feasible(_)));
    }
}
