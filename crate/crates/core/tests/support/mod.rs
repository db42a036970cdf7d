//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::io::Write;

/// Writes one acceptance line straight to stdout so it survives output
/// capture.
pub fn report(id: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{id} {verdict} {detail}");
    let _ = out.flush();
}

/// `Φ(x)` from the Maclaurin series of erf for small |x| and a continued
/// fraction for erfc in the tails.
pub fn normal_cdf(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    if z.abs() < 2.5 {
        let mut term = z;
        let mut sum = z;
        for n in 1..200 {
            term *= -z * z / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        0.5 * (1.0 + sum * 2.0 / std::f64::consts::PI.sqrt())
    } else {
        let a = z.abs();
        let mut t = a;
        for k in (1..=200).rev() {
            t = a + (k as f64 / 2.0) / t;
        }
        let erfc = (-a * a).exp() / std::f64::consts::PI.sqrt() / t;
        if z > 0.0 {
            1.0 - 0.5 * erfc
        } else {
            0.5 * erfc
        }
    }
}

/// `Φ⁻¹(p)` by bisection on [`normal_cdf`].
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Linear quantile regression solved exactly as a linear program with a dense
/// tableau simplex (Bland's rule):
///
/// `min Σ q·u⁺ + (1−q)·u⁻  s.t.  X(β⁺ − β⁻) + u⁺ − u⁻ = y,  all ≥ 0`.
///
/// Returns `(β, mean pinball loss)`.
pub fn lp_quantile_regression(rows: &[Vec<f64>], y: &[f64], q: f64) -> (Vec<f64>, f64) {
    let n = rows.len();
    let p = rows[0].len();
    let n_vars = 2 * p + 2 * n;
    let cost: Vec<f64> = (0..n_vars)
        .map(|j| {
            if j < 2 * p {
                0.0
            } else if j < 2 * p + n {
                q
            } else {
                1.0 - q
            }
        })
        .collect();
    // rows flipped so the right-hand side is nonnegative
    let mut tab = vec![vec![0.0; n_vars + 1]; n];
    let mut basis = vec![0usize; n];
    for i in 0..n {
        let sign = if y[i] >= 0.0 { 1.0 } else { -1.0 };
        for j in 0..p {
            tab[i][j] = sign * rows[i][j];
            tab[i][p + j] = -sign * rows[i][j];
        }
        tab[i][2 * p + i] = sign;
        tab[i][2 * p + n + i] = -sign;
        tab[i][n_vars] = sign * y[i];
        basis[i] = if sign > 0.0 { 2 * p + i } else { 2 * p + n + i };
    }
    let eps = 1e-11;
    for _ in 0..100_000 {
        // reduced costs c_j − c_B · column_j
        let entering = (0..n_vars).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let z: f64 = (0..n).map(|i| cost[basis[i]] * tab[i][j]).sum();
            cost[j] - z < -eps
        });
        let Some(e) = entering else { break };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..n {
            if tab[i][e] > eps {
                let ratio = tab[i][n_vars] / tab[i][e];
                let better = ratio < best - 1e-12
                    || ((ratio - best).abs() <= 1e-12 && leave.is_some_and(|l| basis[i] < basis[l]));
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let r = leave.expect("quantile regression LP is bounded");
        let pivot = tab[r][e];
        for v in tab[r].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = tab[r].clone();
        for (i, row) in tab.iter_mut().enumerate() {
            if i != r && row[e] != 0.0 {
                let f = row[e];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        basis[r] = e;
    }
    let mut x = vec![0.0; n_vars];
    for i in 0..n {
        x[basis[i]] = tab[i][n_vars];
    }
    let beta: Vec<f64> = (0..p).map(|j| x[j] - x[p + j]).collect();
    let loss = rows
        .iter()
        .zip(y)
        .map(|(r, &t)| {
            let fit: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let u = t - fit;
            if u >= 0.0 {
                q * u
            } else {
                (q - 1.0) * u
            }
        })
        .sum::<f64>()
        / n as f64;
    (beta, loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_oracle_known_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-12);
        assert!((normal_quantile(0.9) - 1.2815515655446004).abs() < 1e-12);
        assert!((normal_cdf(-5.0) - 2.866515718791939e-7).abs() < 1e-18);
    }
}
