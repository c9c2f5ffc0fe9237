//! Analytic evaluators for the shallow-circuit outputs and the Chebyshev
//! machinery backing the polynomial-network units.
//!
//! Index parity is 1-based throughout: "odd" means positions 1, 3, 5, ...
//! Empty products evaluate to 1.

use crate::error::{Error, Result};

/// Combined angles alpha_i = theta_i + pi * x_i.
pub type AngleVector = [f64];

/// Closed form of the QC 1 output.
///
/// n odd:  -prod over odd i of cos(alpha_i)
/// n even: -cos(alpha_n) * prod over odd i <= n-3 of cos(alpha_i)
pub fn o_qc1_closed(alphas: &AngleVector) -> Result<f64> {
    let n = alphas.len();
    if n == 0 {
        return Err(Error::Argument("empty angle vector".into()));
    }
    let value = if n % 2 == 1 {
        -odd_cos_product(alphas, n)
    } else {
        -alphas[n - 1].cos() * odd_cos_product(alphas, n.saturating_sub(3))
    };
    Ok(value)
}

/// Product of cos(alpha_i) over odd 1-based i up to and including `upto`.
fn odd_cos_product(alphas: &AngleVector, upto: usize) -> f64 {
    let mut p = 1.0;
    let mut i = 1;
    while i <= upto {
        p *= alphas[i - 1].cos();
        i += 2;
    }
    p
}

/// Product of cos(alpha_i) over even 1-based i up to and including `upto`.
fn even_cos_product(alphas: &AngleVector, upto: usize) -> f64 {
    let mut p = 1.0;
    let mut i = 2;
    while i <= upto {
        p *= alphas[i - 1].cos();
        i += 2;
    }
    p
}

/// Closed form of the QC 2 output, as arbitrated against the statevector
/// oracle: for odd n the product of cos(alpha_i) over all odd indices, for
/// even n the product over all even indices, sign positive. The branch
/// expressions printed in the source derivation disagree with the oracle
/// for most n; see [`qc2_printed_branch`] and the discrepancy report.
pub fn o_qc2_closed(alphas: &AngleVector) -> Result<f64> {
    let n = alphas.len();
    if n < 3 {
        return Err(Error::Argument(format!("QC2 closed form needs n >= 3, got {n}")));
    }
    Ok(if n % 2 == 1 {
        odd_cos_product(alphas, n)
    } else {
        even_cos_product(alphas, n)
    })
}

/// One of the four published branch expressions for the QC 2 output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Qc2Branch {
    /// n = 4 + 4m: (prod i = n-2, n-6, ..., i > 4) cos a3 cos a1
    N4Plus4m,
    /// n = 6 + 4m: (prod i = n-2, n-6, ..., i > 6) cos a4 cos a2
    N6Plus4m,
    /// n = 3 + 4m: (prod i = n-2, n-6, ..., i > 5) cos a5 cos a2
    N3Plus4m,
    /// n = 5 + 4m: (prod i = n-2, n-6, ..., i > 5) cos a3 cos a1
    N5Plus4m,
}

impl Qc2Branch {
    pub fn for_n(n: usize) -> Self {
        match n % 4 {
            0 => Qc2Branch::N4Plus4m,
            2 => Qc2Branch::N6Plus4m,
            3 => Qc2Branch::N3Plus4m,
            _ => Qc2Branch::N5Plus4m,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Qc2Branch::N4Plus4m => "n=4+4m",
            Qc2Branch::N6Plus4m => "n=6+4m",
            Qc2Branch::N3Plus4m => "n=3+4m",
            Qc2Branch::N5Plus4m => "n=5+4m",
        }
    }

    fn bound_and_tail(self) -> (usize, [usize; 2]) {
        match self {
            Qc2Branch::N4Plus4m => (4, [3, 1]),
            Qc2Branch::N6Plus4m => (6, [4, 2]),
            Qc2Branch::N3Plus4m => (5, [5, 2]),
            Qc2Branch::N5Plus4m => (5, [3, 1]),
        }
    }
}

/// Literal evaluation of the published QC 2 branch expression for
/// n = |alphas|. Returns `None` when the branch references an angle index
/// beyond n (the published bounds break down at minimal n).
pub fn qc2_printed_branch(alphas: &AngleVector) -> Option<f64> {
    let n = alphas.len();
    if n < 3 {
        return None;
    }
    let branch = Qc2Branch::for_n(n);
    let (bound, tail) = branch.bound_and_tail();
    if tail.iter().any(|&i| i > n) {
        return None;
    }
    let mut p = 1.0;
    let mut i = n as i64 - 2;
    while i > bound as i64 {
        p *= alphas[i as usize - 1].cos();
        i -= 4;
    }
    Some(p * alphas[tail[0] - 1].cos() * alphas[tail[1] - 1].cos())
}

/// Chebyshev polynomial of the first kind, T_k(x), by the three-term
/// recurrence. Evaluates outside [-1, 1] as well (extrapolation).
pub fn chebyshev_t(k: usize, x: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, x);
    for _ in 1..k {
        let next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// T_0(x) .. T_k(x) in one pass.
pub fn chebyshev_t_all(k: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(1.0);
    if k == 0 {
        return out;
    }
    out.push(x);
    for i in 2..=k {
        out.push(2.0 * x * out[i - 1] - out[i - 2]);
    }
    out
}

/// Coefficients of a truncated Chebyshev expansion c_0 .. c_K.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevCoeffs {
    pub coeffs: Vec<f64>,
}

impl ChebyshevCoeffs {
    pub fn max_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = chebyshev_t_all(self.max_order(), x);
        self.coeffs.iter().zip(&t).map(|(c, t)| c * t).sum()
    }
}

/// Least-squares fit of sampled values onto T_0 .. T_K. Returns the
/// coefficients and the root-mean-square misfit.
pub fn chebyshev_project(samples: &[(f64, f64)], max_order: usize) -> Result<(ChebyshevCoeffs, f64)> {
    let m = samples.len();
    if m < max_order + 1 {
        return Err(Error::Argument(format!(
            "need at least {} samples for order {max_order}, got {m}",
            max_order + 1
        )));
    }
    let design = nalgebra::DMatrix::from_fn(m, max_order + 1, |r, c| {
        chebyshev_t(c, samples[r].0)
    });
    let rhs = nalgebra::DVector::from_fn(m, |r, _| samples[r].1);
    let svd = design.clone().svd(true, true);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * svd.singular_values[0])
        .count();
    if rank < max_order + 1 {
        return Err(Error::Numerical(format!(
            "rank-deficient design matrix: rank {rank} < {}",
            max_order + 1
        )));
    }
    let solution = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let residual_vec = design * &solution - rhs;
    let rms = (residual_vec.iter().map(|r| r * r).sum::<f64>() / m as f64).sqrt();
    Ok((
        ChebyshevCoeffs {
            coeffs: solution.iter().copied().collect(),
        },
        rms,
    ))
}

/// Chebyshev-Gauss abscissae x_j = cos(pi (j + 1/2) / m), j = 0..m-1.
pub fn chebyshev_nodes(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| (std::f64::consts::PI * (j as f64 + 0.5) / m as f64).cos())
        .collect()
}

/// Closed-form polynomial-network unit: sum over i of (-1)^i a_i^2 T_i(x).
pub fn qcpn_unit_eval(a: &[f64], x: f64) -> f64 {
    let t = chebyshev_t_all(a.len().saturating_sub(1), x);
    a.iter()
        .zip(&t)
        .enumerate()
        .map(|(i, (ai, ti))| sign(i) * ai * ai * ti)
        .sum()
}

/// Partials of [`qcpn_unit_eval`] with respect to each a_i:
/// 2 (-1)^i a_i T_i(x).
pub fn qcpn_unit_grad(a: &[f64], x: f64) -> Vec<f64> {
    let t = chebyshev_t_all(a.len().saturating_sub(1), x);
    a.iter()
        .zip(&t)
        .enumerate()
        .map(|(i, (ai, ti))| 2.0 * sign(i) * ai * ti)
        .collect()
}

/// Unit eval plus per-coefficient gradient from a precomputed T_i row.
pub fn qcpn_unit_eval_grad_pre(a: &[f64], t: &[f64]) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(a.len());
    for (i, (&ai, &ti)) in a.iter().zip(t).enumerate() {
        let s = sign(i);
        value += s * ai * ai * ti;
        grad.push(2.0 * s * ai * ti);
    }
    (value, grad)
}

fn sign(i: usize) -> f64 {
    if i % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::rng;
    use rand::Rng;
    use std::f64::consts::PI;

    #[test]
    fn qc1_closed_small_cases() {
        assert_eq!(o_qc1_closed(&[0.0, 0.0, 0.0]).unwrap(), -1.0);
        // Any odd-site angle at pi/2 kills the product.
        let mut alphas = [0.0; 9];
        alphas[0] = PI / 2.0;
        assert!(o_qc1_closed(&alphas).unwrap().abs() < 1e-15);
        assert!(o_qc1_closed(&[]).is_err());
    }

    #[test]
    fn qc1_even_branch_indices() {
        // n = 4: -cos a4 * cos a1 (odd product stops at n-3 = 1).
        let a = [0.3, 9.9, 9.9, 0.7];
        let expected = -(0.7f64).cos() * (0.3f64).cos();
        assert!((o_qc1_closed(&a).unwrap() - expected).abs() < 1e-15);
        // n = 2: empty odd product, just -cos a2.
        let a = [9.9, 0.4];
        assert!((o_qc1_closed(&a).unwrap() + (0.4f64).cos()).abs() < 1e-15);
    }

    #[test]
    fn qc2_closed_examples() {
        assert_eq!(o_qc2_closed(&[0.0; 4]).unwrap(), 1.0);
        let v = o_qc2_closed(&[0.0, PI, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
        assert!(o_qc2_closed(&[0.0; 2]).is_err());
    }

    #[test]
    fn printed_branch_inapplicable_at_n3() {
        // The n = 3+4m branch references alpha_5, impossible at n = 3.
        assert_eq!(qc2_printed_branch(&[0.1, 0.2, 0.3]), None);
        // n = 7 is valid for that branch: cos a5 cos a2.
        let a = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let expected = (0.5f64).cos() * (0.2f64).cos();
        assert!((qc2_printed_branch(&a).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_t_identities() {
        assert!((chebyshev_t(2, 0.5) + 0.5).abs() < 1e-15);
        for k in 0..20 {
            assert!((chebyshev_t(k, 1.0) - 1.0).abs() < 1e-12);
        }
        // T_n(cos t) = cos(n t)
        let x = (0.3f64).cos();
        assert!((chebyshev_t(7, x) - (2.1f64).cos()).abs() < 1e-12);
    }

    #[test]
    fn chebyshev_t_bounded_on_interval() {
        let mut r = rng(5);
        for _ in 0..200 {
            let x = r.gen_range(-1.0..=1.0);
            for k in 0..=64 {
                assert!(chebyshev_t(k, x).abs() <= 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn project_recovers_x_squared() {
        let samples: Vec<(f64, f64)> = chebyshev_nodes(20)
            .into_iter()
            .map(|x| (x, x * x))
            .collect();
        let (coeffs, residual) = chebyshev_project(&samples, 2).unwrap();
        assert!((coeffs.coeffs[0] - 0.5).abs() < 1e-12);
        assert!(coeffs.coeffs[1].abs() < 1e-12);
        assert!((coeffs.coeffs[2] - 0.5).abs() < 1e-12);
        assert!(residual < 1e-12);
    }

    #[test]
    fn project_rejects_duplicate_abscissae() {
        let samples = vec![(0.5, 1.0), (0.5, 1.0), (0.5, 1.0), (0.5, 1.0)];
        assert!(chebyshev_project(&samples, 2).is_err());
    }

    #[test]
    fn project_flags_nonpolynomial_target() {
        let samples: Vec<(f64, f64)> = chebyshev_nodes(50)
            .into_iter()
            .map(|x| (x, x.abs()))
            .collect();
        let (_, residual) = chebyshev_project(&samples, 2).unwrap();
        assert!(residual > 1e-3);
    }

    #[test]
    fn unit_eval_sign_structure() {
        let mut a = vec![0.0; 8];
        a[0] = 1.0;
        for &x in &[-0.9, 0.0, 0.4] {
            assert_eq!(qcpn_unit_eval(&a, x), 1.0);
        }
        a[0] = 0.0;
        a[1] = 1.0;
        assert!((qcpn_unit_eval(&a, 0.4) + 0.4).abs() < 1e-15);
        // Basis-vector coefficients give exactly (-1)^k T_k.
        for k in 0..8 {
            let mut a = vec![0.0; 8];
            a[k] = 1.0;
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(qcpn_unit_eval(&a, 0.3), s * chebyshev_t(k, 0.3));
        }
        // a = (1, 1, 1): 1 - x + x^2-ish; at x = 0, T_2 = -1 so total 0.
        assert!((qcpn_unit_eval(&[1.0, 1.0, 1.0], 0.0)).abs() < 1e-15);
    }

    #[test]
    fn unit_grad_matches_finite_differences() {
        let mut r = rng(11);
        for _ in 0..50 {
            let a: Vec<f64> = (0..7).map(|_| r.gen_range(-1.0..1.0)).collect();
            let x = r.gen_range(-1.0..1.0);
            let grad = qcpn_unit_grad(&a, x);
            for j in 0..a.len() {
                let h = 1e-6;
                let mut ap = a.clone();
                let mut am = a.clone();
                ap[j] += h;
                am[j] -= h;
                let fd = (qcpn_unit_eval(&ap, x) - qcpn_unit_eval(&am, x)) / (2.0 * h);
                let scale = grad[j].abs().max(fd.abs()).max(1e-3);
                assert!(
                    (grad[j] - fd).abs() / scale < 1e-6,
                    "j={j} grad={} fd={fd}",
                    grad[j]
                );
            }
        }
    }

    #[test]
    fn unit_grad_trivial_points() {
        let mut a = vec![0.0; 5];
        a[0] = 1.0;
        let g = qcpn_unit_grad(&a, 0.77);
        assert_eq!(g[0], 2.0);
        assert!(g[1..].iter().all(|&v| v == 0.0));
        assert!(qcpn_unit_grad(&[0.0; 5], 0.2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projection_reproduces_circuit_everywhere() {
        // Any circuit-backed output is a polynomial of degree at most
        // (n-1)(n-2), so its Chebyshev projection must reproduce it at
        // points not used in the fit.
        use crate::sim::{qcpn_theta_len, run_qcpn_circuit};
        let mut r = rng(23);
        for n in [3usize, 4] {
            let k = (n - 1) * (n - 2);
            let theta: Vec<f64> = (0..qcpn_theta_len(n))
                .map(|_| r.gen_range(-PI..PI))
                .collect();
            let samples: Vec<(f64, f64)> = chebyshev_nodes(k + 3)
                .iter()
                .map(|&x| (x, run_qcpn_circuit(x, &theta, n).unwrap()))
                .collect();
            let (coeffs, res) = chebyshev_project(&samples, k).unwrap();
            assert!(res < 1e-10, "n={n}: residual {res}");
            for _ in 0..50 {
                let x = r.gen_range(-1.0..1.0);
                let direct = run_qcpn_circuit(x, &theta, n).unwrap();
                assert!((coeffs.eval(x) - direct).abs() < 1e-8);
            }
        }
    }
}
