//! Oracle-equivalence suites: closed forms against the statevector
//! simulator, the appendix recursion and conjugation identities, and the
//! QC2 printed-branch discrepancy report.

use crate::closedform::{o_qc1_closed, o_qc2_closed, qc2_printed_branch, Qc2Branch};
use crate::error::Result;
use crate::sim::{run_qc1, run_qc2, Statevector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Outcome of one verification suite.
#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub n_range: (usize, usize),
    pub draws: usize,
    pub max_dev: f64,
    pub tol: f64,
}

impl SuiteResult {
    pub fn pass(&self) -> bool {
        self.max_dev <= self.tol
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub qc1_max_n: usize,
    pub qc2_max_n: usize,
    pub recursion_max_n: usize,
    pub equivalence_draws: usize,
    pub recursion_draws: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            qc1_max_n: 12,
            qc2_max_n: 12,
            recursion_max_n: 10,
            equivalence_draws: 100,
            recursion_draws: 50,
            tol: 1e-10,
            seed: 0,
        }
    }
}

fn random_angles(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
    let theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-PI..PI)).collect();
    let alphas: Vec<f64> = x
        .iter()
        .zip(&theta)
        .map(|(xi, ti)| ti + PI * xi)
        .collect();
    (x, theta, alphas)
}

/// Closed form vs. oracle for QC1, n = 1..=max_n.
pub fn qc1_equivalence(max_n: usize, draws: usize, tol: f64, seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev: f64 = 0.0;
    for n in 1..=max_n {
        for _ in 0..draws {
            let (x, theta, alphas) = random_angles(&mut rng, n);
            let oracle = run_qc1(&x, &theta)?;
            let closed = o_qc1_closed(&alphas)?;
            max_dev = max_dev.max((oracle - closed).abs());
        }
    }
    Ok(SuiteResult {
        name: "qc1-closed-form",
        n_range: (1, max_n),
        draws,
        max_dev,
        tol,
    })
}

/// Closed form vs. oracle for QC2, n = 3..=max_n.
pub fn qc2_equivalence(max_n: usize, draws: usize, tol: f64, seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev: f64 = 0.0;
    for n in 3..=max_n {
        for _ in 0..draws {
            let (x, theta, alphas) = random_angles(&mut rng, n);
            let oracle = run_qc2(&x, &theta)?;
            let closed = o_qc2_closed(&alphas)?;
            max_dev = max_dev.max((oracle - closed).abs());
        }
    }
    Ok(SuiteResult {
        name: "qc2-closed-form",
        n_range: (3, max_n),
        draws,
        max_dev,
        tol,
    })
}

/// The QC1-entangling construction used by the appendix recursion: one
/// Ry(omega_i) per qubit, then CX(1,2), CX(3,4), ... followed by
/// CX(2,3), CX(4,5), ...; returns the all-qubit Z expectation.
fn entangled_expect_z(omegas: &[f64]) -> Result<f64> {
    let n = omegas.len();
    let mut state = Statevector::zero(n)?;
    for (q, &w) in omegas.iter().enumerate() {
        state.apply_ry(q + 1, w)?;
    }
    let mut c = 1;
    while c + 1 <= n {
        state.apply_cnot(c, c + 1)?;
        c += 2;
    }
    let mut c = 2;
    while c + 1 <= n {
        state.apply_cnot(c, c + 1)?;
        c += 2;
    }
    let all: Vec<usize> = (1..=n).collect();
    state.expect_z(&all)
}

/// Appendix recursion: the n-qubit all-Z expectation equals
/// (p1^2 - q1^2) times the same expectation of the construction rebuilt on
/// qubits 3..n, where (p1, q1) are qubit 1's pre-entanglement amplitudes
/// (cos(omega_1 / 2), sin(omega_1 / 2)).
pub fn prop1_recursion(max_n: usize, draws: usize, tol: f64, seed: u64) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev: f64 = 0.0;
    for n in 3..=max_n {
        for _ in 0..draws {
            let omegas: Vec<f64> = (0..n).map(|_| rng.gen_range(-PI..PI)).collect();
            let lhs = entangled_expect_z(&omegas)?;
            let (p1, q1) = ((omegas[0] / 2.0).cos(), (omegas[0] / 2.0).sin());
            let rhs = (p1 * p1 - q1 * q1) * entangled_expect_z(&omegas[2..])?;
            max_dev = max_dev.max((lhs - rhs).abs());
        }
    }
    Ok(SuiteResult {
        name: "prop1-recursion",
        n_range: (3, max_n),
        draws,
        max_dev,
        tol,
    })
}

/// Conjugation identity: <Psi| X_3 Z^(n-2) X_3 |Psi> = -<Psi| Z^(n-2) |Psi>
/// with the Z string over qubits 3..n, for random Ry-layer states.
pub fn conjugation_identity(
    max_n: usize,
    draws: usize,
    tol: f64,
    seed: u64,
) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev: f64 = 0.0;
    for n in 3..=max_n {
        let mask: Vec<usize> = (3..=n).collect();
        for _ in 0..draws {
            let mut state = Statevector::zero(n)?;
            // Two Ry layers with an entangling chain between them, so the
            // states exercised are not merely products.
            for q in 1..=n {
                state.apply_ry(q, rng.gen_range(-PI..PI))?;
            }
            for c in 1..n {
                state.apply_cnot(c, c + 1)?;
            }
            for q in 1..=n {
                state.apply_ry(q, rng.gen_range(-PI..PI))?;
            }
            let plain = state.expect_z(&mask)?;
            let mut conj = state.clone();
            conj.apply_x(3)?;
            let flipped = conj.expect_z(&mask)?;
            max_dev = max_dev.max((flipped + plain).abs());
        }
    }
    Ok(SuiteResult {
        name: "x3-conjugation",
        n_range: (3, max_n),
        draws,
        max_dev,
        tol,
    })
}

/// One row of the QC2 printed-branch discrepancy report.
#[derive(Clone, Debug)]
pub struct Qc2DiscrepancyRow {
    pub n: usize,
    pub branch: &'static str,
    /// None when the printed branch references an angle index beyond n.
    pub max_dev: Option<f64>,
}

/// Compare the published QC2 branch expressions against the oracle over
/// random draws; the report is emitted by the CLI as CSV.
pub fn qc2_discrepancy_report(
    max_n: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<Qc2DiscrepancyRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for n in 3..=max_n {
        let branch = Qc2Branch::for_n(n).label();
        let mut max_dev: Option<f64> = None;
        for _ in 0..draws {
            let (x, theta, alphas) = random_angles(&mut rng, n);
            match qc2_printed_branch(&alphas) {
                Some(printed) => {
                    let oracle = run_qc2(&x, &theta)?;
                    let dev = (printed - oracle).abs();
                    max_dev = Some(max_dev.map_or(dev, |m: f64| m.max(dev)));
                }
                None => {
                    max_dev = None;
                    break;
                }
            }
        }
        rows.push(Qc2DiscrepancyRow { n, branch, max_dev });
    }
    Ok(rows)
}

pub fn discrepancy_csv(rows: &[Qc2DiscrepancyRow]) -> String {
    let mut out = String::from("n,branch,status,max_deviation\n");
    for r in rows {
        match r.max_dev {
            Some(d) => out.push_str(&format!("{},{},evaluated,{}\n", r.n, r.branch, d)),
            None => out.push_str(&format!("{},{},inapplicable,\n", r.n, r.branch)),
        }
    }
    out
}

/// Run every suite with shared options.
pub fn run_all(opts: &VerifyOptions) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        qc1_equivalence(opts.qc1_max_n, opts.equivalence_draws, opts.tol, opts.seed)?,
        qc2_equivalence(opts.qc2_max_n, opts.equivalence_draws, opts.tol, opts.seed + 1)?,
        prop1_recursion(
            opts.recursion_max_n,
            opts.recursion_draws,
            opts.tol,
            opts.seed + 2,
        )?,
        conjugation_identity(
            opts.recursion_max_n,
            opts.recursion_draws,
            opts.tol.min(1e-12),
            opts.seed + 3,
        )?,
    ])
}
