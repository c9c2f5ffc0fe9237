//! Chebyshev-polynomial network models: trainable closed-form units,
//! their weighted/product combinations over one or more inputs, a
//! three-layer tanh baseline for comparison, and the special-function
//! regression targets (Bessel J0/J1, Legendre P5/P6).

use crate::closedform::{chebyshev_t_all, qcpn_unit_eval, qcpn_unit_eval_grad_pre};
use crate::error::{Error, Result};
use crate::nn::{Adam, EpochRecord, TrainReport};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// Largest |x| at which the ascending Bessel series below is validated.
pub const BESSEL_MAX_ABS: f64 = 12.0;

fn bessel_j(nu: u32, x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > BESSEL_MAX_ABS {
        return Err(Error::Domain(format!(
            "Bessel series validated only for |x| <= {BESSEL_MAX_ABS}, got {x}"
        )));
    }
    // Ascending power series: J_nu(x) = sum_k (-1)^k (x/2)^(2k+nu) / (k! (k+nu)!).
    // 40 terms keep the truncation error far below 1e-12 for |x| <= 12.
    let half = x / 2.0;
    let mut term = half.powi(nu as i32);
    for k in 1..=nu as usize {
        term /= k as f64;
    }
    let mut sum = term;
    for k in 1..=40usize {
        term *= -(half * half) / (k as f64 * (k as f64 + nu as f64));
        sum += term;
    }
    Ok(sum)
}

pub fn bessel_j0(x: f64) -> Result<f64> {
    bessel_j(0, x)
}

pub fn bessel_j1(x: f64) -> Result<f64> {
    bessel_j(1, x)
}

/// Legendre polynomial of order 5, closed form.
pub fn legendre_p5(x: f64) -> f64 {
    let x2 = x * x;
    x * (15.0 + x2 * (-70.0 + 63.0 * x2)) / 8.0
}

/// Legendre polynomial of order 6, closed form.
pub fn legendre_p6(x: f64) -> f64 {
    let x2 = x * x;
    (-5.0 + x2 * (105.0 + x2 * (-315.0 + 231.0 * x2))) / 16.0
}

/// Named scalar target evaluation.
pub fn special_fn(name: &str, x: f64) -> Result<f64> {
    match name.to_ascii_lowercase().as_str() {
        "j0" => bessel_j0(x),
        "j1" => bessel_j1(x),
        "p5" => Ok(legendre_p5(x)),
        "p6" => Ok(legendre_p6(x)),
        other => Err(Error::Argument(format!(
            "unknown special function {other:?} (expected j0, j1, p5, p6)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Regression targets and datasets
// ---------------------------------------------------------------------------

/// Regression targets: the four scalar functions plus their two-input
/// composites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    J0,
    J1,
    P5,
    P6,
    /// z = J0(x1 + x2)
    J0Sum,
    /// z = J1(x1 + x2)
    J1Sum,
    /// z = P5(x1 * x2)
    P5Prod,
    /// z = P6(x1 * x2)
    P6Prod,
}

impl Target {
    pub const ALL: [Target; 8] = [
        Target::J0,
        Target::J1,
        Target::P5,
        Target::P6,
        Target::J0Sum,
        Target::J1Sum,
        Target::P5Prod,
        Target::P6Prod,
    ];

    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "j0" => Target::J0,
            "j1" => Target::J1,
            "p5" => Target::P5,
            "p6" => Target::P6,
            "j0sum" => Target::J0Sum,
            "j1sum" => Target::J1Sum,
            "p5prod" => Target::P5Prod,
            "p6prod" => Target::P6Prod,
            other => {
                return Err(Error::Argument(format!(
                    "unknown target {other:?} (expected j0, j1, p5, p6, j0sum, j1sum, p5prod, p6prod)"
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Target::J0 => "j0",
            Target::J1 => "j1",
            Target::P5 => "p5",
            Target::P6 => "p6",
            Target::J0Sum => "j0sum",
            Target::J1Sum => "j1sum",
            Target::P5Prod => "p5prod",
            Target::P6Prod => "p6prod",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Target::J0 | Target::J1 | Target::P5 | Target::P6 => 1,
            _ => 2,
        }
    }

    /// Per-dimension sampling interval. Composite J targets draw each
    /// coordinate from [0, 5] so the sum covers the same [0, 10] range the
    /// one-dimensional runs use.
    pub fn default_domain(&self) -> (f64, f64) {
        match self {
            Target::J0 | Target::J1 => (0.0, 10.0),
            Target::P5 | Target::P6 | Target::P5Prod | Target::P6Prod => (-1.0, 1.0),
            Target::J0Sum | Target::J1Sum => (0.0, 5.0),
        }
    }

    /// Ground-truth value at raw (unrescaled) inputs.
    pub fn eval(&self, raw: &[f64]) -> Result<f64> {
        if raw.len() != self.input_dim() {
            return Err(Error::Argument(format!(
                "target {} takes {} inputs, got {}",
                self.name(),
                self.input_dim(),
                raw.len()
            )));
        }
        match self {
            Target::J0 => bessel_j0(raw[0]),
            Target::J1 => bessel_j1(raw[0]),
            Target::P5 => Ok(legendre_p5(raw[0])),
            Target::P6 => Ok(legendre_p6(raw[0])),
            Target::J0Sum => bessel_j0(raw[0] + raw[1]),
            Target::J1Sum => bessel_j1(raw[0] + raw[1]),
            Target::P5Prod => Ok(legendre_p5(raw[0] * raw[1])),
            Target::P6Prod => Ok(legendre_p6(raw[0] * raw[1])),
        }
    }
}

/// Affine map sending [lo, hi] onto [-1, 1]; endpoints map exactly.
pub fn rescale_to_unit(lo: f64, hi: f64, x: f64) -> f64 {
    2.0 * (x - lo) / (hi - lo) - 1.0
}

/// A regression split: raw inputs, the same inputs rescaled per dimension
/// into [-1, 1], and target values. Rows are samples.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSet {
    pub dim: usize,
    /// [n x dim], row-major, rescaled into [-1, 1].
    pub x: Vec<f64>,
    /// [n x dim], row-major, in the original domain.
    pub x_raw: Vec<f64>,
    pub y: Vec<f64>,
}

impl RegressionSet {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn input_raw(&self, i: usize) -> &[f64] {
        &self.x_raw[i * self.dim..(i + 1) * self.dim]
    }
}

/// Seeded uniform sampling of a target over `domain` (applied to every
/// input dimension), split into disjoint train/test sets.
pub fn gen_dataset(
    target: Target,
    n_train: usize,
    n_test: usize,
    domain: (f64, f64),
    seed: u64,
) -> Result<(RegressionSet, RegressionSet)> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::Argument("n_train and n_test must be positive".into()));
    }
    let (lo, hi) = domain;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Argument(format!("bad domain [{lo}, {hi}]")));
    }
    let dim = target.input_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |n: usize| -> Result<RegressionSet> {
        let mut x_raw = Vec::with_capacity(n * dim);
        let mut x = Vec::with_capacity(n * dim);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..dim).map(|_| rng.gen_range(lo..=hi)).collect();
            y.push(target.eval(&row)?);
            for &v in &row {
                x.push(rescale_to_unit(lo, hi, v));
            }
            x_raw.extend_from_slice(&row);
        }
        Ok(RegressionSet { dim, x, x_raw, y })
    };
    Ok((make(n_train)?, make(n_test)?))
}

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

/// Single-input combination of closed-form units: y = sum_i w_i O_i(x) + b.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevBank {
    /// One coefficient vector (length K+1) per unit.
    pub units: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub b: f64,
}

fn check_unit_input(x: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "unit input {x} outside [-1, 1]; rescale first"
        )));
    }
    Ok(())
}

pub fn bank_forward(bank: &ChebyshevBank, x: f64) -> Result<f64> {
    check_unit_input(x)?;
    if bank.units.len() != bank.w.len() {
        return Err(Error::Size(format!(
            "{} units but {} weights",
            bank.units.len(),
            bank.w.len()
        )));
    }
    Ok(bank
        .units
        .iter()
        .zip(&bank.w)
        .map(|(a, w)| w * qcpn_unit_eval(a, x))
        .sum::<f64>()
        + bank.b)
}

/// Multi-input model: y = sum_t w_t * prod_j O_{t,j}(x_j) + b, with one
/// unit per (term, input-dimension) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridQcpn {
    pub input_dim: usize,
    pub order: usize,
    /// [term][dimension] -> coefficient vector of length order+1.
    pub units: Vec<Vec<Vec<f64>>>,
    pub w: Vec<f64>,
    pub b: f64,
}

impl HybridQcpn {
    /// Seeded initialization: a ~ U(-0.5, 0.5), w ~ U(-1, 1), b = 0.
    pub fn new(input_dim: usize, order: usize, terms: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || terms == 0 {
            return Err(Error::Argument("need at least one input and one term".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let units = (0..terms)
            .map(|_| {
                (0..input_dim)
                    .map(|_| (0..=order).map(|_| rng.gen_range(-0.5..0.5)).collect())
                    .collect()
            })
            .collect();
        let w = (0..terms).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Ok(Self {
            input_dim,
            order,
            units,
            w,
            b: 0.0,
        })
    }

    pub fn terms(&self) -> usize {
        self.w.len()
    }

    fn param_count(&self) -> usize {
        self.terms() * self.input_dim * (self.order + 1)
    }

    fn flat_units(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for term in &self.units {
            for unit in term {
                out.extend_from_slice(unit);
            }
        }
        out
    }

    fn set_flat_units(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for term in self.units.iter_mut() {
            for unit in term.iter_mut() {
                for v in unit.iter_mut() {
                    *v = *it.next().unwrap();
                }
            }
        }
    }
}

impl From<ChebyshevBank> for HybridQcpn {
    fn from(bank: ChebyshevBank) -> Self {
        let order = bank.units.first().map_or(0, |u| u.len().saturating_sub(1));
        HybridQcpn {
            input_dim: 1,
            order,
            units: bank.units.into_iter().map(|u| vec![u]).collect(),
            w: bank.w,
            b: bank.b,
        }
    }
}

pub fn hybrid_forward(model: &HybridQcpn, x: &[f64]) -> Result<f64> {
    if x.len() != model.input_dim {
        return Err(Error::Argument(format!(
            "model expects {} inputs, got {}",
            model.input_dim,
            x.len()
        )));
    }
    for &v in x {
        check_unit_input(v)?;
    }
    let t_rows: Vec<Vec<f64>> = x.iter().map(|&v| chebyshev_t_all(model.order, v)).collect();
    Ok(hybrid_forward_pre(model, &t_rows))
}

fn unit_val(a: &[f64], t: &[f64]) -> f64 {
    let mut v = 0.0;
    let mut s = 1.0;
    for (ai, ti) in a.iter().zip(t) {
        v += s * ai * ai * ti;
        s = -s;
    }
    v
}

fn hybrid_forward_pre(model: &HybridQcpn, t_rows: &[Vec<f64>]) -> f64 {
    let mut y = model.b;
    for (term, w) in model.units.iter().zip(&model.w) {
        let mut prod = 1.0;
        for (j, a) in term.iter().enumerate() {
            prod *= unit_val(a, &t_rows[j]);
        }
        y += w * prod;
    }
    y
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct QcpnTrainOptions {
    pub epochs: usize,
    /// 0 means full-batch.
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for QcpnTrainOptions {
    fn default() -> Self {
        Self {
            epochs: 3000,
            batch_size: 0,
            lr: 0.02,
            seed: 0,
        }
    }
}

/// Fraction of predictions within this absolute error counts as "accuracy"
/// in the shared metrics CSV.
pub const REGRESSION_ACC_TOL: f64 = 0.01;

struct PrecomputedRows {
    /// [sample][dim] -> T_0..T_K row.
    rows: Vec<Vec<Vec<f64>>>,
}

fn precompute_rows(set: &RegressionSet, order: usize) -> Result<PrecomputedRows> {
    for &v in &set.x {
        check_unit_input(v)?;
    }
    let rows = (0..set.len())
        .map(|i| {
            set.input(i)
                .iter()
                .map(|&v| chebyshev_t_all(order, v))
                .collect()
        })
        .collect();
    Ok(PrecomputedRows { rows })
}

pub struct QcpnGradients {
    /// Flattened (term, dimension, coefficient) order.
    pub units: Vec<f64>,
    pub w: Vec<f64>,
    pub b: f64,
}

/// Mean-squared-error loss and exact gradients over the given sample
/// indices.
pub fn qcpn_loss_grads(
    model: &HybridQcpn,
    set: &RegressionSet,
    idx: &[usize],
) -> Result<(f64, QcpnGradients)> {
    if set.dim != model.input_dim {
        return Err(Error::Argument(format!(
            "dataset dim {} vs model dim {}",
            set.dim, model.input_dim
        )));
    }
    if idx.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let pre = precompute_rows_subset(set, model.order, idx)?;
    Ok(qcpn_loss_grads_pre(model, set, idx, &pre))
}

fn precompute_rows_subset(
    set: &RegressionSet,
    order: usize,
    idx: &[usize],
) -> Result<Vec<Vec<Vec<f64>>>> {
    idx.iter()
        .map(|&i| {
            set.input(i)
                .iter()
                .map(|&v| {
                    check_unit_input(v)?;
                    Ok(chebyshev_t_all(order, v))
                })
                .collect()
        })
        .collect()
}

fn qcpn_loss_grads_pre(
    model: &HybridQcpn,
    set: &RegressionSet,
    idx: &[usize],
    rows: &[Vec<Vec<f64>>],
) -> (f64, QcpnGradients) {
    let terms = model.terms();
    let kp1 = model.order + 1;
    let dim = model.input_dim;
    let n = idx.len() as f64;

    // Fixed-size chunks with an ordered sequential reduction keep the
    // result bitwise identical across thread counts and the sequential
    // build.
    let chunk = 256;
    let n_chunks = idx.len().div_ceil(chunk);
    let partials: Vec<(f64, QcpnGradients)> = par_range!(0..n_chunks)
        .map(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(idx.len());
            let mut loss = 0.0;
            let mut g = QcpnGradients {
                units: vec![0.0; model.param_count()],
                w: vec![0.0; terms],
                b: 0.0,
            };
            let mut vals = vec![0.0; dim];
            for s in lo..hi {
                let t_rows = &rows[s];
                let target = set.y[idx[s]];
                // Forward with cached per-dimension values and gradients.
                let mut pred = model.b;
                let mut term_prods = Vec::with_capacity(terms);
                let mut term_vals: Vec<Vec<f64>> = Vec::with_capacity(terms);
                for (term, w) in model.units.iter().zip(&model.w) {
                    let mut prod = 1.0;
                    for j in 0..dim {
                        let v = unit_val(&term[j], &t_rows[j]);
                        vals[j] = v;
                        prod *= v;
                    }
                    pred += w * prod;
                    term_prods.push(prod);
                    term_vals.push(vals.clone());
                }
                let err = 2.0 * (pred - target) / n;
                loss += (pred - target) * (pred - target);
                g.b += err;
                for (t, (term, w)) in model.units.iter().zip(&model.w).enumerate() {
                    g.w[t] += err * term_prods[t];
                    for j in 0..dim {
                        let mut loo = 1.0;
                        for (jj, &v) in term_vals[t].iter().enumerate() {
                            if jj != j {
                                loo *= v;
                            }
                        }
                        let scale = err * w * loo;
                        if scale == 0.0 {
                            continue;
                        }
                        let base = t * dim * kp1 + j * kp1;
                        let (v, gr) = qcpn_unit_eval_grad_pre(&term[j], &t_rows[j]);
                        let _ = v;
                        for i in 0..kp1 {
                            g.units[base + i] += scale * gr[i];
                        }
                    }
                }
            }
            (loss, g)
        })
        .collect();

    let mut loss = 0.0;
    let mut total = QcpnGradients {
        units: vec![0.0; model.param_count()],
        w: vec![0.0; terms],
        b: 0.0,
    };
    for (l, g) in partials {
        loss += l;
        total.b += g.b;
        for (a, b) in total.w.iter_mut().zip(&g.w) {
            *a += b;
        }
        for (a, b) in total.units.iter_mut().zip(&g.units) {
            *a += b;
        }
    }
    (loss / n, total)
}

/// Mean squared error and tolerance-accuracy over a full split.
pub fn qcpn_evaluate(model: &HybridQcpn, set: &RegressionSet) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::Argument("empty evaluation set".into()));
    }
    let pre = precompute_rows(set, model.order)?;
    let mut mse = 0.0;
    let mut hits = 0usize;
    for i in 0..set.len() {
        let pred = hybrid_forward_pre(model, &pre.rows[i]);
        let e = pred - set.y[i];
        mse += e * e;
        if e.abs() <= REGRESSION_ACC_TOL {
            hits += 1;
        }
    }
    Ok((mse / set.len() as f64, hits as f64 / set.len() as f64))
}

/// Seeded MSE training of a hybrid model with Adam.
pub fn train_qcpn(
    model: &mut HybridQcpn,
    train: &RegressionSet,
    test: &RegressionSet,
    opts: QcpnTrainOptions,
) -> Result<TrainReport> {
    if train.dim != model.input_dim || test.dim != model.input_dim {
        return Err(Error::Argument("dataset/model dimension mismatch".into()));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Argument("empty dataset".into()));
    }
    let pre_train = precompute_rows(train, model.order)?;
    let pre_test = precompute_rows(test, model.order)?;
    let mut opt = Adam::new(&[model.param_count(), model.terms(), 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = TrainReport::default();
    let all: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=opts.epochs {
        let batches: Vec<Vec<usize>> = if opts.batch_size == 0 {
            vec![all.clone()]
        } else {
            let mut order = all.clone();
            order.shuffle(&mut rng);
            order.chunks(opts.batch_size).map(|c| c.to_vec()).collect()
        };
        for batch in &batches {
            let rows: Vec<Vec<Vec<f64>>> =
                batch.iter().map(|&i| pre_train.rows[i].clone()).collect();
            let (loss, grads) = {
                let (l, g) = qcpn_loss_grads_pre(model, train, batch, &rows);
                (l, g)
            };
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss {loss}")));
            }
            let mut flat = model.flat_units();
            let mut w = std::mem::take(&mut model.w);
            let mut b = [model.b];
            opt.step(
                opts.lr,
                &mut [&mut flat, &mut w, &mut b],
                &[&grads.units, &grads.w, &[grads.b]],
            );
            model.set_flat_units(&flat);
            model.w = w;
            model.b = b[0];
        }
        let (train_mse, train_acc) = {
            let mut mse = 0.0;
            let mut hits = 0usize;
            for i in 0..train.len() {
                let e = hybrid_forward_pre(model, &pre_train.rows[i]) - train.y[i];
                mse += e * e;
                if e.abs() <= REGRESSION_ACC_TOL {
                    hits += 1;
                }
            }
            (mse / train.len() as f64, hits as f64 / train.len() as f64)
        };
        let (test_mse, test_acc) = {
            let mut mse = 0.0;
            let mut hits = 0usize;
            for i in 0..test.len() {
                let e = hybrid_forward_pre(model, &pre_test.rows[i]) - test.y[i];
                mse += e * e;
                if e.abs() <= REGRESSION_ACC_TOL {
                    hits += 1;
                }
            }
            (mse / test.len() as f64, hits as f64 / test.len() as f64)
        };
        report.records.push(EpochRecord {
            epoch,
            train_loss: train_mse,
            train_acc,
            test_loss: test_mse,
            test_acc,
        });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Baseline network
// ---------------------------------------------------------------------------

/// Three-layer network: input -> H tanh units -> scalar linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineNn {
    pub input_dim: usize,
    pub hidden: usize,
    /// [input_dim x hidden], row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl BaselineNn {
    pub fn new(input_dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::Argument("zero-sized baseline layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound1 = (6.0 / (input_dim + hidden) as f64).sqrt();
        let bound2 = (6.0 / (hidden + 1) as f64).sqrt();
        Ok(Self {
            input_dim,
            hidden,
            w1: (0..input_dim * hidden)
                .map(|_| rng.gen_range(-bound1..bound1))
                .collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.gen_range(-bound2..bound2)).collect(),
            b2: 0.0,
        })
    }
}

pub fn baseline_forward(model: &BaselineNn, x: &[f64]) -> Result<f64> {
    if x.len() != model.input_dim {
        return Err(Error::Argument(format!(
            "baseline expects {} inputs, got {}",
            model.input_dim,
            x.len()
        )));
    }
    let mut y = model.b2;
    for h in 0..model.hidden {
        let mut z = model.b1[h];
        for (j, &v) in x.iter().enumerate() {
            z += v * model.w1[j * model.hidden + h];
        }
        y += z.tanh() * model.w2[h];
    }
    Ok(y)
}

struct BaselineGrads {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

fn baseline_loss_grads(
    model: &BaselineNn,
    set: &RegressionSet,
    idx: &[usize],
) -> Result<(f64, BaselineGrads)> {
    if set.dim != model.input_dim {
        return Err(Error::Argument("dataset/model dimension mismatch".into()));
    }
    let h = model.hidden;
    let mut g = BaselineGrads {
        w1: vec![0.0; model.w1.len()],
        b1: vec![0.0; h],
        w2: vec![0.0; h],
        b2: 0.0,
    };
    let n = idx.len() as f64;
    let mut loss = 0.0;
    let mut act = vec![0.0; h];
    for &i in idx {
        let x = set.input(i);
        let mut pred = model.b2;
        for k in 0..h {
            let mut z = model.b1[k];
            for (j, &v) in x.iter().enumerate() {
                z += v * model.w1[j * h + k];
            }
            act[k] = z.tanh();
            pred += act[k] * model.w2[k];
        }
        let e = pred - set.y[i];
        loss += e * e;
        let err = 2.0 * e / n;
        g.b2 += err;
        for k in 0..h {
            g.w2[k] += err * act[k];
            let dz = err * model.w2[k] * (1.0 - act[k] * act[k]);
            g.b1[k] += dz;
            for (j, &v) in x.iter().enumerate() {
                g.w1[j * h + k] += dz * v;
            }
        }
    }
    Ok((loss / n, g))
}

pub fn baseline_evaluate(model: &BaselineNn, set: &RegressionSet) -> Result<(f64, f64)> {
    if set.is_empty() {
        return Err(Error::Argument("empty evaluation set".into()));
    }
    let mut mse = 0.0;
    let mut hits = 0usize;
    for i in 0..set.len() {
        let e = baseline_forward(model, set.input(i))? - set.y[i];
        mse += e * e;
        if e.abs() <= REGRESSION_ACC_TOL {
            hits += 1;
        }
    }
    Ok((mse / set.len() as f64, hits as f64 / set.len() as f64))
}

/// Same optimizer, loss, and loop shape as `train_qcpn`, for matched-budget
/// comparisons.
pub fn train_baseline(
    model: &mut BaselineNn,
    train: &RegressionSet,
    test: &RegressionSet,
    opts: QcpnTrainOptions,
) -> Result<TrainReport> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::Argument("empty dataset".into()));
    }
    let mut opt = Adam::new(&[model.w1.len(), model.b1.len(), model.w2.len(), 1]);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = TrainReport::default();
    let all: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=opts.epochs {
        let batches: Vec<Vec<usize>> = if opts.batch_size == 0 {
            vec![all.clone()]
        } else {
            let mut order = all.clone();
            order.shuffle(&mut rng);
            order.chunks(opts.batch_size).map(|c| c.to_vec()).collect()
        };
        for batch in &batches {
            let (loss, g) = baseline_loss_grads(model, train, batch)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss {loss}")));
            }
            let mut b2 = [model.b2];
            opt.step(
                opts.lr,
                &mut [&mut model.w1, &mut model.b1, &mut model.w2, &mut b2],
                &[&g.w1, &g.b1, &g.w2, &[g.b2]],
            );
            model.b2 = b2[0];
        }
        let (train_mse, train_acc) = baseline_evaluate(model, train)?;
        let (test_mse, test_acc) = baseline_evaluate(model, test)?;
        report.records.push(EpochRecord {
            epoch,
            train_loss: train_mse,
            train_acc,
            test_loss: test_mse,
            test_acc,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::qcpn_unit_eval;
    use crate::testutil::rng;

    #[test]
    fn bessel_reference_values() {
        assert_eq!(bessel_j0(0.0).unwrap(), 1.0);
        assert_eq!(bessel_j1(0.0).unwrap(), 0.0);
        // First zero of J0.
        assert!(bessel_j0(2.404825557695773).unwrap().abs() < 1e-10);
        // Tabulated values.
        assert!((bessel_j0(1.0).unwrap() - 0.7651976865579666).abs() < 1e-12);
        assert!((bessel_j1(1.0).unwrap() - 0.44005058574493355).abs() < 1e-12);
        assert!((bessel_j0(10.0).unwrap() - (-0.24593576445134835)).abs() < 1e-12);
        assert!((bessel_j1(10.0).unwrap() - 0.04347274616886141).abs() < 1e-12);
        assert!(bessel_j0(12.5).is_err());
        assert!(bessel_j1(-13.0).is_err());
    }

    #[test]
    fn legendre_reference_values() {
        assert_eq!(legendre_p5(1.0), 1.0);
        assert_eq!(legendre_p6(1.0), 1.0);
        assert_eq!(legendre_p5(0.0), 0.0);
        assert!((legendre_p6(0.0) - (-5.0 / 16.0)).abs() < 1e-15);
        // Odd/even symmetry.
        let mut r = rng(1);
        for _ in 0..20 {
            let x: f64 = r.gen_range(-1.0..1.0);
            assert!((legendre_p5(-x) + legendre_p5(x)).abs() < 1e-14);
            assert!((legendre_p6(-x) - legendre_p6(x)).abs() < 1e-14);
        }
        assert!(special_fn("p5", 0.3).is_ok());
        assert!(special_fn("nope", 0.3).is_err());
    }

    #[test]
    fn rescale_endpoints_exact() {
        assert_eq!(rescale_to_unit(0.0, 10.0, 0.0), -1.0);
        assert_eq!(rescale_to_unit(0.0, 10.0, 10.0), 1.0);
        assert_eq!(rescale_to_unit(-3.5, 7.25, -3.5), -1.0);
        assert_eq!(rescale_to_unit(-3.5, 7.25, 7.25), 1.0);
    }

    #[test]
    fn gen_dataset_contracts() {
        let (tr, te) = gen_dataset(Target::J0, 50, 20, (0.0, 10.0), 9).unwrap();
        assert_eq!(tr.len(), 50);
        assert_eq!(te.len(), 20);
        for i in 0..tr.len() {
            let raw = tr.input_raw(i)[0];
            assert!((0.0..=10.0).contains(&raw));
            assert!((tr.y[i] - bessel_j0(raw).unwrap()).abs() < 1e-15);
            assert!(tr.input(i)[0].abs() <= 1.0);
        }
        // Determinism.
        let (tr2, _) = gen_dataset(Target::J0, 50, 20, (0.0, 10.0), 9).unwrap();
        assert_eq!(tr, tr2);

        // Composite target.
        let (tr, _) = gen_dataset(Target::P5Prod, 30, 10, (-1.0, 1.0), 3).unwrap();
        assert_eq!(tr.dim, 2);
        for i in 0..tr.len() {
            let r = tr.input_raw(i);
            assert!((tr.y[i] - legendre_p5(r[0] * r[1])).abs() < 1e-15);
        }
        assert!((Target::P5Prod.eval(&[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);

        assert!(gen_dataset(Target::J0, 0, 5, (0.0, 1.0), 0).is_err());
        assert!(gen_dataset(Target::J0, 5, 5, (1.0, 1.0), 0).is_err());
    }

    #[test]
    fn bank_forward_examples() {
        let mut a = vec![0.0; 13];
        a[0] = 1.0;
        let bank = ChebyshevBank {
            units: vec![a],
            w: vec![2.0],
            b: 1.0,
        };
        for x in [-1.0, -0.3, 0.0, 0.9] {
            assert!((bank_forward(&bank, x).unwrap() - 3.0).abs() < 1e-15);
        }

        let zero_w = ChebyshevBank {
            units: vec![vec![0.5; 4], vec![0.1; 4]],
            w: vec![0.0, 0.0],
            b: -2.5,
        };
        assert_eq!(bank_forward(&zero_w, 0.4).unwrap(), -2.5);

        let mut r = rng(2);
        let units: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..6).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        let w: Vec<f64> = (0..2).map(|_| r.gen_range(-1.0..1.0)).collect();
        let bank = ChebyshevBank {
            units: units.clone(),
            w: w.clone(),
            b: 0.7,
        };
        let x = 0.31;
        let hand = w[0] * qcpn_unit_eval(&units[0], x) + w[1] * qcpn_unit_eval(&units[1], x) + 0.7;
        assert!((bank_forward(&bank, x).unwrap() - hand).abs() < 1e-14);

        assert!(bank_forward(&bank, 1.2).is_err());
    }

    #[test]
    fn hybrid_forward_matches_bank_for_one_input() {
        let mut r = rng(3);
        let model = HybridQcpn::new(1, 5, 3, 11).unwrap();
        let bank = ChebyshevBank {
            units: model.units.iter().map(|t| t[0].clone()).collect(),
            w: model.w.clone(),
            b: model.b,
        };
        for _ in 0..10 {
            let x = r.gen_range(-1.0..1.0);
            assert!(
                (hybrid_forward(&model, &[x]).unwrap() - bank_forward(&bank, x).unwrap()).abs()
                    < 1e-15
            );
        }
        assert!(hybrid_forward(&model, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn hybrid_zero_unit_term_contributes_nothing() {
        let mut model = HybridQcpn::new(2, 4, 2, 5).unwrap();
        // Zero out one unit in term 0: the whole term must vanish.
        model.units[0][1].iter_mut().for_each(|v| *v = 0.0);
        let mut only_second = model.clone();
        only_second.w[0] = 0.0;
        let mut r = rng(6);
        for _ in 0..10 {
            let x = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
            let a = hybrid_forward(&model, &x).unwrap();
            let b = hybrid_forward(&only_second, &x).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hybrid_separable_exactness() {
        // g(x1) = T0 - T1 (coeffs a = (1, 1)); h(x2) = T0 + T2 via
        // a = (1, 0, 1) => T0 + T2? sign is (-1)^2 = +1 for i=2, so yes.
        let g = vec![1.0, 1.0, 0.0];
        let h = vec![1.0, 0.0, 1.0];
        let model = HybridQcpn {
            input_dim: 2,
            order: 2,
            units: vec![vec![g.clone(), h.clone()]],
            w: vec![1.0],
            b: 0.0,
        };
        let mut r = rng(7);
        for _ in 0..25 {
            let x1: f64 = r.gen_range(-1.0..1.0);
            let x2: f64 = r.gen_range(-1.0..1.0);
            let want = (1.0 - x1) * (1.0 + (2.0 * x2 * x2 - 1.0));
            let got = hybrid_forward(&model, &[x1, x2]).unwrap();
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn qcpn_gradients_match_finite_differences() {
        let (train, _) = gen_dataset(Target::P5Prod, 12, 4, (-1.0, 1.0), 13).unwrap();
        let model = HybridQcpn::new(2, 4, 3, 17).unwrap();
        let idx: Vec<usize> = (0..train.len()).collect();
        let (_, g) = qcpn_loss_grads(&model, &train, &idx).unwrap();
        let h = 1e-6;
        let loss_of = |m: &HybridQcpn| qcpn_loss_grads(m, &train, &idx).unwrap().0;

        // Unit coefficients.
        let kp1 = model.order + 1;
        for (t, j, i) in [(0, 0, 0), (1, 1, 2), (2, 0, 4)] {
            let mut mp = model.clone();
            mp.units[t][j][i] += h;
            let mut mm = model.clone();
            mm.units[t][j][i] -= h;
            let fd = (loss_of(&mp) - loss_of(&mm)) / (2.0 * h);
            let an = g.units[(t * 2 + j) * kp1 + i];
            let scale = fd.abs().max(an.abs()).max(1e-6);
            assert!((fd - an).abs() / scale < 1e-5, "unit ({t},{j},{i}): {an} vs {fd}");
        }
        // Weights and bias.
        for t in 0..3 {
            let mut mp = model.clone();
            mp.w[t] += h;
            let mut mm = model.clone();
            mm.w[t] -= h;
            let fd = (loss_of(&mp) - loss_of(&mm)) / (2.0 * h);
            let scale = fd.abs().max(g.w[t].abs()).max(1e-6);
            assert!((fd - g.w[t]).abs() / scale < 1e-5);
        }
        let mut mp = model.clone();
        mp.b += h;
        let mut mm = model.clone();
        mm.b -= h;
        let fd = (loss_of(&mp) - loss_of(&mm)) / (2.0 * h);
        assert!((fd - g.b).abs() / fd.abs().max(1e-6) < 1e-5);
    }

    #[test]
    fn train_linear_target_exactly_representable() {
        // y = 1 - x is a single unit with a0 = a1 = 1, w = 1.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut r = rng(19);
        for _ in 0..64 {
            let x: f64 = r.gen_range(-1.0..1.0);
            xs.push(x);
            ys.push(1.0 - x);
        }
        let train = RegressionSet {
            dim: 1,
            x: xs.clone(),
            x_raw: xs,
            y: ys,
        };
        let test = train.clone();
        let mut model = HybridQcpn::new(1, 3, 2, 23).unwrap();
        let opts = QcpnTrainOptions {
            epochs: 2000,
            batch_size: 0,
            lr: 0.05,
            seed: 0,
        };
        let report = train_qcpn(&mut model, &train, &test, opts).unwrap();
        let last = report.records.last().unwrap();
        assert!(last.train_loss < 1e-10, "train MSE {}", last.train_loss);
    }

    #[test]
    fn train_zero_lr_leaves_model_unchanged() {
        let (train, test) = gen_dataset(Target::P5, 32, 8, (-1.0, 1.0), 29).unwrap();
        let mut model = HybridQcpn::new(1, 6, 2, 31).unwrap();
        let before = model.clone();
        let opts = QcpnTrainOptions {
            epochs: 3,
            batch_size: 0,
            lr: 0.0,
            seed: 0,
        };
        train_qcpn(&mut model, &train, &test, opts).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn train_determinism_under_seed() {
        let (train, test) = gen_dataset(Target::P6, 64, 16, (-1.0, 1.0), 37).unwrap();
        let run = || {
            let mut model = HybridQcpn::new(1, 6, 2, 41).unwrap();
            let opts = QcpnTrainOptions {
                epochs: 20,
                batch_size: 16,
                lr: 0.01,
                seed: 43,
            };
            (train_qcpn(&mut model, &train, &test, opts).unwrap(), model)
        };
        let (r1, m1) = run();
        let (r2, m2) = run();
        assert_eq!(r1, r2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn baseline_constant_and_forward() {
        let mut model = BaselineNn::new(1, 1, 47).unwrap();
        model.w1.iter_mut().for_each(|v| *v = 0.0);
        model.w2.iter_mut().for_each(|v| *v = 0.0);
        model.b2 = 4.5;
        for x in [-1.0, 0.0, 0.8] {
            assert_eq!(baseline_forward(&model, &[x]).unwrap(), 4.5);
        }
        assert!(baseline_forward(&model, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn baseline_gradients_match_finite_differences() {
        let (train, _) = gen_dataset(Target::P5, 16, 4, (-1.0, 1.0), 53).unwrap();
        let model = BaselineNn::new(1, 4, 59).unwrap();
        let idx: Vec<usize> = (0..train.len()).collect();
        let (_, g) = baseline_loss_grads(&model, &train, &idx).unwrap();
        let h = 1e-6;
        let loss_of = |m: &BaselineNn| baseline_loss_grads(m, &train, &idx).unwrap().0;
        for k in 0..4 {
            let mut mp = model.clone();
            mp.w1[k] += h;
            let mut mm = model.clone();
            mm.w1[k] -= h;
            let fd = (loss_of(&mp) - loss_of(&mm)) / (2.0 * h);
            assert!((fd - g.w1[k]).abs() / fd.abs().max(1e-6) < 1e-5);
            let mut mp = model.clone();
            mp.w2[k] += h;
            let mut mm = model.clone();
            mm.w2[k] -= h;
            let fd = (loss_of(&mp) - loss_of(&mm)) / (2.0 * h);
            assert!((fd - g.w2[k]).abs() / fd.abs().max(1e-6) < 1e-5);
        }
    }

    #[test]
    fn baseline_learns_linear_target() {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut r = rng(61);
        for _ in 0..64 {
            let x: f64 = r.gen_range(-1.0..1.0);
            xs.push(x);
            ys.push(x);
        }
        let train = RegressionSet {
            dim: 1,
            x: xs.clone(),
            x_raw: xs,
            y: ys,
        };
        let test = train.clone();
        let mut model = BaselineNn::new(1, 16, 67).unwrap();
        // Decaying step-size schedule: constant-rate Adam orbits the
        // minimum at ~1e-7 MSE, so each stage restarts at a tenth the rate.
        let mut last = f64::INFINITY;
        for lr in [1e-2, 1e-3, 1e-4, 1e-5] {
            let opts = QcpnTrainOptions {
                epochs: 50000,
                batch_size: 0,
                lr,
                seed: 0,
            };
            let report = train_baseline(&mut model, &train, &test, opts).unwrap();
            last = report.records.last().unwrap().train_loss;
        }
        assert!(last < 1e-8, "train MSE {last}");
    }
}
