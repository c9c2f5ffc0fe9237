//! Patch-level activation kernels: the circuit-derived AF3-AF5, the
//! classical references AF1/AF2, and the hand-designed polynomial
//! activations F1-F3.
//!
//! Site parity is 1-based ("odd" sites are positions 1, 3, 5, ... of the
//! patch), matching the qubit numbering of the circuits. Patches are the
//! row-major flattening of the 3x3 convolution window. The encoded angle
//! for pixel value x is theta = pi * x.

use crate::error::{Error, Result};
use rand::Rng;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActivationKind {
    /// tanh(sum w_i x_i + b)
    Af1,
    /// tanh over odd-indexed sites only
    Af2,
    /// -prod over odd sites of cos(phi_i + theta_i); the QC 1 output
    Af3,
    /// prod over even sites of cos(phi_i + theta_i)
    Af4,
    /// prod over all sites of cos(phi_i + theta_i)
    Af5,
    /// prod_even (cos phi + cos theta) + prod_odd (sin phi + cos theta)
    F1,
    /// prod_even (cos phi + cos theta)
    F2,
    /// prod_all cos(phi) cos(theta)
    F3,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 8] = [
        ActivationKind::Af1,
        ActivationKind::Af2,
        ActivationKind::Af3,
        ActivationKind::Af4,
        ActivationKind::Af5,
        ActivationKind::F1,
        ActivationKind::F2,
        ActivationKind::F3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Af1 => "af1",
            ActivationKind::Af2 => "af2",
            ActivationKind::Af3 => "af3",
            ActivationKind::Af4 => "af4",
            ActivationKind::Af5 => "af5",
            ActivationKind::F1 => "f1",
            ActivationKind::F2 => "f2",
            ActivationKind::F3 => "f3",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name.to_ascii_lowercase())
            .ok_or_else(|| Error::Argument(format!("unknown activation kind '{name}'")))
    }

    /// Number of parameters for a kernel over `patch_len` sites.
    pub fn param_len(self, patch_len: usize) -> usize {
        match self {
            ActivationKind::Af1 => patch_len + 1,
            ActivationKind::Af2 => patch_len.div_ceil(2) + 1,
            _ => patch_len,
        }
    }

    /// Kinds whose parameters are rotation angles rather than weights.
    pub fn is_angular(self) -> bool {
        !matches!(self, ActivationKind::Af1 | ActivationKind::Af2)
    }
}

/// One patch-to-scalar activation with its trainable parameters.
///
/// Angles are stored unwrapped (no modular reduction) so trained values
/// near pi/2 remain inspectable.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationKernel {
    kind: ActivationKind,
    patch_len: usize,
    params: Vec<f64>,
}

/// Per-kernel trigonometric cache of the parameter angles, rebuilt after
/// every parameter update and shared across all patch positions.
#[derive(Clone, Debug)]
pub struct KernelTrig {
    cos_phi: Vec<f64>,
    sin_phi: Vec<f64>,
}

impl ActivationKernel {
    pub fn new(kind: ActivationKind, patch_len: usize, params: Vec<f64>) -> Result<Self> {
        let expected = kind.param_len(patch_len);
        if params.len() != expected {
            return Err(Error::Argument(format!(
                "{} over {patch_len} sites takes {expected} params, got {}",
                kind.name(),
                params.len()
            )));
        }
        Ok(Self {
            kind,
            patch_len,
            params,
        })
    }

    /// Seeded initialization: angles uniform on [-pi, pi); AF1/AF2
    /// weights Glorot-uniform with zero bias.
    pub fn init<R: Rng>(kind: ActivationKind, patch_len: usize, rng: &mut R) -> Self {
        let n = kind.param_len(patch_len);
        let params = if kind.is_angular() {
            (0..n).map(|_| rng.gen_range(-PI..PI)).collect()
        } else {
            let bound = (6.0 / (patch_len as f64 + 1.0)).sqrt();
            let mut p: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-bound..bound)).collect();
            p.push(0.0);
            p
        };
        Self {
            kind,
            patch_len,
            params,
        }
    }

    pub fn kind(&self) -> ActivationKind {
        self.kind
    }

    pub fn patch_len(&self) -> usize {
        self.patch_len
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn trig(&self) -> KernelTrig {
        if self.kind.is_angular() {
            KernelTrig {
                cos_phi: self.params.iter().map(|p| p.cos()).collect(),
                sin_phi: self.params.iter().map(|p| p.sin()).collect(),
            }
        } else {
            KernelTrig {
                cos_phi: Vec::new(),
                sin_phi: Vec::new(),
            }
        }
    }

    fn check_patch(&self, patch: &[f64]) -> Result<()> {
        if patch.len() != self.patch_len {
            return Err(Error::Argument(format!(
                "patch length {} does not match kernel patch_len {}",
                patch.len(),
                self.patch_len
            )));
        }
        Ok(())
    }

    /// Activation value on one patch of pixel values in [0, 1].
    pub fn eval(&self, patch: &[f64]) -> Result<f64> {
        self.check_patch(patch)?;
        let (cos_th, sin_th) = patch_trig(patch);
        Ok(self.eval_pre(&self.trig(), patch, &cos_th, &sin_th))
    }

    /// Partials with respect to each parameter, same layout as `params`.
    pub fn grad_params(&self, patch: &[f64]) -> Result<Vec<f64>> {
        self.check_patch(patch)?;
        let (cos_th, sin_th) = patch_trig(patch);
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_grad_pre(&self.trig(), patch, &cos_th, &sin_th, 1.0, &mut grad);
        Ok(grad)
    }

    /// Evaluate from precomputed per-pixel and per-parameter trig values.
    /// The convolution layer uses this path; it is bit-identical to
    /// [`ActivationKernel::eval`].
    pub fn eval_pre(&self, trig: &KernelTrig, x: &[f64], cos_th: &[f64], sin_th: &[f64]) -> f64 {
        let n = self.patch_len;
        match self.kind {
            ActivationKind::Af1 => {
                let z: f64 = (0..n).map(|i| self.params[i] * x[i]).sum::<f64>() + self.params[n];
                z.tanh()
            }
            ActivationKind::Af2 => {
                let k = n.div_ceil(2);
                let z: f64 = (0..k).map(|j| self.params[j] * x[2 * j]).sum::<f64>()
                    + self.params[k];
                z.tanh()
            }
            ActivationKind::Af3 => {
                let mut p = 1.0;
                for i in (0..n).step_by(2) {
                    p *= trig.cos_phi[i] * cos_th[i] - trig.sin_phi[i] * sin_th[i];
                }
                -p
            }
            ActivationKind::Af4 => {
                let mut p = 1.0;
                for i in (1..n).step_by(2) {
                    p *= trig.cos_phi[i] * cos_th[i] - trig.sin_phi[i] * sin_th[i];
                }
                p
            }
            ActivationKind::Af5 => {
                let mut p = 1.0;
                for i in 0..n {
                    p *= trig.cos_phi[i] * cos_th[i] - trig.sin_phi[i] * sin_th[i];
                }
                p
            }
            ActivationKind::F1 => {
                let mut even = 1.0;
                for i in (1..n).step_by(2) {
                    even *= trig.cos_phi[i] + cos_th[i];
                }
                let mut odd = 1.0;
                for i in (0..n).step_by(2) {
                    odd *= trig.sin_phi[i] + cos_th[i];
                }
                even + odd
            }
            ActivationKind::F2 => {
                let mut p = 1.0;
                for i in (1..n).step_by(2) {
                    p *= trig.cos_phi[i] + cos_th[i];
                }
                p
            }
            ActivationKind::F3 => {
                let mut p = 1.0;
                for i in 0..n {
                    p *= trig.cos_phi[i] * cos_th[i];
                }
                p
            }
        }
    }

    /// Add `scale` times the parameter gradient into `acc`.
    pub fn accumulate_grad_pre(
        &self,
        trig: &KernelTrig,
        x: &[f64],
        cos_th: &[f64],
        sin_th: &[f64],
        scale: f64,
        acc: &mut [f64],
    ) {
        let n = self.patch_len;
        match self.kind {
            ActivationKind::Af1 => {
                let z: f64 = (0..n).map(|i| self.params[i] * x[i]).sum::<f64>() + self.params[n];
                let g = scale * (1.0 - z.tanh().powi(2));
                for i in 0..n {
                    acc[i] += g * x[i];
                }
                acc[n] += g;
            }
            ActivationKind::Af2 => {
                let k = n.div_ceil(2);
                let z: f64 = (0..k).map(|j| self.params[j] * x[2 * j]).sum::<f64>()
                    + self.params[k];
                let g = scale * (1.0 - z.tanh().powi(2));
                for j in 0..k {
                    acc[j] += g * x[2 * j];
                }
                acc[k] += g;
            }
            ActivationKind::Af3 => {
                // d(-prod cos a)/dphi_j = sin(a_j) * prod_{i != j} cos(a_i)
                product_rule(
                    (0..n).step_by(2),
                    |i| trig.cos_phi[i] * cos_th[i] - trig.sin_phi[i] * sin_th[i],
                    |i| trig.sin_phi[i] * cos_th[i] + trig.cos_phi[i] * sin_th[i],
                    scale,
                    acc,
                );
            }
            ActivationKind::Af4 => {
                product_rule(
                    (1..n).step_by(2),
                    |i| trig.cos_phi[i] * cos_th[i] - trig.sin_phi[i] * sin_th[i],
                    |i| -(trig.sin_phi[i] * cos_th[i] + trig.cos_phi[i] * sin_th[i]),
                    scale,
                    acc,
                );
            }
            ActivationKind::Af5 => {
                product_rule(
                    0..n,
                    |i| trig.cos_phi[i] * cos_th[i] - trig.sin_phi[i] * sin_th[i],
                    |i| -(trig.sin_phi[i] * cos_th[i] + trig.cos_phi[i] * sin_th[i]),
                    scale,
                    acc,
                );
            }
            ActivationKind::F1 => {
                product_rule(
                    (1..n).step_by(2),
                    |i| trig.cos_phi[i] + cos_th[i],
                    |i| -trig.sin_phi[i],
                    scale,
                    acc,
                );
                product_rule(
                    (0..n).step_by(2),
                    |i| trig.sin_phi[i] + cos_th[i],
                    |i| trig.cos_phi[i],
                    scale,
                    acc,
                );
            }
            ActivationKind::F2 => {
                product_rule(
                    (1..n).step_by(2),
                    |i| trig.cos_phi[i] + cos_th[i],
                    |i| -trig.sin_phi[i],
                    scale,
                    acc,
                );
            }
            ActivationKind::F3 => {
                let theta_prod: f64 = cos_th.iter().product();
                product_rule(
                    0..n,
                    |i| trig.cos_phi[i],
                    |i| -trig.sin_phi[i] * theta_prod,
                    scale,
                    acc,
                );
            }
        }
    }
}

/// Per-pixel trig of the encoded angles theta_i = pi x_i.
pub fn patch_trig(patch: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (
        patch.iter().map(|&x| (PI * x).cos()).collect(),
        patch.iter().map(|&x| (PI * x).sin()).collect(),
    )
}

/// Accumulate d(prod factor_i)/d param_j = dfactor_j * prod_{i != j}
/// factor_i via leave-one-out prefix/suffix products.
fn product_rule<I, F, D>(sites: I, factor: F, dfactor: D, scale: f64, acc: &mut [f64])
where
    I: Iterator<Item = usize>,
    F: Fn(usize) -> f64,
    D: Fn(usize) -> f64,
{
    let idx: Vec<usize> = sites.collect();
    let k = idx.len();
    if k == 0 {
        return;
    }
    let mut prefix = vec![1.0; k + 1];
    for j in 0..k {
        prefix[j + 1] = prefix[j] * factor(idx[j]);
    }
    let mut suffix = vec![1.0; k + 1];
    for j in (0..k).rev() {
        suffix[j] = suffix[j + 1] * factor(idx[j]);
    }
    for j in 0..k {
        acc[idx[j]] += scale * dfactor(idx[j]) * prefix[j] * suffix[j + 1];
    }
}

/// Per-patch outputs over a ramp of edge patches; demonstrates the
/// edge-selective zero response of the cosine kernels.
pub fn edge_response_profile(kernel: &ActivationKernel, ramp: &[Vec<f64>]) -> Result<Vec<f64>> {
    ramp.iter().map(|patch| kernel.eval(patch)).collect()
}
