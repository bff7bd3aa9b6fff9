//! Discrete-time LTI models in the backward-shift operator and the
//! truncated power-series algebra used by the variance computations.
//!
//! A lower-triangular Toeplitz matrix is fully described by its first
//! column, so every operator that shows up in the closed-loop algebra is
//! stored as a plain coefficient vector. Matrix products become truncated
//! convolutions and inverses become forward substitutions.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rational transfer function `q^-d * B(q^-1) / A(q^-1)`.
///
/// Coefficients are in ascending powers of `q^-1`. The denominator is
/// normalized on construction so that `a0 == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
    delay: usize,
}

impl DiscreteTransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>, delay: usize) -> Result<Self> {
        if num.is_empty() {
            return Err(Error::InvalidModel("numerator is empty".into()));
        }
        if den.is_empty() {
            return Err(Error::InvalidModel("denominator is empty".into()));
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("coefficients must be finite".into()));
        }
        let a0 = den[0];
        if a0 == 0.0 {
            return Err(Error::InvalidModel(
                "leading denominator coefficient is zero".into(),
            ));
        }
        let num = num.into_iter().map(|b| b / a0).collect();
        let den = den.into_iter().map(|a| a / a0).collect();
        Ok(Self { num, den, delay })
    }

    /// Pure gain `c` with no dynamics.
    pub fn gain(c: f64) -> Result<Self> {
        Self::new(vec![c], vec![1.0], 0)
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    /// Same model with a different dead time.
    pub fn with_delay(&self, delay: usize) -> Self {
        Self {
            delay,
            ..self.clone()
        }
    }

    /// Series connection `self * other`.
    pub fn series(&self, other: &Self) -> Self {
        Self {
            num: poly_mul(&self.num, &other.num),
            den: poly_mul(&self.den, &other.den),
            delay: self.delay + other.delay,
        }
    }

    /// Steady-state gain `B(1)/A(1)`; infinite for integrating models.
    pub fn dc_gain(&self) -> f64 {
        let b: f64 = self.num.iter().sum();
        let a: f64 = self.den.iter().sum();
        b / a
    }

    /// First `n + 1` impulse-response coefficients `g(0..=n)`.
    pub fn impulse_response(&self, n: usize) -> ImpulseSeq {
        let len = n + 1;
        let mut g = vec![0.0; len];
        for k in self.delay..len {
            let j = k - self.delay;
            let mut acc = self.num.get(j).copied().unwrap_or(0.0);
            for (i, a) in self.den.iter().enumerate().skip(1) {
                if i > j {
                    break;
                }
                acc -= a * g[k - i];
            }
            g[k] = acc;
        }
        ImpulseSeq {
            coeffs: g,
            kind: SeqKind::Impulse,
        }
    }

    /// First `n + 1` step-response coefficients (running sum of the
    /// impulse response).
    pub fn step_response(&self, n: usize) -> ImpulseSeq {
        let mut s = self.impulse_response(n).coeffs;
        for k in 1..s.len() {
            s[k] += s[k - 1];
        }
        ImpulseSeq {
            coeffs: s,
            kind: SeqKind::Step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqKind {
    Impulse,
    Step,
}

/// Finite response sequence; also the first column of a lower-triangular
/// Toeplitz operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseSeq {
    coeffs: Vec<f64>,
    kind: SeqKind,
}

impl ImpulseSeq {
    pub fn new(coeffs: Vec<f64>, kind: SeqKind) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidSequence("sequence must be non-empty".into()));
        }
        Ok(Self { coeffs, kind })
    }

    pub fn impulse(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs, SeqKind::Impulse)
    }

    /// The unit element `[1, 0, ..., 0]` of length `len`.
    pub fn identity(len: usize) -> Self {
        let mut coeffs = vec![0.0; len.max(1)];
        coeffs[0] = 1.0;
        Self {
            coeffs,
            kind: SeqKind::Impulse,
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn kind(&self) -> SeqKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `Σ c(k)²`
    pub fn energy(&self) -> f64 {
        dot(&self.coeffs, &self.coeffs)
    }

    /// Keep the first `len` coefficients, zero-padding if needed.
    pub fn truncated(&self, len: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(len.max(1), 0.0);
        Self {
            coeffs,
            kind: self.kind,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Truncated convolution, i.e. the product of two lower-triangular
/// Toeplitz matrices read off as a first column.
pub fn series_mul(a: &ImpulseSeq, b: &ImpulseSeq) -> Result<ImpulseSeq> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(ImpulseSeq {
        coeffs: conv_trunc(&a.coeffs, &b.coeffs),
        kind: SeqKind::Impulse,
    })
}

/// Solve `denom * x = rhs` in the truncated series algebra by forward
/// substitution. `denom` must have a unit leading coefficient.
pub fn series_solve(denom: &ImpulseSeq, rhs: &ImpulseSeq) -> Result<ImpulseSeq> {
    if denom.len() != rhs.len() {
        return Err(Error::LengthMismatch {
            left: denom.len(),
            right: rhs.len(),
        });
    }
    if denom.coeffs[0] != 1.0 {
        return Err(Error::NotUnitLeading(denom.coeffs[0]));
    }
    Ok(ImpulseSeq {
        coeffs: solve_unit(&denom.coeffs, &rhs.coeffs),
        kind: SeqKind::Impulse,
    })
}

// Slice kernels shared by the variance modules. Callers guarantee equal
// lengths and, for `solve_unit`, a unit leading coefficient.

pub(crate) fn conv_trunc(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (ck, bj) in c[i..].iter_mut().zip(b) {
            *ck += ai * bj;
        }
    }
    c
}

pub(crate) fn solve_unit(denom: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let first = denom.iter().skip(1).position(|&v| v != 0.0).map_or(n, |i| i + 1);
    let mut x = rhs.to_vec();
    for k in first..n {
        let mut acc = x[k];
        for i in first..=k {
            acc -= denom[i] * x[k - i];
        }
        x[k] = acc;
    }
    x
}

pub(crate) fn shift(a: &[f64], by: usize) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    if by < n {
        out[by..].copy_from_slice(&a[..n - by]);
    }
    out
}

/// Full polynomial product in `q^-1`.
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut c = vec![0.0; a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            c[i + j] += ai * bj;
        }
    }
    c
}

/// `a + q^-shift * b`
pub fn poly_add_shifted(a: &[f64], b: &[f64], shift: usize) -> Vec<f64> {
    let mut c = a.to_vec();
    c.resize(a.len().max(b.len() + shift), 0.0);
    for (i, bi) in b.iter().enumerate() {
        c[i + shift] += bi;
    }
    c
}

/// Whether every root of `a0 + a1 z^-1 + ... + an z^-n` lies strictly
/// inside the unit circle (Schur-Cohn step-down).
/// Objective value for a non-stabilizing candidate with truncated cost
/// `cost`: above any stable candidate, and still ordered by `cost` so an
/// optimizer started in the unstable region can find its way out.
pub fn unstable_score(cost: f64) -> f64 {
    1e100 * (1.0 + cost)
}

pub fn is_schur_stable(poly: &[f64]) -> bool {
    let mut a: Vec<f64> = poly.to_vec();
    while a.len() > 1 && a[a.len() - 1] == 0.0 {
        a.pop();
    }
    if a.is_empty() || a[0] == 0.0 || !a.iter().all(|v| v.is_finite()) {
        return false;
    }
    while a.len() > 1 {
        let n = a.len() - 1;
        let r = a[n] / a[0];
        if !(r.abs() < 1.0) {
            return false;
        }
        a = (0..n).map(|i| a[i] - r * a[n - i]).collect();
    }
    true
}

/// Streaming difference-equation realization of a transfer function.
///
/// `step(x)` consumes the input sample `x(t)` and returns `y(t)`.
#[derive(Debug, Clone)]
pub struct LtiFilter {
    num: Vec<f64>,
    den: Vec<f64>,
    delay: usize,
    // most recent first
    inputs: VecDeque<f64>,
    outputs: VecDeque<f64>,
}

impl LtiFilter {
    pub fn new(tf: &DiscreteTransferFunction) -> Self {
        let in_len = tf.delay + tf.num.len();
        let out_len = tf.den.len() - 1;
        Self {
            num: tf.num.clone(),
            den: tf.den.clone(),
            delay: tf.delay,
            inputs: VecDeque::from(vec![0.0; in_len]),
            outputs: VecDeque::from(vec![0.0; out_len]),
        }
    }

    pub fn step(&mut self, x: f64) -> f64 {
        self.inputs.pop_back();
        self.inputs.push_front(x);
        let mut y = 0.0;
        for (b, u) in self.num.iter().zip(self.inputs.iter().skip(self.delay)) {
            y += b * u;
        }
        for (a, yp) in self.den.iter().skip(1).zip(self.outputs.iter()) {
            y -= a * yp;
        }
        if !self.outputs.is_empty() {
            self.outputs.pop_back();
            self.outputs.push_front(y);
        }
        y
    }

    pub fn reset(&mut self) {
        self.inputs.iter_mut().for_each(|v| *v = 0.0);
        self.outputs.iter_mut().for_each(|v| *v = 0.0);
    }
}
