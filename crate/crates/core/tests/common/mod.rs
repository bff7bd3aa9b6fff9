#![allow(dead_code)]

pub mod dense;

use pidperf::DiscreteTransferFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Response to `input` by running the difference equation directly.
pub fn filter(num: &[f64], den: &[f64], delay: usize, input: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; input.len()];
    for t in 0..input.len() {
        let mut acc = 0.0;
        for (i, b) in num.iter().enumerate() {
            if t >= delay + i {
                acc += b * input[t - delay - i];
            }
        }
        for (j, a) in den.iter().enumerate().skip(1) {
            if t >= j {
                acc -= a * y[t - j];
            }
        }
        y[t] = acc / den[0];
    }
    y
}

pub fn impulse(tf: &DiscreteTransferFunction, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    x[0] = 1.0;
    filter(tf.num(), tf.den(), tf.delay(), &x)
}

pub fn step(tf: &DiscreteTransferFunction, n: usize) -> Vec<f64> {
    filter(tf.num(), tf.den(), tf.delay(), &vec![1.0; n])
}

pub fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect()
}

/// Lower-triangular Toeplitz matrix with first column `c`.
pub fn toeplitz(c: &[f64]) -> Mat {
    let n = c.len();
    (0..n)
        .map(|i| (0..n).map(|j| if i >= j { c[i - j] } else { 0.0 }).collect())
        .collect()
}

/// Forward shift: ones on the first subdiagonal.
pub fn shift(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| f64::from(i == j + 1)).collect()).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let m = b[0].len();
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for k in 0..b.len() {
            let aik = a[i][k];
            for j in 0..m {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

pub fn matvec(a: &Mat, x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(p, q)| p + q).collect()).collect()
}

pub fn scale(a: &Mat, s: f64) -> Mat {
    a.iter().map(|r| r.iter().map(|v| v * s).collect()).collect()
}

/// Gaussian elimination with partial pivoting; `b` may have several columns.
pub fn solve(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut a = a.clone();
    let mut b = b.clone();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            for k in 0..b[row].len() {
                b[row][k] -= f * b[col][k];
            }
        }
    }
    let m = b[0].len();
    let mut x = vec![vec![0.0; m]; n];
    for row in (0..n).rev() {
        for k in 0..m {
            let mut acc = b[row][k];
            for j in row + 1..n {
                acc -= a[row][j] * x[j][k];
            }
            x[row][k] = acc / a[row][row];
        }
    }
    x
}

pub fn solve_vec(a: &Mat, b: &[f64]) -> Vec<f64> {
    let cols: Mat = b.iter().map(|v| vec![*v]).collect();
    solve(a, &cols).into_iter().map(|r| r[0]).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random stable first- or second-order model with the given delay.
pub fn random_stable(r: &mut ChaCha8Rng, delay: usize) -> DiscreteTransferFunction {
    let p1: f64 = r.random_range(-0.9..0.9);
    let den = if r.random_bool(0.5) {
        vec![1.0, -p1]
    } else {
        let p2: f64 = r.random_range(-0.9..0.9);
        vec![1.0, -(p1 + p2), p1 * p2]
    };
    let num = if r.random_bool(0.5) {
        vec![r.random_range(0.1..1.0)]
    } else {
        vec![r.random_range(0.1..1.0), r.random_range(-0.5..0.5)]
    };
    DiscreteTransferFunction::new(num, den, delay).unwrap()
}
