//! Dense row-major `f32` tensors and the handful of kernels the engine needs.
//!
//! Storage is 32-bit; reductions (matmul, softmax normalisation) accumulate in
//! 64-bit and round once on store.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch: {op} cannot combine shapes {left:?} and {right:?}")]
    Dimension { op: &'static str, left: Vec<usize>, right: Vec<usize> },
    #[error("shape {shape:?} describes {expected} elements but {actual} were supplied")]
    Length { shape: Vec<usize>, expected: usize, actual: usize },
    #[error("invalid shape {0:?}: every dimension must be positive")]
    InvalidShape(Vec<usize>),
    #[error("tensor is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self, NumericsError> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(NumericsError::InvalidShape(shape));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NumericsError::Length { shape, expected, actual: data.len() });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self, NumericsError> {
        let len = shape.iter().product();
        Self::new(shape, vec![0.0; len])
    }

    /// A `1×n` row vector.
    pub fn row(data: Vec<f32>) -> Result<Self, NumericsError> {
        Self::new(vec![1, data.len()], data)
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self, NumericsError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NumericsError::Dimension { op: "from_rows", left: vec![cols], right: vec![r.len()] });
            }
            data.extend_from_slice(r);
        }
        Self::new(vec![rows.len(), cols], data)
    }

    pub fn identity(n: usize) -> Result<Self, NumericsError> {
        let mut t = Self::zeros(vec![n, n])?;
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows and columns when viewed as a matrix; a rank-1 tensor is a single row.
    fn as_matrix(&self) -> Option<(usize, usize)> {
        match self.shape.as_slice() {
            [n] => Some((1, *n)),
            [m, n] => Some((*m, *n)),
            _ => None,
        }
    }

    fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, NumericsError> {
        if self.shape != other.shape {
            return Err(NumericsError::Dimension { op: "add", left: self.shape.clone(), right: other.shape.clone() });
        }
        Ok(Tensor { shape: self.shape.clone(), data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect() })
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, NumericsError> {
    let dims = a.as_matrix().zip(b.as_matrix());
    let ((m, k), (k2, n)) = match dims {
        Some(d) if d.0 .1 == d.1 .0 => d,
        _ => return Err(NumericsError::Dimension { op: "matmul", left: a.shape.clone(), right: b.shape.clone() }),
    };
    debug_assert_eq!(k, k2);
    let mut out = vec![0.0f32; m * n];
    let mut acc = vec![0.0f64; n];
    for i in 0..m {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for p in 0..k {
            let lhs = f64::from(a.data[i * k + p]);
            let row = &b.data[p * n..(p + 1) * n];
            for (slot, &rhs) in acc.iter_mut().zip(row) {
                *slot += lhs * f64::from(rhs);
            }
        }
        for (dst, &v) in out[i * n..(i + 1) * n].iter_mut().zip(&acc) {
            *dst = v as f32;
        }
    }
    Tensor::new(vec![m, n], out)
}

pub fn relu(t: &Tensor) -> Tensor {
    t.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn sigmoid(t: &Tensor) -> Tensor {
    t.map(|v| (1.0 / (1.0 + (-f64::from(v)).exp())) as f32)
}

/// Softmax over all elements, stabilised by subtracting the maximum.
pub fn softmax(t: &Tensor) -> Result<Tensor, NumericsError> {
    let max = t.data.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    if t.data.is_empty() {
        return Err(NumericsError::Empty);
    }
    let exps: Vec<f64> = t.data.iter().map(|&v| (f64::from(v) - f64::from(max)).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(Tensor { shape: t.shape.clone(), data: exps.iter().map(|e| (e / sum) as f32).collect() })
}

/// Index of the largest element; ties resolve to the lowest index.
pub fn argmax(t: &Tensor) -> Result<usize, NumericsError> {
    argmax_slice(&t.data).ok_or(NumericsError::Empty)
}

pub(crate) fn argmax_slice(values: &[f32]) -> Option<usize> {
    let mut best: Option<(usize, f32)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_tensor(rng: &mut SplitMix64, m: usize, n: usize) -> Tensor {
        let data = (0..m * n).map(|_| rng.uniform(-2.0, 2.0) as f32).collect();
        Tensor::new(vec![m, n], data).unwrap()
    }

    #[test]
    fn shape_must_match_data() {
        assert!(matches!(
            Tensor::new(vec![2, 3], vec![0.0; 5]),
            Err(NumericsError::Length { expected: 6, actual: 5, .. })
        ));
        assert!(Tensor::new(vec![0, 3], vec![]).is_err());
    }

    #[test]
    fn matmul_identity() {
        let a = Tensor::identity(2).unwrap();
        let b = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&a, &b).unwrap(), b);
    }

    #[test]
    fn matmul_row_by_column() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = Tensor::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), &[1, 1]);
        assert_eq!(c.data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Tensor::zeros(vec![2, 3]).unwrap();
        let b = Tensor::zeros(vec![2, 3]).unwrap();
        let err = matmul(&a, &b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("matmul"), "{msg}");
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..20 {
            let a = random_tensor(&mut rng, 5, 7);
            let b = random_tensor(&mut rng, 7, 3);
            let c = matmul(&a, &b).unwrap();
            for i in 0..5 {
                for j in 0..3 {
                    let mut s = 0.0f64;
                    for p in 0..7 {
                        s += a.data()[i * 7 + p] as f64 * b.data()[p * 3 + j] as f64;
                    }
                    let got = c.data()[i * 3 + j] as f64;
                    assert!((got - s).abs() <= 1e-6 * s.abs().max(1.0), "{got} vs {s}");
                }
            }
        }
    }

    #[test]
    fn matmul_is_bilinear() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..20 {
            let a = random_tensor(&mut rng, 3, 4);
            let b = random_tensor(&mut rng, 4, 2);
            let c = random_tensor(&mut rng, 4, 2);
            let lhs = matmul(&a, &b.add(&c).unwrap()).unwrap();
            let rhs = matmul(&a, &b).unwrap().add(&matmul(&a, &c).unwrap()).unwrap();
            for (x, y) in lhs.data().iter().zip(rhs.data()) {
                assert!((x - y).abs() <= 1e-5 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn relu_cases() {
        let t = Tensor::row(vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&t).data(), &[0.0, 0.0, 2.0]);
        let neg = Tensor::row(vec![-3.0, -0.5, -1e-30]).unwrap();
        assert!(relu(&neg).data().iter().all(|&v| v == 0.0));
        let mut rng = SplitMix64::new(3);
        let r = random_tensor(&mut rng, 4, 4);
        assert_eq!(relu(&relu(&r)), relu(&r));
    }

    #[test]
    fn softmax_cases() {
        let s = softmax(&Tensor::row(vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(s.data(), &[0.5, 0.5]);
        let s = softmax(&Tensor::row(vec![1000.0, 0.0]).unwrap()).unwrap();
        assert!((s.data()[0] - 1.0).abs() < 1e-6 && s.data()[1] < 1e-6);
        assert!(s.data().iter().all(|v| v.is_finite()));
        let mut rng = SplitMix64::new(9);
        for _ in 0..50 {
            let t = random_tensor(&mut rng, 1, 10);
            let s = softmax(&t).unwrap();
            let sum: f64 = s.data().iter().map(|&v| v as f64).sum();
            assert!((sum - 1.0).abs() <= 1e-6);
            assert!(s.data().iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn argmax_cases() {
        assert_eq!(argmax(&Tensor::row(vec![0.1, 0.9]).unwrap()).unwrap(), 1);
        assert_eq!(argmax(&Tensor::row(vec![0.5, 0.5]).unwrap()).unwrap(), 0);
        let mut rng = SplitMix64::new(21);
        for _ in 0..50 {
            let t = random_tensor(&mut rng, 1, 6);
            let mut best = 0;
            for i in 1..6 {
                if t.data()[i] > t.data()[best] {
                    best = i;
                }
            }
            assert_eq!(argmax(&t).unwrap(), best);
        }
    }

    #[test]
    fn ops_are_deterministic() {
        let mut rng = SplitMix64::new(1);
        let a = random_tensor(&mut rng, 6, 6);
        let b = random_tensor(&mut rng, 6, 6);
        let x = matmul(&a, &b).unwrap();
        let y = matmul(&a, &b).unwrap();
        assert!(x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
