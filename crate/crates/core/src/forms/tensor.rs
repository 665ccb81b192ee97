use crate::error::{Error, Result};

/// Largest supported degree and dimension of an [`AlternatingTensor`].
pub const MAX_TENSOR_RANK: usize = 3;

/// An alternating multilinear form on a `dim`-dimensional space, stored as
/// its full array of components `ω_{i_1..i_q} = ω(e_{i_1}, .., e_{i_q})`.
///
/// The wedge product uses the determinant convention, so for covectors
/// `(α ∧ β)(u, v) = α(u) β(v) - α(v) β(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlternatingTensor {
    dim: usize,
    degree: usize,
    components: Vec<f64>,
}

fn check_rank(dim: usize, degree: usize) -> Result<()> {
    if dim > MAX_TENSOR_RANK || degree > MAX_TENSOR_RANK {
        return Err(Error::UnsupportedDegree { degree, dim });
    }
    Ok(())
}

/// Multi-index of flat position `pos`, most significant slot first.
fn multi_index(mut pos: usize, dim: usize, degree: usize, out: &mut [usize]) {
    for slot in (0..degree).rev() {
        out[slot] = pos % dim;
        pos /= dim;
    }
}

fn flat_index(idx: &[usize], dim: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * dim + i)
}

impl AlternatingTensor {
    pub fn zero(dim: usize, degree: usize) -> Result<Self> {
        check_rank(dim, degree)?;
        Ok(Self {
            dim,
            degree,
            components: vec![0.0; dim.pow(degree as u32)],
        })
    }

    /// Degree-0 tensor.
    pub fn scalar(dim: usize, value: f64) -> Result<Self> {
        check_rank(dim, 0)?;
        Ok(Self {
            dim,
            degree: 0,
            components: vec![value],
        })
    }

    pub fn from_covector(components: Vec<f64>) -> Result<Self> {
        check_rank(components.len(), 1)?;
        Ok(Self {
            dim: components.len(),
            degree: 1,
            components,
        })
    }

    /// Components from `f(i_1, .., i_q)`; `f` must be alternating.
    pub fn from_fn(dim: usize, degree: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        Self::try_from_fn(dim, degree, |idx| Ok(f(idx)))
    }

    pub fn try_from_fn(dim: usize, degree: usize, mut f: impl FnMut(&[usize]) -> Result<f64>) -> Result<Self> {
        let mut t = Self::zero(dim, degree)?;
        let mut idx = [0usize; MAX_TENSOR_RANK];
        for pos in 0..t.components.len() {
            multi_index(pos, dim, degree, &mut idx[..degree]);
            t.components[pos] = f(&idx[..degree])?;
        }
        Ok(t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn component(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.degree, "component index length");
        self.components[flat_index(idx, self.dim)]
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    /// `ω(v_1, .., v_q)` for vectors given in the same coordinates.
    pub fn evaluate(&self, vectors: &[&[f64]]) -> Result<f64> {
        if vectors.len() != self.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                got: vectors.len(),
            });
        }
        for v in vectors {
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    what: "tensor argument",
                    expected: self.dim,
                    got: v.len(),
                });
            }
        }
        let mut idx = [0usize; MAX_TENSOR_RANK];
        let mut total = 0.0;
        for (pos, &c) in self.components.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            multi_index(pos, self.dim, self.degree, &mut idx[..self.degree]);
            let mut term = c;
            for (slot, v) in vectors.iter().enumerate() {
                term *= v[idx[slot]];
            }
            total += term;
        }
        Ok(total)
    }

    /// `α ∧ β` summed over `(p, q)`-shuffles with their signs.
    pub fn wedge(&self, other: &AlternatingTensor) -> Result<AlternatingTensor> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                what: "wedge operands",
                expected: self.dim,
                got: other.dim,
            });
        }
        let (p, q) = (self.degree, other.degree);
        let shuffles = shuffles(p, q);
        AlternatingTensor::from_fn(self.dim, p + q, |idx| {
            let mut acc = 0.0;
            let mut left = [0usize; MAX_TENSOR_RANK];
            let mut right = [0usize; MAX_TENSOR_RANK];
            for (sign, take) in &shuffles {
                let (mut a, mut b) = (0, 0);
                for (slot, &i) in idx.iter().enumerate() {
                    if take[slot] {
                        left[a] = i;
                        a += 1;
                    } else {
                        right[b] = i;
                        b += 1;
                    }
                }
                acc += sign * self.component(&left[..p]) * other.component(&right[..q]);
            }
            acc
        })
    }

    pub fn scaled(&self, alpha: f64) -> AlternatingTensor {
        AlternatingTensor {
            components: self.components.iter().map(|c| alpha * c).collect(),
            ..self.clone()
        }
    }

    pub fn add(&self, other: &AlternatingTensor) -> Result<AlternatingTensor> {
        if self.dim != other.dim || self.degree != other.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                got: other.degree,
            });
        }
        Ok(AlternatingTensor {
            components: self.components.iter().zip(&other.components).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }

    /// Largest violation of `ω(.., e_i, .., e_j, ..) = -ω(.., e_j, .., e_i, ..)`.
    pub fn antisymmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut idx = [0usize; MAX_TENSOR_RANK];
        for pos in 0..self.components.len() {
            multi_index(pos, self.dim, self.degree, &mut idx[..self.degree]);
            for a in 0..self.degree {
                for b in a + 1..self.degree {
                    let mut swapped = idx;
                    swapped.swap(a, b);
                    let other = self.components[flat_index(&swapped[..self.degree], self.dim)];
                    worst = worst.max((self.components[pos] + other).abs());
                }
            }
        }
        worst
    }
}

/// `(sign, mask)` for every `(p, q)`-shuffle; `mask[slot]` marks the slots
/// fed to the left factor.
fn shuffles(p: usize, q: usize) -> Vec<(f64, Vec<bool>)> {
    let n = p + q;
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == p)
        .map(|m| {
            let mask: Vec<bool> = (0..n).map(|s| m & (1 << s) != 0).collect();
            // inversions: pairs (left slot after right slot)
            let mut inversions = 0;
            let mut rights_seen = 0;
            for &left in &mask {
                if left {
                    inversions += rights_seen;
                } else {
                    rights_seen += 1;
                }
            }
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            (sign, mask)
        })
        .collect()
}
