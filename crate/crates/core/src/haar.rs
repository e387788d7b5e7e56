//! Exact `k`-th moment of the Haar ensemble of pure states,
//!
//! ```text
//! ρ_Haar^(k) = Σ_{π ∈ S_k} P_d(π) / (d (d+1) ⋯ (d+k−1))
//! ```
//!
//! where `P_d(π)` permutes the `k` tensor factors:
//! `P_d(π) |i_1 … i_k⟩ = |i_π(1) … i_π(k)⟩`.

use itertools::Itertools;
use nalgebra::DMatrix;

use crate::ensemble::{rising_factorial, MomentOperator};
use crate::error::{invalid, Error, Result};
use crate::C64;

pub const MAX_PERMUTATION_ORDER: usize = 6;
pub const MAX_HAAR_ORDER: usize = 4;

/// A bijection on `{0, …, k−1}`; `mapping[i] = π(i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &m in &mapping {
            if m >= mapping.len() || std::mem::replace(&mut seen[m], true) {
                return invalid(format!("{mapping:?} is not a permutation"));
            }
        }
        Ok(Self { mapping })
    }

    /// From 1-based images `[π(1), …, π(k)]`.
    pub fn from_one_based(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return invalid("1-based images must be positive");
        }
        Self::new(images.iter().map(|&i| i - 1).collect())
    }

    pub fn identity(k: usize) -> Self {
        Self { mapping: (0..k).collect() }
    }

    pub fn order(&self) -> usize {
        self.mapping.len()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.mapping[i]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.order()];
        for (i, &m) in self.mapping.iter().enumerate() {
            inv[m] = i;
        }
        Self { mapping: inv }
    }
}

/// All `k!` permutations in lexicographic order of their mappings.
pub fn enumerate_permutations(k: usize) -> Result<Vec<Permutation>> {
    if k == 0 {
        return invalid("permutation order must be at least 1");
    }
    if k > MAX_PERMUTATION_ORDER {
        return Err(Error::Unsupported(format!("S_{k} exceeds the limit S_{MAX_PERMUTATION_ORDER}")));
    }
    Ok((0..k).permutations(k).map(|mapping| Permutation { mapping }).collect())
}

/// `P_d(π)` stored as a row map: column `j` has its single 1 in row
/// `targets[j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationOperator {
    local_dim: usize,
    k: usize,
    targets: Vec<usize>,
}

impl PermutationOperator {
    pub fn dim(&self) -> usize {
        self.targets.len()
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (col, &row) in self.targets.iter().enumerate() {
            m[(row, col)] = 1.0;
        }
        m
    }

    /// `self · other`.
    pub fn compose(&self, other: &PermutationOperator) -> PermutationOperator {
        assert_eq!(self.dim(), other.dim());
        PermutationOperator {
            local_dim: self.local_dim,
            k: self.k,
            targets: other.targets.iter().map(|&mid| self.targets[mid]).collect(),
        }
    }
}

fn digits(mut index: usize, d: usize, k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for slot in out.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

fn undigits(ds: impl Iterator<Item = usize>, d: usize) -> usize {
    ds.fold(0, |acc, x| acc * d + x)
}

/// `Σ_{i_1…i_k} |i_π(1) … i_π(k)⟩⟨i_1 … i_k|` on `(C^d)^{⊗k}`.
pub fn permutation_operator(d: usize, p: &Permutation) -> Result<PermutationOperator> {
    if d < 2 {
        return invalid(format!("local dimension must be at least 2, got {d}"));
    }
    let k = p.order();
    let dim = d.checked_pow(k as u32).ok_or_else(|| Error::Unsupported("operator too large".into()))?;
    let targets = (0..dim)
        .map(|col| {
            let i = digits(col, d, k);
            undigits((0..k).map(|m| i[p.apply(m)]), d)
        })
        .collect();
    Ok(PermutationOperator { local_dim: d, k, targets })
}

/// Haar moment operator `ρ_Haar^(k)` in dimension `d`.
pub fn haar_moment(d: usize, k: usize) -> Result<MomentOperator> {
    if k == 0 || k > MAX_HAAR_ORDER {
        return Err(Error::Unsupported(format!("Haar moment of order {k} (supported 1..={MAX_HAAR_ORDER})")));
    }
    let norm = rising_factorial(d, k).recip();
    let dim = d.pow(k as u32);
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for p in enumerate_permutations(k)? {
        for (col, &row) in permutation_operator(d, &p)?.targets().iter().enumerate() {
            m[(row, col)] += C64::new(norm, 0.0);
        }
    }
    Ok(MomentOperator { k, local_dim: d, matrix: m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::tensor_power;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::collections::HashSet;

    #[test]
    fn permutation_counts() {
        assert_eq!(enumerate_permutations(1).unwrap(), vec![Permutation::identity(1)]);
        let s4 = enumerate_permutations(4).unwrap();
        assert_eq!(s4.len(), 24);
        assert_eq!(s4.iter().collect::<HashSet<_>>().len(), 24);
        assert!(enumerate_permutations(7).is_err());
        assert!(enumerate_permutations(0).is_err());
    }

    fn listed_s3() -> Vec<Permutation> {
        [[1, 2, 3], [2, 1, 3], [3, 2, 1], [1, 3, 2], [3, 1, 2], [2, 3, 1]]
            .iter()
            .map(|p| Permutation::from_one_based(p).unwrap())
            .collect()
    }

    #[test]
    fn s3_matches_listed_elements() {
        let got: HashSet<_> = enumerate_permutations(3).unwrap().into_iter().collect();
        let want: HashSet<_> = listed_s3().into_iter().collect();
        assert_eq!(got, want);
    }

    #[test]
    fn rejects_non_bijection() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
    }

    #[test]
    fn identity_and_swap_operators() {
        for d in 2..=4 {
            let id = permutation_operator(d, &Permutation::identity(3)).unwrap().to_dense();
            assert_eq!(id, DMatrix::identity(d * d * d, d * d * d));
        }
        let swap = permutation_operator(2, &Permutation::new(vec![1, 0]).unwrap()).unwrap().to_dense();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(4, 4, &[
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ]);
        assert_eq!(swap, expected);
    }

    #[test]
    fn three_cycles_are_inverse() {
        let s3 = listed_s3();
        for d in 2..=3 {
            let p5 = permutation_operator(d, &s3[4]).unwrap();
            let p6 = permutation_operator(d, &s3[5]).unwrap();
            let prod = p5.to_dense() * p6.to_dense();
            assert_eq!(prod, DMatrix::identity(p5.dim(), p5.dim()));
            assert_eq!(p5.compose(&p6).targets(), permutation_operator(d, &Permutation::identity(3)).unwrap().targets());
        }
        assert_eq!(s3[4].inverse(), s3[5]);
    }

    #[test]
    fn permutation_operator_acts_on_product_states() {
        // P(π)(a⊗b⊗c) puts factor π(m) in slot m
        let d = 3;
        let vs: Vec<Vec<C64>> = (0..3)
            .map(|s| (0..d).map(|i| C64::new((s * d + i) as f64 + 1.0, (i as f64) - 0.5)).collect())
            .collect();
        let kron = |xs: &[&Vec<C64>]| -> Vec<C64> {
            xs.iter().fold(vec![C64::new(1.0, 0.0)], |acc, v| acc.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect())
        };
        for p in enumerate_permutations(3).unwrap() {
            let op = permutation_operator(d, &p).unwrap();
            let input = kron(&[&vs[0], &vs[1], &vs[2]]);
            let mut out = vec![C64::new(0.0, 0.0); input.len()];
            for (col, &row) in op.targets().iter().enumerate() {
                out[row] += input[col];
            }
            let expected = kron(&[&vs[p.apply(0)], &vs[p.apply(1)], &vs[p.apply(2)]]);
            for (a, b) in out.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn first_and_second_moments() {
        let m = haar_moment(3, 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert_abs_diff_eq!(m.matrix[(i, j)].re, want, epsilon = 1e-15);
            }
        }
        let m = haar_moment(2, 2).unwrap();
        let swap = permutation_operator(2, &Permutation::new(vec![1, 0]).unwrap()).unwrap().to_dense();
        let expected = (DMatrix::<f64>::identity(4, 4) + swap) / 6.0;
        for (a, b) in m.matrix.iter().zip(expected.iter()) {
            assert_abs_diff_eq!(a.re, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn unit_trace_hermitian_psd() {
        for d in 2..=4 {
            for k in 1..=3 {
                let m = haar_moment(d, k).unwrap();
                assert_abs_diff_eq!(m.trace().re, 1.0, epsilon = 1e-12);
                assert!(m.hermitian_deviation() < 1e-15);
                assert!(m.min_eigenvalue() > -1e-12);
            }
        }
        assert!(haar_moment(3, 5).is_err());
    }

    fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
        let g = DMatrix::<C64>::from_fn(d, d, |_, _| {
            C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
        });
        g.qr().q()
    }

    #[test]
    fn invariant_under_local_unitary_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = haar_moment(3, 2).unwrap().matrix;
        for _ in 0..5 {
            let u = random_unitary(3, &mut rng);
            let uu = u.kronecker(&u);
            let rotated = &uu * &h * uu.adjoint();
            assert!((rotated - &h).iter().all(|z| z.norm() < 1e-10));
        }
    }

    #[test]
    fn agrees_with_haar_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (d, k, samples) = (3, 2, 20_000);
        let mut avg = DMatrix::<C64>::zeros(9, 9);
        for _ in 0..samples {
            let v: Vec<C64> = (0..d).map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))).collect();
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let v: Vec<C64> = v.iter().map(|z| z / n).collect();
            let w = DVector::from_vec(tensor_power(&v, k));
            avg.gerc(C64::new(1.0 / samples as f64, 0.0), &w, &w, C64::new(1.0, 0.0));
        }
        let h = haar_moment(d, k).unwrap().matrix;
        assert!((avg - h).iter().all(|z| z.norm() < 3e-2));
    }
}
