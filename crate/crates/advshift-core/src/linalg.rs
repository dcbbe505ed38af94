//! Dense vectors over `f64` and orthonormal subspaces of R^d.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::math;
use crate::rng::subspace_rng;

/// Orthonormality tolerance honored by subspace constructors.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Dense column vector with finite entries and dimension >= 1.
///
/// Constructors enforce the invariants; arithmetic does not re-check them,
/// so code that can overflow (the particle dynamic) checks results
/// explicitly via [`Vector::is_finite`].
#[derive(Clone, Debug, PartialEq)]
pub struct Vector {
    entries: Vec<f64>,
}

impl Vector {
    /// Wraps entries after checking they are nonempty and finite.
    pub fn new(entries: Vec<f64>) -> Result<Self, Error> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("vector dimension must be >= 1".into()));
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("vector entries must be finite".into()));
        }
        Ok(Self { entries })
    }

    /// Zero vector of the given dimension.
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "vector dimension must be >= 1");
        Self { entries: vec![0.0; dim] }
    }

    /// Standard basis vector `e_i`.
    pub fn basis(dim: usize, i: usize) -> Self {
        assert!(i < dim, "basis index out of range");
        let mut v = Self::zeros(dim);
        v.entries[i] = 1.0;
        v
    }

    /// Vector with independent standard normal entries.
    pub fn standard_normal<R: Rng>(dim: usize, rng: &mut R) -> Self {
        assert!(dim >= 1, "vector dimension must be >= 1");
        Self { entries: (0..dim).map(|_| rng.sample(StandardNormal)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Mutable entry access. Finiteness is the caller's concern here;
    /// the evolution drivers re-check it after every update.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }

    fn check_dim(&self, other: &Self) -> Result<(), Error> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { left: self.dim(), right: other.dim() });
        }
        Ok(())
    }

    /// Euclidean inner product.
    pub fn inner(&self, other: &Self) -> Result<f64, Error> {
        self.check_dim(other)?;
        Ok(self
            .entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.norm_sq())
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// log10 of the norm, computed with a max-entry prescale so it stays
    /// accurate even when `norm_sq` would overflow. Zero vector gives -inf.
    pub fn log10_norm(&self) -> f64 {
        let m = self.max_abs();
        if m == 0.0 {
            return f64::NEG_INFINITY;
        }
        let scaled_sq: f64 = self.entries.iter().map(|v| (v / m) * (v / m)).sum();
        math::log10(m) + 0.5 * math::log10(scaled_sq)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { entries: self.entries.iter().map(|v| c * v).collect() }
    }

    pub fn plus(&self, other: &Self) -> Result<Self, Error> {
        self.check_dim(other)?;
        Ok(Self {
            entries: self
                .entries
                .iter()
                .zip(other.entries.iter())
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn minus(&self, other: &Self) -> Result<Self, Error> {
        self.check_dim(other)?;
        Ok(Self {
            entries: self
                .entries
                .iter()
                .zip(other.entries.iter())
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// In-place `self += c * other`.
    pub fn add_scaled(&mut self, c: f64, other: &Self) -> Result<(), Error> {
        self.check_dim(other)?;
        for (a, b) in self.entries.iter_mut().zip(other.entries.iter()) {
            *a += c * b;
        }
        Ok(())
    }

    /// Unit vector in the same direction; zero norm is rejected.
    pub fn normalized(&self) -> Result<Self, Error> {
        let m = self.max_abs();
        if m == 0.0 {
            return Err(Error::ZeroNorm("cannot normalize the zero vector"));
        }
        // prescale so the intermediate norm cannot overflow
        let pre = self.scaled(1.0 / m);
        let n = pre.norm();
        Ok(pre.scaled(1.0 / n))
    }

    /// Cosine of the angle to `other`, robust to very large norms.
    /// Errors if either vector has zero norm.
    pub fn cosine_with(&self, other: &Self) -> Result<f64, Error> {
        self.check_dim(other)?;
        let ma = self.max_abs();
        let mb = other.max_abs();
        if ma == 0.0 || mb == 0.0 {
            return Err(Error::ZeroNorm("cosine with a zero vector"));
        }
        let a = self.scaled(1.0 / ma);
        let b = other.scaled(1.0 / mb);
        Ok(a.inner(&b).expect("dims checked") / (a.norm() * b.norm()))
    }
}

impl core::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.entries[i]
    }
}

/// Orthonormal basis of a linear subspace of R^d.
///
/// Basis vectors are pairwise orthonormal within [`ORTHONORMALITY_TOL`];
/// constructors verify this and reject spanning sets that are numerically
/// dependent.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: Vec<Vector>,
    ambient: usize,
}

impl Subspace {
    /// Orthonormalizes a spanning set with modified Gram-Schmidt, run twice
    /// to push roundoff well below the contract tolerance.
    pub fn from_spanning(vectors: &[Vector]) -> Result<Self, Error> {
        if vectors.is_empty() {
            return Err(Error::InvalidParameter("subspace rank must be >= 1".into()));
        }
        let ambient = vectors[0].dim();
        if vectors.len() > ambient {
            return Err(Error::InvalidParameter(
                "subspace rank cannot exceed the ambient dimension".into(),
            ));
        }
        let mut basis: Vec<Vector> = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.dim() != ambient {
                return Err(Error::DimensionMismatch { left: ambient, right: v.dim() });
            }
            let scale = v.max_abs();
            if scale == 0.0 {
                return Err(Error::InvalidParameter(
                    "spanning set contains a zero vector".into(),
                ));
            }
            let mut w = v.scaled(1.0 / scale);
            for _ in 0..2 {
                for b in &basis {
                    let c = w.inner(b).expect("dims checked");
                    w.add_scaled(-c, b).expect("dims checked");
                }
            }
            let n = w.norm();
            if n < 1e-12 {
                return Err(Error::InvalidParameter(
                    "spanning set is numerically dependent".into(),
                ));
            }
            basis.push(w.scaled(1.0 / n));
        }
        let s = Self { basis, ambient };
        debug_assert!(s.max_gram_deviation() <= ORTHONORMALITY_TOL);
        Ok(s)
    }

    /// Random `rank`-dimensional subspace of R^ambient: a matrix of i.i.d.
    /// standard normals, orthonormalized. Deterministic in `seed`.
    pub fn haar(ambient: usize, rank: usize, seed: u64) -> Result<Self, Error> {
        if rank == 0 || ambient == 0 {
            return Err(Error::InvalidParameter("subspace rank must be >= 1".into()));
        }
        if rank > ambient {
            return Err(Error::InvalidParameter(
                "subspace rank cannot exceed the ambient dimension".into(),
            ));
        }
        let mut rng = subspace_rng(seed);
        let cols: Vec<Vector> =
            (0..rank).map(|_| Vector::standard_normal(ambient, &mut rng)).collect();
        Self::from_spanning(&cols)
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn basis(&self) -> &[Vector] {
        &self.basis
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &Vector) -> Result<Vector, Error> {
        if v.dim() != self.ambient {
            return Err(Error::DimensionMismatch { left: self.ambient, right: v.dim() });
        }
        let mut out = Vector::zeros(self.ambient);
        for b in &self.basis {
            let c = v.inner(b).expect("dims checked");
            out.add_scaled(c, b).expect("dims checked");
        }
        Ok(out)
    }

    /// Maps subspace coordinates to the ambient space: `sum_k c_k b_k`.
    pub fn coords_to_ambient(&self, coords: &[f64]) -> Result<Vector, Error> {
        if coords.len() != self.rank() {
            return Err(Error::DimensionMismatch { left: self.rank(), right: coords.len() });
        }
        let mut out = Vector::zeros(self.ambient);
        for (c, b) in coords.iter().zip(self.basis.iter()) {
            out.add_scaled(*c, b).expect("dims checked");
        }
        Ok(out)
    }

    /// max_{i,j} |<b_i, b_j> - delta_ij|, the orthonormality defect.
    pub fn max_gram_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, bi) in self.basis.iter().enumerate() {
            for (j, bj) in self.basis.iter().enumerate() {
                let g = bi.inner(bj).expect("dims checked");
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}
