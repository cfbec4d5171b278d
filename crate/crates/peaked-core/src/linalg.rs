//! Dense complex linear algebra for small gate matrices.
//!
//! Everything in this module is a pure function over immutable values. The
//! conventions fixed here (the U3 matrix, the scaled Frobenius deviation, the
//! ZYZ tie-breaks) are what the rewrite rules and the obfuscator are verified
//! against, so they must not drift.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used by "unitary"-labeled constructors: ‖U†U − I‖_F ≤ UNITARY_TOL · dim.
pub const UNITARY_TOL: f64 = 1e-10;

/// Euler angles (θ, φ, λ) of a single-qubit U3 rotation, in radians.
///
/// The matrix convention is fixed by [`u3_matrix`]:
///
/// ```text
/// U3(θ, φ, λ) = [ cos(θ/2)            −e^{iλ} sin(θ/2)      ]
///               [ e^{iφ} sin(θ/2)      e^{i(φ+λ)} cos(θ/2)  ]
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct U3Params {
    pub theta: f64,
    pub phi: f64,
    pub lambda: f64,
}

impl U3Params {
    pub const ZERO: U3Params = U3Params { theta: 0.0, phi: 0.0, lambda: 0.0 };

    pub fn new(theta: f64, phi: f64, lambda: f64) -> Self {
        Self { theta, phi, lambda }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite() && self.phi.is_finite() && self.lambda.is_finite()
    }

    /// Inverse gate parameters: u3(−θ, −λ, −φ) = u3(θ, φ, λ)†.
    pub fn inverse(&self) -> Self {
        Self { theta: -self.theta, phi: -self.lambda, lambda: -self.phi }
    }

    /// Canonical representative with all angles in (−π, π].
    ///
    /// Applied only at serialization boundaries, never inside arithmetic.
    pub fn normalized(&self) -> Self {
        Self {
            theta: normalize_angle(self.theta),
            phi: normalize_angle(self.phi),
            lambda: normalize_angle(self.lambda),
        }
    }
}

/// Maps an angle into (−π, π]. Idempotent: values already in range are
/// returned bit-identical.
pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    if a > -PI && a <= PI {
        return a;
    }
    let two_pi = 2.0 * PI;
    let mut r = a - two_pi * (a / two_pi).round();
    if r <= -PI {
        r += two_pi;
    } else if r > PI {
        r -= two_pi;
    }
    r
}

/// Dense complex matrix of power-of-two dimension, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix {
    dim: usize,
    data: Vec<C64>,
}

impl UnitaryMatrix {
    /// Identity of the given (power-of-two) dimension.
    pub fn identity(dim: usize) -> Self {
        assert!(dim.is_power_of_two(), "dimension must be a power of two");
        let mut data = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = C64::new(1.0, 0.0);
        }
        Self { dim, data }
    }

    /// Constructor labeled "unitary": checks ‖U†U − I‖_F ≤ 1e−10 · dim.
    pub fn unitary(dim: usize, data: Vec<C64>) -> Result<Self> {
        if !dim.is_power_of_two() || data.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {dim}×{dim} power-of-two matrix, got {} entries",
                data.len()
            )));
        }
        let m = Self { dim, data };
        let defect = m.unitarity_defect();
        if !(defect <= UNITARY_TOL * dim as f64) {
            return Err(Error::invalid(format!(
                "matrix is not unitary: ‖U†U − I‖_F = {defect:.3e}"
            )));
        }
        Ok(m)
    }

    /// Unchecked constructor for intermediate values (differences, sums).
    pub fn from_raw(dim: usize, data: Vec<C64>) -> Self {
        assert!(dim.is_power_of_two() && data.len() == dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    /// ‖U†U − I‖_F.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..n {
                    s += self.at(k, i).conj() * self.at(k, j);
                }
                if i == j {
                    s -= 1.0;
                }
                acc += s.norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &UnitaryMatrix) -> UnitaryMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k);
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out[i * n + j] += a * rhs.at(k, j);
                }
            }
        }
        UnitaryMatrix { dim: n, data: out }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> UnitaryMatrix {
        let n = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                out[j * n + i] = self.at(i, j).conj();
            }
        }
        UnitaryMatrix { dim: n, data: out }
    }

    /// Kronecker product `self ⊗ rhs` (rhs indexes the low bits).
    pub fn kron(&self, rhs: &UnitaryMatrix) -> UnitaryMatrix {
        let (a, b) = (self.dim, rhs.dim);
        let n = a * b;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for i1 in 0..a {
            for j1 in 0..a {
                let f = self.at(i1, j1);
                for i2 in 0..b {
                    for j2 in 0..b {
                        out[(i1 * b + i2) * n + (j1 * b + j2)] = f * rhs.at(i2, j2);
                    }
                }
            }
        }
        UnitaryMatrix { dim: n, data: out }
    }

    /// Multiplies every entry by a scalar.
    pub fn scale(&self, s: C64) -> UnitaryMatrix {
        UnitaryMatrix { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.at(i, i)).sum()
    }

    /// ‖self − rhs‖_F.
    pub fn frobenius_distance(&self, rhs: &UnitaryMatrix) -> f64 {
        assert_eq!(self.dim, rhs.dim);
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// The block-deviation metric: a nonnegative, dimensionless scaled Frobenius
/// distance between two 4×4 block matrices.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Deviation(f64);

impl Deviation {
    pub fn value(&self) -> f64 {
        self.0
    }
}

/// The 2×2 U3 gate matrix. Errors on non-finite angles.
pub fn u3_matrix(p: U3Params) -> Result<UnitaryMatrix> {
    if !p.is_finite() {
        return Err(Error::invalid("non-finite U3 angle"));
    }
    Ok(UnitaryMatrix { dim: 2, data: u3_entries(p).to_vec() })
}

#[inline]
pub(crate) fn u3_entries(p: U3Params) -> [C64; 4] {
    let (s, c) = (0.5 * p.theta).sin_cos();
    let eip = C64::from_polar(1.0, p.phi);
    let eil = C64::from_polar(1.0, p.lambda);
    [
        C64::new(c, 0.0),
        -eil * s,
        eip * s,
        eip * eil * c,
    ]
}

/// The 4×4 controlled-Z matrix diag(1, 1, 1, −1).
pub fn cz_matrix() -> UnitaryMatrix {
    let mut m = UnitaryMatrix::identity(4);
    m.data[15] = C64::new(-1.0, 0.0);
    m
}

/// Block deviation δ̃ between two 4×4 matrices:
/// sqrt( Σ_{ij} |M1_{ij} − M2_{ij}|² / 16 ).
pub fn deviation(m1: &UnitaryMatrix, m2: &UnitaryMatrix) -> Result<Deviation> {
    if m1.dim != 4 || m2.dim != 4 {
        return Err(Error::invalid(format!(
            "deviation expects 4×4 matrices, got {}×{} and {}×{}",
            m1.dim, m1.dim, m2.dim, m2.dim
        )));
    }
    Ok(Deviation(deviation16(
        m1.data.as_slice().try_into().unwrap(),
        m2.data.as_slice().try_into().unwrap(),
    )))
}

#[inline]
pub(crate) fn deviation16(a: &[C64; 16], b: &[C64; 16]) -> f64 {
    let mut acc = 0.0;
    for i in 0..16 {
        acc += (a[i] - b[i]).norm_sqr();
    }
    (acc / 16.0).sqrt()
}

/// ZYZ decomposition of a 2×2 unitary: returns (p, α) with
/// U = e^{iα} · u3_matrix(p), θ ∈ [0, π], recomposition error ≤ 1e−10.
///
/// Tie-break at θ ∈ {0, π}: λ carries the full phase, φ = 0.
pub fn zyz_decompose(u: &UnitaryMatrix) -> Result<(U3Params, f64)> {
    if u.dim != 2 {
        return Err(Error::invalid("zyz_decompose expects a 2×2 matrix"));
    }
    let defect = u.unitarity_defect();
    if !(defect <= UNITARY_TOL * 2.0) {
        return Err(Error::invalid(format!(
            "zyz_decompose input not unitary: defect {defect:.3e}"
        )));
    }
    let (u00, u01, u10, u11) = (u.at(0, 0), u.at(0, 1), u.at(1, 0), u.at(1, 1));
    let c = u00.norm();
    let s = u10.norm();
    let theta = 2.0 * s.atan2(c);
    const TIE: f64 = 1e-11;
    let (alpha, phi, lambda) = if s < TIE {
        // θ ≈ 0: diagonal; λ carries the relative phase.
        let alpha = u00.arg();
        (alpha, 0.0, (u11 * C64::from_polar(1.0, -alpha)).arg())
    } else if c < TIE {
        // θ ≈ π: anti-diagonal; λ carries the phase of the top-right entry.
        let alpha = u10.arg();
        (alpha, 0.0, ((-u01) * C64::from_polar(1.0, -alpha)).arg())
    } else {
        let alpha = u00.arg();
        (alpha, u10.arg() - alpha, (-u01).arg() - alpha)
    };
    Ok((U3Params::new(theta, phi, lambda), alpha))
}

/// min over α of ‖U1 − e^{iα} U2‖_F, in closed form via the phase of tr(U2†U1).
pub fn distance_up_to_phase(u1: &UnitaryMatrix, u2: &UnitaryMatrix) -> Result<f64> {
    if u1.dim != u2.dim {
        return Err(Error::invalid("distance_up_to_phase: dimension mismatch"));
    }
    let n1: f64 = u1.data.iter().map(|z| z.norm_sqr()).sum();
    let n2: f64 = u2.data.iter().map(|z| z.norm_sqr()).sum();
    // tr(U2†U1) = Σ_ij conj(U2_ij) U1_ij
    let overlap: C64 = u1.data.iter().zip(&u2.data).map(|(a, b)| b.conj() * a).sum();
    Ok((n1 + n2 - 2.0 * overlap.norm()).max(0.0).sqrt())
}

// ---------------------------------------------------------------------------
// Fixed-size 4×4 kernels. These back the optimizer's objective, where the
// heap-allocating UnitaryMatrix path would dominate the runtime.
// ---------------------------------------------------------------------------

pub(crate) type Mat4 = [C64; 16];

pub(crate) const MAT4_ID: Mat4 = {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    [o, z, z, z, z, o, z, z, z, z, o, z, z, z, z, o]
};

#[inline]
pub(crate) fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [C64::new(0.0, 0.0); 16];
    for i in 0..4 {
        for k in 0..4 {
            let f = a[i * 4 + k];
            for j in 0..4 {
                out[i * 4 + j] += f * b[k * 4 + j];
            }
        }
    }
    out
}

/// kron(high, low): `high` indexes the most-significant bit of the pair.
#[inline]
pub(crate) fn kron2(high: &[C64; 4], low: &[C64; 4]) -> Mat4 {
    let mut out = [C64::new(0.0, 0.0); 16];
    for i1 in 0..2 {
        for j1 in 0..2 {
            let f = high[i1 * 2 + j1];
            for i2 in 0..2 {
                for j2 in 0..2 {
                    out[(i1 * 2 + i2) * 4 + (j1 * 2 + j2)] = f * low[i2 * 2 + j2];
                }
            }
        }
    }
    out
}

/// Applies CZ = diag(1,1,1,−1) on the left: flips the sign of row 3.
#[inline]
pub(crate) fn mat4_cz_left(m: &mut Mat4) {
    for j in 0..4 {
        m[12 + j] = -m[12 + j];
    }
}

#[inline]
pub(crate) fn mat4_scale(m: &mut Mat4, s: C64) {
    for z in m.iter_mut() {
        *z *= s;
    }
}
