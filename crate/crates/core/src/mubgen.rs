//! Mutually unbiased bases for prime dimension and the associated
//! generalized Pauli unitaries `U_α = Σ_i ω^i |φ_i^(α)⟩⟨φ_i^(α)|`.
//!
//! Basis labels run `1..=d+1`. For odd prime `d`, label `r + 1`
//! (`r = 0..d-1`) is the Wootters–Fields basis with components
//! `ω^(r j² + k j) / √d`, and label `d + 1` is the computational basis.
//! For `d = 2` the labels are the eigenbases of σ_x, σ_y, σ_z in that order,
//! so that `U_1 = σ_x`, `U_2 = σ_y`, `U_3 = σ_z`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::matrixlab::ComplexMatrix;

pub const MAX_DIMENSION: usize = 31;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MubError {
    #[error("dimension {0} is out of range (supported: primes 2..={MAX_DIMENSION})")]
    OutOfRange(usize),
    #[error("dimension {0} is composite; only prime dimensions have a supported MUB construction")]
    Composite(usize),
}

pub fn is_prime(n: usize) -> bool {
    n >= 2 && (2..).take_while(|k| k * k <= n).all(|k| !n.is_multiple_of(k))
}

/// Checks `d` is a supported (prime, in-range) dimension.
pub fn check_dimension(d: usize) -> Result<(), MubError> {
    if !(2..=MAX_DIMENSION).contains(&d) {
        return Err(MubError::OutOfRange(d));
    }
    if !is_prime(d) {
        return Err(MubError::Composite(d));
    }
    Ok(())
}

/// `d + 1` orthonormal bases of ℂ^d. `bases[α - 1][i]` is |φ_i^(α)⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct MubFamily {
    d: usize,
    bases: Vec<Vec<Vec<Complex64>>>,
}

impl MubFamily {
    /// Wraps raw vectors without checking anything; use [`verify_mub`].
    pub fn from_bases(d: usize, bases: Vec<Vec<Vec<Complex64>>>) -> Self {
        MubFamily { d, bases }
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn bases(&self) -> &[Vec<Vec<Complex64>>] {
        &self.bases
    }

    /// Basis with 1-based label `alpha`.
    pub fn basis(&self, alpha: usize) -> &[Vec<Complex64>] {
        &self.bases[alpha - 1]
    }

    pub fn bases_mut(&mut self) -> &mut [Vec<Vec<Complex64>>] {
        &mut self.bases
    }
}

fn root_of_unity(d: usize, k: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (k % d) as f64 / d as f64)
}

pub fn construct_mub(d: usize) -> Result<MubFamily, MubError> {
    check_dimension(d)?;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    if d == 2 {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bases = vec![
            vec![vec![c(h, 0.0), c(h, 0.0)], vec![c(h, 0.0), c(-h, 0.0)]],
            vec![vec![c(h, 0.0), c(0.0, h)], vec![c(h, 0.0), c(0.0, -h)]],
            vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]],
        ];
        return Ok(MubFamily { d, bases });
    }
    let norm = 1.0 / (d as f64).sqrt();
    let mut bases = Vec::with_capacity(d + 1);
    for r in 0..d {
        let basis = (0..d)
            .map(|k| {
                (0..d)
                    .map(|j| root_of_unity(d, r * j * j + k * j) * norm)
                    .collect()
            })
            .collect();
        bases.push(basis);
    }
    let computational = (0..d)
        .map(|k| {
            (0..d)
                .map(|j| if j == k { c(1.0, 0.0) } else { c(0.0, 0.0) })
                .collect()
        })
        .collect();
    bases.push(computational);
    Ok(MubFamily { d, bases })
}

#[derive(Debug, Clone, Serialize)]
pub struct MubReport {
    pub dimension: usize,
    pub tolerance: f64,
    /// max |⟨φ_i^(α)|φ_j^(α)⟩ − δ_ij|
    pub max_orthonormality_deviation: f64,
    /// max ||⟨φ_i^(α)|φ_j^(β)⟩|² − 1/d| over α ≠ β
    pub max_unbiasedness_deviation: f64,
    pub pass: bool,
}

fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn verify_mub(family: &MubFamily, tol: f64) -> MubReport {
    let d = family.d;
    let inv_d = 1.0 / d as f64;
    let mut ortho: f64 = 0.0;
    let mut unbiased: f64 = 0.0;
    for (a, ba) in family.bases.iter().enumerate() {
        for (b, bb) in family.bases.iter().enumerate().skip(a) {
            for (i, u) in ba.iter().enumerate() {
                for (j, v) in bb.iter().enumerate() {
                    let ov = inner(u, v);
                    if a == b {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        ortho = ortho.max((ov - delta).norm());
                    } else {
                        unbiased = unbiased.max((ov.norm_sqr() - inv_d).abs());
                    }
                }
            }
        }
    }
    let complete = family.bases.len() == d + 1 && family.bases.iter().all(|b| b.len() == d);
    MubReport {
        dimension: d,
        tolerance: tol,
        max_orthonormality_deviation: ortho,
        max_unbiasedness_deviation: unbiased,
        pass: complete && ortho <= tol && unbiased <= tol,
    }
}

/// The `d + 1` generalized Pauli unitaries together with their powers.
#[derive(Debug, Clone)]
pub struct WeylSet {
    d: usize,
    omega: Complex64,
    /// `powers[α - 1][k] = U_α^k` for `k = 0..d`
    powers: Vec<Vec<ComplexMatrix>>,
}

impl WeylSet {
    pub fn dimension(&self) -> usize {
        self.d
    }

    /// Primitive root ω = e^{2πi/d}.
    pub fn omega(&self) -> Complex64 {
        self.omega
    }

    pub fn labels(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.d + 1
    }

    pub fn unitary(&self, alpha: usize) -> &ComplexMatrix {
        &self.powers[alpha - 1][1]
    }

    /// `U_α^k`, `k` taken mod d.
    pub fn power(&self, alpha: usize, k: usize) -> &ComplexMatrix {
        &self.powers[alpha - 1][k % self.d]
    }
}

pub fn build_unitaries(family: &MubFamily) -> WeylSet {
    let d = family.d;
    let mut powers = Vec::with_capacity(family.bases.len());
    for basis in &family.bases {
        let mut u = ComplexMatrix::zeros(d);
        for (i, phi) in basis.iter().enumerate() {
            u.add_scaled(root_of_unity(d, i), &ComplexMatrix::outer(phi, phi));
        }
        let mut list = Vec::with_capacity(d);
        list.push(ComplexMatrix::identity(d));
        for k in 1..d {
            let next = list[k - 1].matmul(&u);
            list.push(next);
        }
        powers.push(list);
    }
    WeylSet {
        d,
        omega: root_of_unity(d, 1),
        powers,
    }
}

/// Convenience: MUB construction followed by [`build_unitaries`].
pub fn weyl_set(d: usize) -> Result<WeylSet, MubError> {
    construct_mub(d).map(|f| build_unitaries(&f))
}

/// max |Σ_{k=0}^{d-1} U_α^k U_β^m U_α^{k†}|, which vanishes for α ≠ β.
pub fn twirl_residual(weyl: &WeylSet, alpha: usize, beta: usize, m: usize) -> f64 {
    let d = weyl.d;
    let target = weyl.power(beta, m);
    let mut acc = ComplexMatrix::zeros(d);
    for k in 0..d {
        let conj = target.conjugate_by(weyl.power(alpha, k));
        acc.add_scaled(Complex64::new(1.0, 0.0), &conj);
    }
    acc.max_abs()
}

/// CSV of basis vectors: `basis,vector,component,re,im`.
pub fn bases_csv(family: &MubFamily) -> String {
    let mut out = String::from("basis,vector,component,re,im\n");
    for (a, basis) in family.bases.iter().enumerate() {
        for (i, v) in basis.iter().enumerate() {
            for (j, z) in v.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{:.16e},{:.16e}", a + 1, i, j, z.re, z.im);
            }
        }
    }
    out
}

/// CSV of unitaries: `label,row,col,re,im`.
pub fn unitaries_csv(weyl: &WeylSet) -> String {
    let mut out = String::from("label,row,col,re,im\n");
    for alpha in weyl.labels() {
        let u = weyl.unitary(alpha);
        for r in 0..weyl.d {
            for c in 0..weyl.d {
                let z = u[(r, c)];
                let _ = writeln!(out, "{alpha},{r},{c},{:.16e},{:.16e}", z.re, z.im);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixlab::hermitian_eigen;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn primality() {
        let primes: Vec<usize> = (0..32).filter(|&n| is_prime(n)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31]);
    }

    #[test]
    fn rejects_composite_and_out_of_range() {
        assert_eq!(construct_mub(4).unwrap_err(), MubError::Composite(4));
        assert_eq!(construct_mub(1).unwrap_err(), MubError::OutOfRange(1));
        assert_eq!(construct_mub(37).unwrap_err(), MubError::OutOfRange(37));
    }

    #[test]
    fn qubit_overlaps_are_exactly_half() {
        let fam = construct_mub(2).unwrap();
        let r = verify_mub(&fam, 1e-15);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn qutrit_overlaps() {
        let fam = construct_mub(3).unwrap();
        assert_eq!(fam.bases().len(), 4);
        let r = verify_mub(&fam, 1e-12);
        assert!(r.pass, "{r:?}");
        let w = build_unitaries(&fam);
        assert!((w.omega() - Complex64::from_polar(1.0, 2.0 * PI / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn dimension_five_passes() {
        let r = verify_mub(&construct_mub(5).unwrap(), 1e-12);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn perturbed_family_fails() {
        let mut fam = construct_mub(3).unwrap();
        fam.bases_mut()[1][0][0] += c(1e-3, 0.0);
        let r = verify_mub(&fam, 1e-12);
        assert!(!r.pass);
        assert!(r.max_orthonormality_deviation.max(r.max_unbiasedness_deviation) >= 1e-4);
    }

    #[test]
    fn qubit_unitaries_are_paulis() {
        let w = weyl_set(2).unwrap();
        let sx = ComplexMatrix::from_row_major(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let sy = ComplexMatrix::from_row_major(2, vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let sz = ComplexMatrix::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        assert!((w.unitary(1) - &sx).max_abs() < 1e-15);
        assert!((w.unitary(2) - &sy).max_abs() < 1e-15);
        assert!((w.unitary(3) - &sz).max_abs() < 1e-15);
    }

    #[test]
    fn qutrit_computational_unitary_is_clock() {
        let w = weyl_set(3).unwrap();
        let om = w.omega();
        let clock = ComplexMatrix::diagonal(&[c(1.0, 0.0), om, om * om]);
        assert!((w.unitary(4) - &clock).max_abs() < 1e-15);
    }

    #[test]
    fn unitaries_satisfy_invariants() {
        for d in [2, 3, 5, 7] {
            let w = weyl_set(d).unwrap();
            let id = ComplexMatrix::identity(d);
            for a in w.labels() {
                let u = w.unitary(a);
                assert!((&u.matmul(&u.adjoint()) - &id).max_abs() < 1e-12);
                assert!((&u.pow(d as u32) - &id).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectrum_is_roots_of_unity() {
        // U is normal, so H = (e^{-iθ}U + e^{iθ}U†)/2 shares its eigenvectors;
        // a generic θ separates the eigenvalues cos(2πi/d − θ).
        let theta = 0.1;
        let rot = Complex64::from_polar(1.0, -theta);
        for d in [3, 5] {
            let w = weyl_set(d).unwrap();
            for a in w.labels() {
                let u = w.unitary(a);
                let mut herm = u.scale(rot * 0.5);
                herm.add_scaled(rot.conj() * 0.5, &u.adjoint());
                let eig = hermitian_eigen(&herm);
                let mut found: Vec<usize> = (0..d)
                    .map(|k| {
                        let v: Vec<Complex64> = (0..d).map(|r| eig.vectors[(r, k)]).collect();
                        let uv = u.mul_vec(&v);
                        let lam: Complex64 = v.iter().zip(&uv).map(|(x, y)| x.conj() * y).sum();
                        (0..d)
                            .find(|&i| (lam - root_of_unity(d, i)).norm() < 1e-10)
                            .expect("eigenvalue is not a root of unity")
                    })
                    .collect();
                found.sort();
                assert_eq!(found, (0..d).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn twirl_identity() {
        for d in [2, 3, 5] {
            let w = weyl_set(d).unwrap();
            for a in w.labels() {
                for b in w.labels() {
                    for m in 1..d {
                        if a != b {
                            let r = twirl_residual(&w, a, b, m);
                            assert!(r < 1e-10, "d={d} a={a} b={b} m={m} r={r}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn commuting_powers() {
        let w = weyl_set(3).unwrap();
        for a in w.labels() {
            for k in 0..3 {
                for m in 1..3 {
                    let got = w.power(a, m).conjugate_by(w.power(a, k));
                    assert!((&got - w.power(a, m)).max_abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn csv_shapes() {
        let fam = construct_mub(3).unwrap();
        assert_eq!(bases_csv(&fam).lines().count(), 1 + 4 * 3 * 3);
        assert_eq!(unitaries_csv(&build_unitaries(&fam)).lines().count(), 1 + 4 * 9);
    }
}
