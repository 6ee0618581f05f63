//! Dense complex determinants and Vandermonde products.

use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::ddouble::CDd;
use crate::error::{Error, Result};
use crate::specfun::{barnes_g_int, ln_factorial, SignedLog};

/// Square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("matrix dimension must be >= 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "{} entries for a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Domain("matrix has a non-finite entry".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut entries = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                entries.push(f(r, c));
            }
        }
        Self::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries[row * self.dim + col] = value;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut out = self.clone();
        for r in 0..d {
            for c in 0..d {
                out.entries[c * d + r] = self.entries[r * d + c].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "cannot multiply {0}x{0} by {1}x{1}",
                self.dim, other.dim
            )));
        }
        let d = self.dim;
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.entries[r * d + k];
                for c in 0..d {
                    out[r * d + c] += a * other.entries[k * d + c];
                }
            }
        }
        Ok(Self { dim: d, entries: out })
    }

    /// Copy with rows reordered so that row `i` of the result is row `perm[i]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.dim {
            return Err(Error::Dimension("permutation length".into()));
        }
        let d = self.dim;
        let mut entries = Vec::with_capacity(d * d);
        for &src in perm {
            entries.extend_from_slice(&self.entries[src * d..(src + 1) * d]);
        }
        Self::new(d, entries)
    }
}

/// Determinant carried as `exp(log_modulus) * phase`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub log_modulus: f64,
    pub phase: Complex64,
}

impl LogDet {
    pub fn value(&self) -> Complex64 {
        self.phase * self.log_modulus.exp()
    }
}

const PIVOT_FLOOR: f64 = 1e-300;

/// Determinant by LU factorisation with partial pivoting.
pub fn det_complex(a: &ComplexMatrix) -> Result<LogDet> {
    let d = a.dim;
    if d == 1 {
        let v = a.entries[0];
        let modulus = v.norm();
        if modulus < PIVOT_FLOOR {
            return Err(Error::Singular(modulus));
        }
        return Ok(LogDet {
            log_modulus: modulus.ln(),
            phase: v / modulus,
        });
    }
    let mut lu = a.entries.clone();
    let mut log_modulus = 0.0;
    let mut phase = Complex64::new(1.0, 0.0);
    for col in 0..d {
        let (pivot_row, pivot_mod) = (col..d)
            .map(|r| (r, lu[r * d + col].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_mod < PIVOT_FLOOR {
            return Err(Error::Singular(pivot_mod));
        }
        if pivot_row != col {
            for c in 0..d {
                lu.swap(col * d + c, pivot_row * d + c);
            }
            phase = -phase;
        }
        let pivot = lu[col * d + col];
        log_modulus += pivot_mod.ln();
        phase *= pivot / pivot_mod;
        for r in col + 1..d {
            let factor = lu[r * d + col] / pivot;
            if factor.re == 0.0 && factor.im == 0.0 {
                continue;
            }
            for c in col + 1..d {
                let upper = lu[col * d + c];
                lu[r * d + c] -= factor * upper;
            }
        }
    }
    // keep the phase on the unit circle after many multiplications
    phase /= phase.norm();
    Ok(LogDet { log_modulus, phase })
}

/// Scalar types the generic LU determinant works over.
pub trait LuScalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + From<Complex64>
{
    /// Modulus in double precision, used for pivoting.
    fn modulus(self) -> f64;
}

impl LuScalar for Complex64 {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

impl LuScalar for CDd {
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Determinant of a row-major `dim x dim` matrix by partially pivoted LU,
/// carried out in the scalar type's own precision.
pub fn det_lu<F: LuScalar>(dim: usize, mut a: Vec<F>) -> Result<F> {
    if a.len() != dim * dim {
        return Err(Error::Dimension(format!(
            "{} entries for a {dim}x{dim} matrix",
            a.len()
        )));
    }
    let mut det = F::from(Complex64::new(1.0, 0.0));
    for col in 0..dim {
        let pivot_row = (col..dim)
            .max_by(|&i, &j| a[i * dim + col].modulus().total_cmp(&a[j * dim + col].modulus()))
            .unwrap_or(col);
        let pivot = a[pivot_row * dim + col];
        if !(pivot.modulus() >= PIVOT_FLOOR) {
            return Err(Error::Singular(pivot.modulus()));
        }
        if pivot_row != col {
            for k in 0..dim {
                a.swap(col * dim + k, pivot_row * dim + k);
            }
            det = -det;
        }
        det = det * pivot;
        for row in col + 1..dim {
            let factor = a[row * dim + col] / pivot;
            for k in col + 1..dim {
                let v = a[row * dim + k] - factor * a[col * dim + k];
                a[row * dim + k] = v;
            }
        }
    }
    Ok(det)
}

/// Product of row 2-norms divided by |det|; `ratio * eps` bounds the
/// relative rounding error of a computed determinant.
pub fn hadamard_ratio(dim: usize, a: &[Complex64], det: Complex64) -> f64 {
    let rows: f64 = (0..dim)
        .map(|i| a[i * dim..(i + 1) * dim].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
        .product();
    rows / det.norm()
}

/// Vandermonde product prod_{j<k} (v_k - v_j) in sign/log form.
pub fn vandermonde_log(values: &[f64]) -> SignedLog {
    let mut acc = SignedLog { ln_abs: 0.0, sign: 1.0 };
    for k in 0..values.len() {
        for j in 0..k {
            acc = acc.times(SignedLog::from_value(values[k] - values[j]));
            if acc.sign == 0.0 {
                return acc;
            }
        }
    }
    acc
}

/// Vandermonde product prod_{j<k} (v_k - v_j). Zero on exact duplicates.
pub fn vandermonde(values: &[f64]) -> f64 {
    if values.len() > 8 {
        return vandermonde_log(values).value();
    }
    let mut acc = 1.0;
    for k in 0..values.len() {
        for j in 0..k {
            acc *= values[k] - values[j];
        }
    }
    acc
}

/// Both sides of the derivative-limit identity for the Vandermonde determinant:
/// apply prod_{j=n+1}^{m} d^{j-n-1}/dλ_j^{j-n-1} to Δ_m, set λ_{n+1..m} = 0,
/// and compare with (-1)^{n(m-1)} G(m-n+1) prod_k λ_k^{m-n} Δ_n(λ).
///
/// The left side expands Δ_m into its m! signed monomials with exact integer
/// coefficients, so no finite differences are involved.
pub fn vandermonde_limit_check(m: usize, n: usize, lambda: &[f64]) -> Result<(f64, f64)> {
    if n == 0 || n >= m {
        return Err(Error::Dimension(format!("need 1 <= n < m, got m={m}, n={n}")));
    }
    if m > 8 {
        return Err(Error::Dimension(format!("m = {m} too large for monomial expansion")));
    }
    if lambda.len() != n {
        return Err(Error::Dimension(format!(
            "expected {n} eigenvalues, got {}",
            lambda.len()
        )));
    }
    let mut lhs = 0.0;
    // Δ_m = Σ_σ sgn(σ) Π_k λ_k^{σ(k)}; column k carries exponent σ(k).
    for_each_permutation(m, |perm, sign| {
        let mut coeff = sign as f64;
        for (j, &p) in perm.iter().enumerate().skip(n) {
            let order = j - n;
            if p != order {
                return;
            }
            coeff *= ln_factorial(order as u32).exp().round();
        }
        let mono: f64 = (0..n).map(|k| lambda[k].powi(perm[k] as i32)).product();
        lhs += coeff * mono;
    });
    let g = barnes_g_int((m - n + 1) as u32)?.value().round();
    let sign = if (n * (m - 1)).is_multiple_of(2) { 1.0 } else { -1.0 };
    let powers: f64 = lambda.iter().map(|x| x.powi((m - n) as i32)).product();
    let rhs = sign * g * powers * vandermonde(lambda);
    Ok((lhs, rhs))
}

// Heap's algorithm with sign tracking.
fn for_each_permutation(n: usize, mut visit: impl FnMut(&[usize], i32)) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let mut sign = 1;
    visit(&perm, sign);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            sign = -sign;
            visit(&perm, sign);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn cofactor_det(m: &[Vec<Complex64>]) -> Complex64 {
        let n = m.len();
        if n == 1 {
            return m[0][0];
        }
        let mut acc = c(0.0, 0.0);
        for col in 0..n {
            let minor: Vec<Vec<Complex64>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(k, _)| *k != col)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect();
            let s = if col % 2 == 0 { 1.0 } else { -1.0 };
            acc += m[0][col] * cofactor_det(&minor) * s;
        }
        acc
    }

    fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .unwrap()
    }

    #[test]
    fn det_identity_and_diagonal() {
        let d = det_complex(&ComplexMatrix::identity(4)).unwrap();
        assert!((d.value() - c(1.0, 0.0)).norm() < 1e-15);
        let mut m = ComplexMatrix::identity(3);
        m.set(0, 0, c(2.0, 0.0));
        m.set(1, 1, c(0.0, 3.0));
        m.set(2, 2, c(-1.0, 0.0));
        let d = det_complex(&m).unwrap();
        assert!((d.value() - c(0.0, -6.0)).norm() < 1e-14);
        assert!((d.phase.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn det_one_by_one_exact() {
        let m = ComplexMatrix::new(1, vec![c(3.0, -4.0)]).unwrap();
        let d = det_complex(&m).unwrap();
        assert_eq!(d.log_modulus, 5f64.ln());
        assert!((d.value() - c(3.0, -4.0)).norm() < 1e-15);
    }

    #[test]
    fn det_matches_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 2..=5 {
            for _ in 0..10 {
                let m = random_matrix(&mut rng, d);
                let rows: Vec<Vec<Complex64>> =
                    (0..d).map(|r| (0..d).map(|k| m.get(r, k)).collect()).collect();
                let want = cofactor_det(&rows);
                let got = det_complex(&m).unwrap().value();
                assert!((got - want).norm() <= 1e-12 * want.norm(), "{got} vs {want}");
            }
        }
    }

    #[test]
    fn det_singular_flagged() {
        let m = ComplexMatrix::new(2, vec![c(1.0, 1.0), c(2.0, 2.0), c(1.0, 1.0), c(2.0, 2.0)]).unwrap();
        assert!(matches!(det_complex(&m), Err(Error::Singular(_))));
        assert!(ComplexMatrix::new(2, vec![c(1.0, 0.0); 3]).is_err());
        assert!(ComplexMatrix::new(1, vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn vandermonde_small() {
        assert_eq!(vandermonde(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(vandermonde(&[0.5, 0.5]), 0.0);
        assert!((vandermonde(&[0.5, 0.1]) + 0.4).abs() < 1e-16);
        assert_eq!(vandermonde(&[0.7]), 1.0);
        // log path for long inputs
        let v: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let mut direct = 1.0;
        for k in 0..v.len() {
            for j in 0..k {
                direct *= v[k] - v[j];
            }
        }
        assert!((vandermonde(&v) - direct).abs() < 1e-12 * direct.abs());
        let dup = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.2];
        assert_eq!(vandermonde(&dup), 0.0);
    }

    #[test]
    fn vandermonde_limit_examples() {
        let (lhs, rhs) = vandermonde_limit_check(2, 1, &[0.3]).unwrap();
        assert!((lhs + 0.3).abs() < 1e-15 && (rhs + 0.3).abs() < 1e-15);
        for (m, n, lam) in [(3, 1, vec![0.5]), (4, 2, vec![0.2, 0.7])] {
            let (lhs, rhs) = vandermonde_limit_check(m, n, &lam).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0), "{m},{n}");
        }
        assert!(vandermonde_limit_check(2, 2, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn vandermonde_limit_hand_expansion() {
        // m = 3, n = 1: Δ_3 = (λ2-λ1)(λ3-λ1)(λ3-λ2); d/dλ3 at λ2 = λ3 = 0 gives
        // d/dλ3[(−λ1)(λ3−λ1)λ3] at λ3=0 = λ1^2.
        let (lhs, _) = vandermonde_limit_check(3, 1, &[0.5]).unwrap();
        assert!((lhs - 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn row_swaps_flip_sign(seed in 0u64..500, d in 2usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = random_matrix(&mut rng, d);
            let mut perm: Vec<usize> = (0..d).collect();
            let mut parity = 1.0;
            for i in (1..d).rev() {
                let j = rng.random_range(0..=i);
                if j != i {
                    perm.swap(i, j);
                    parity = -parity;
                }
            }
            let base = det_complex(&m).unwrap().value();
            let permuted = det_complex(&m.permute_rows(&perm).unwrap()).unwrap().value();
            prop_assert!((permuted - base * parity).norm() <= 1e-12 * base.norm());
        }

        #[test]
        fn vandermonde_equals_moment_determinant(seed in 0u64..200, d in 1usize..=6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // jittered but separated nodes, shuffled
            let mut v: Vec<f64> = (0..d).map(|k| 0.3 * k as f64 + rng.random_range(0.0..0.2)).collect();
            for i in (1..d).rev() {
                v.swap(i, rng.random_range(0..=i));
            }
            let m = ComplexMatrix::from_fn(d, |j, k| c(v[k].powi(j as i32), 0.0)).unwrap();
            let det = det_complex(&m).unwrap().value();
            let want = vandermonde(&v);
            prop_assert!((det.re - want).abs() <= 1e-10 * want.abs() && det.im.abs() <= 1e-10 * want.abs());
        }

        #[test]
        fn limit_identity_holds(seed in 0u64..200, which in 0usize..5) {
            let (m, n) = [(2, 1), (3, 1), (3, 2), (4, 2), (5, 3)][which];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lam: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
            let (lhs, rhs) = vandermonde_limit_check(m, n, &lam).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn generic_lu_agrees_across_precisions() {
        let m = ComplexMatrix::from_fn(4, |i, j| {
            Complex64::new(1.0 / (i + j + 1) as f64, 0.1 * (i as f64 - j as f64))
        })
        .unwrap();
        let plain = det_complex(&m).unwrap().value();
        let double = det_lu(4, m.entries().to_vec()).unwrap();
        let extended = det_lu(4, m.entries().iter().map(|&z| CDd::from(z)).collect()).unwrap();
        assert!((double - plain).norm() < 1e-12 * plain.norm());
        assert!((extended.to_c64() - plain).norm() < 1e-12 * plain.norm());
        assert!(hadamard_ratio(4, m.entries(), plain) >= 1.0);
        assert!(det_lu::<Complex64>(3, vec![Complex64::new(1.0, 0.0); 9]).is_err());
    }
}
