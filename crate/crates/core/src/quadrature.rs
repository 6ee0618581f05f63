//! Gauss–Jacobi rules on the unit interval.
//!
//! Nodes and weights come from the Golub–Welsch eigenproblem of the Jacobi
//! matrix, solved with implicit QL iterations that track only the first
//! component of each eigenvector.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::specfun::ln_beta;

/// Rule for ∫₀¹ x^a (1-x)^b f(x) dx ≈ Σ w_i f(x_i).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussJacobi {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    a: f64,
    b: f64,
}

impl GaussJacobi {
    /// `count` nodes for the weight x^a (1-x)^b on [0, 1].
    pub fn unit_interval(count: usize, a: f64, b: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::Parameter("quadrature needs at least one node".into()));
        }
        if !(a > -1.0 && b > -1.0) {
            return Err(Error::Parameter(format!(
                "Jacobi exponents must exceed -1, got ({a}, {b})"
            )));
        }
        // On [-1, 1] the weight is (1-t)^alpha (1+t)^beta with t = 2x - 1.
        let (alpha, beta) = (b, a);
        let ab = alpha + beta;
        let mut diag = vec![0.0; count];
        let mut off = vec![0.0; count];
        diag[0] = (beta - alpha) / (ab + 2.0);
        for k in 1..count {
            let kf = k as f64;
            let s = 2.0 * kf + ab;
            diag[k] = (beta * beta - alpha * alpha) / (s * (s + 2.0));
            let num = 4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab);
            let den = s * s * (s + 1.0) * (s - 1.0);
            off[k - 1] = (num / den).sqrt();
        }
        let mut first = vec![0.0; count];
        first[0] = 1.0;
        tridiagonal_ql(&mut diag, &mut off, &mut first)?;

        let mu0 = ln_beta(a + 1.0, b + 1.0)?.exp();
        let mut pairs: Vec<(f64, f64)> = diag
            .iter()
            .zip(&first)
            .map(|(&t, &z)| ((t + 1.0) / 2.0, mu0 * z * z))
            .collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(Self { nodes, weights, a, b })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exponents(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<T>(&self, mut f: impl FnMut(f64) -> T) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
    {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::default(), |acc, (&x, &w)| acc + f(x) * w)
    }
}

type RuleKey = (usize, u32, u32);

/// Shared rule for integer exponents; rules are built once per key.
pub fn cached_rule(count: usize, a: u32, b: u32) -> Result<Arc<GaussJacobi>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<GaussJacobi>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (count, a, b);
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&key) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(GaussJacobi::unit_interval(count, a as f64, b as f64)?);
    cache
        .lock()
        .expect("rule cache poisoned")
        .entry(key)
        .or_insert_with(|| rule.clone());
    Ok(rule)
}

// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
// `off[i]` couples rows i and i+1; `first` accumulates the first row of the
// eigenvector matrix.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], first: &mut [f64]) -> Result<()> {
    let n = diag.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NonConvergence {
                    terms: iter,
                    context: "Jacobi matrix eigenvalues".into(),
                });
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let f = first[i + 1];
                first[i + 1] = s * first[i] + c * f;
                first[i] = c * first[i] - s * f;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}
