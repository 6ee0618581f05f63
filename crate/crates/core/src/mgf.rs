//! Exact moment generating function M(κ) = E[exp(iκI)] of the mutual
//! information, its moments and the ergodic capacity.
//!
//! Three determinant forms are used:
//!
//! * `m <= n`: `M = m! C_{m,n} K_m(κ) det[g_{j,k}] / Δ_m(q)`
//! * `m > n`:  `M = n! C_{n,m} K_m(κ) det[h_{j,k}] / (Δ_m(q) G(m-n+1))`
//! * equal power `q_j = q`: `M = m! C_{m,n} det[t_{j,k}]`, with `m` and `n`
//!   interchanged when `m > n`.
//!
//! Every hypergeometric entry is an Euler integral
//! `∫₀¹ λ^{a-1} (1-λ)^{e-1} (1+qλ)^p dλ`; it is evaluated in closed form
//! (Beta times ₂F₁) and cross-checked against Gauss–Jacobi quadrature.
//!
//! Rows belonging to coincident or nearly coincident `q` values are replaced by
//! divided differences built from Taylor coefficients of the kernels around
//! the cluster centre, which is the confluent limit when the values coincide
//! exactly and stays well conditioned when they are merely close.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::ddouble::{CDd, Dd};
use crate::error::{Error, Result};
use crate::linalg::{det_lu, hadamard_ratio, vandermonde_log, LuScalar};
use crate::quadrature::cached_rule;
use crate::specfun::{
    barnes_g_int, digamma, gauss_2f1_dd, gauss_2f1_with_loss, ln_beta, ln_factorial, SeriesControl,
};

/// Relative spread below which all `q` are treated as one equal-power value.
pub const EQUAL_POWER_TOL: f64 = 1e-8;
/// Relative gap below which neighbouring `q` values share a Taylor cluster.
pub const CLUSTER_TOL: f64 = 1e-3;
/// Closed-form and quadrature kernels must agree to this (relative to the L1
/// size of the integrand) or evaluation fails.
pub const KERNEL_FAIL_TOL: f64 = 1e-8;

/// Channel dimensions and the eigenvalues of the transmit covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    m: usize,
    n: usize,
    l: usize,
    q: Vec<f64>,
}

impl ChannelConfig {
    pub fn new(m: usize, n: usize, l: usize, q: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Config(format!("m and n must be >= 1 (m={m}, n={n})")));
        }
        if l < m + n {
            return Err(Error::Config(format!("l >= m + n violated (l={l}, m+n={})", m + n)));
        }
        if q.len() != m {
            return Err(Error::Config(format!(
                "q has {} entries but m = {m}",
                q.len()
            )));
        }
        if let Some(bad) = q.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::Config(format!("q entries must be finite and > 0, got {bad}")));
        }
        Ok(Self { m, n, l, q })
    }

    /// `q_j = rho / m` for every mode.
    pub fn equal_power(m: usize, n: usize, l: usize, rho: f64) -> Result<Self> {
        Self::new(m, n, l, vec![rho / m.max(1) as f64; m])
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// Total power ρ = Σ q_j.
    pub fn rho(&self) -> f64 {
        self.q.iter().sum()
    }

    pub fn is_equal_power(&self) -> bool {
        let max = self.q.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.q.iter().cloned().fold(f64::MAX, f64::min);
        max - min <= EQUAL_POWER_TOL * max
    }

    pub fn with_q(&self, q: Vec<f64>) -> Result<Self> {
        Self::new(self.m, self.n, self.l, q)
    }
}

impl fmt::Display for ChannelConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q: Vec<String> = self.q.iter().map(|x| x.to_string()).collect();
        write!(f, "m={} n={} l={} q={}", self.m, self.n, self.l, q.join(","))
    }
}

/// First three raw moments (nats) plus variance and skewness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSet {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub sigma2: f64,
    pub skewness: f64,
}

impl MomentSet {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

/// Both evaluations of one kernel entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRoutes {
    pub closed: Complex64,
    pub quadrature: Complex64,
    /// |closed - quadrature| divided by ∫ weight·|integrand|.
    pub gap: f64,
}

impl KernelRoutes {
    fn checked(self) -> Result<Complex64> {
        if self.gap <= KERNEL_FAIL_TOL {
            Ok(self.closed)
        } else {
            Err(Error::KernelMismatch {
                closed: format!("{}", self.closed),
                quadrature: format!("{}", self.quadrature),
                gap: self.gap,
            })
        }
    }
}

fn binomial<F: LuScalar>(p: Complex64, r: u32) -> F {
    let mut acc = F::from(Complex64::new(1.0, 0.0));
    for i in 0..r {
        acc = acc * F::from(p - i as f64) / F::from(Complex64::new((i + 1) as f64, 0.0));
    }
    acc
}

fn series_control(w: f64) -> SeriesControl {
    let ctl = SeriesControl {
        rel_tol: 1e-16,
        ..SeriesControl::default()
    };
    if w <= 0.5 {
        ctl
    } else {
        ctl.with_min_terms((60.0 / -w.ln()).ceil() as usize + 1000)
    }
}

/// Series cancellation above which the closed form is redone in
/// double-double arithmetic.
const SERIES_LOSS_LIMIT: f64 = 1e2;

// (A-1)! (E-1)! / (A+E-1)! for positive integers, in double-double.
fn beta_int_dd(a: u32, e: u32) -> Dd {
    let mut acc = Dd::ONE;
    for i in 1..e {
        acc = acc * i as f64;
    }
    for j in a..a + e {
        acc = acc / j as f64;
    }
    acc
}

/// Closed form of the r-th Taylor coefficient of the Euler integral in
/// double-double arithmetic.
fn closed_kernel_dd(a: u32, e: u32, p: Complex64, q: f64, deriv: u32) -> Result<CDd> {
    let aa = a + deriv;
    let hyper = gauss_2f1_dd(
        Complex64::new(aa as f64, 0.0),
        Complex64::new(deriv as f64, 0.0) - p,
        Complex64::new((aa + e) as f64, 0.0),
        -q,
        10_000,
    )?;
    Ok(binomial::<CDd>(p, deriv) * hyper.scale(beta_int_dd(aa, e)))
}

/// Closed form in double precision, falling back to double-double when the
/// series cancels noticeably.
fn closed_kernel(a: u32, e: u32, p: Complex64, q: f64, deriv: u32) -> Result<Complex64> {
    let aa = a + deriv;
    let (hyper, loss) = gauss_2f1_with_loss(
        Complex64::new(aa as f64, 0.0),
        Complex64::new(deriv as f64, 0.0) - p,
        Complex64::new((aa + e) as f64, 0.0),
        -q,
        &series_control(q / (1.0 + q)),
    )?;
    if loss > SERIES_LOSS_LIMIT {
        return Ok(closed_kernel_dd(a, e, p, q, deriv)?.to_c64());
    }
    let beta = ln_beta(aa as f64, e as f64)?.exp();
    Ok(binomial::<Complex64>(p, deriv) * beta * hyper)
}

// Gauss–Jacobi node count: the integrand (1+qλ)^p has a branch point at
// λ = -1/q, which fixes the Bernstein-ellipse convergence rate; oscillation
// from Im p costs extra nodes.
fn node_count(base: usize, q: f64, im_p: f64) -> usize {
    let x0 = 1.0 + 2.0 / q;
    let rho = x0 + (x0 * x0 - 1.0).sqrt();
    let need = (37.0 + 1.6 * im_p.abs()) / (2.0 * rho.ln());
    base.max(need.ceil() as usize).min(MAX_NODES)
}

const MAX_NODES: usize = 4000;

/// Evaluate `(1/r!) d^r/dq^r ∫₀¹ λ^{a-1}(1-λ)^{e-1}(1+qλ)^p dλ` both in
/// closed form and by quadrature.
pub fn beta_kernel_routes(
    a: u32,
    e: u32,
    p: Complex64,
    q: f64,
    deriv: u32,
    base_nodes: usize,
) -> Result<KernelRoutes> {
    if a == 0 || e == 0 {
        return Err(Error::Parameter(format!("kernel exponents a={a}, e={e} must be >= 1")));
    }
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::Domain(format!("kernel needs q >= 0, got {q}")));
    }
    let closed = closed_kernel(a, e, p, q, deriv)?;
    let binom = binomial::<Complex64>(p, deriv);
    let aa = a + deriv;

    let expo = p - deriv as f64;
    let mut count = node_count(base_nodes, q, p.im);
    loop {
        let rule = cached_rule(count, aa - 1, e - 1)?;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut l1 = 0.0;
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            let v = (expo * (q * x).ln_1p()).exp();
            sum += v * w;
            l1 += v.norm() * w;
        }
        let quadrature = binom * sum;
        let scale = (binom.norm() * l1).max(f64::MIN_POSITIVE);
        let routes = KernelRoutes {
            closed,
            quadrature,
            gap: (closed - quadrature).norm() / scale,
        };
        // a gap can mean an under-resolved oscillation; refine before
        // reporting disagreement
        if routes.gap <= KERNEL_FAIL_TOL * 1e-2 || count >= MAX_NODES {
            return Ok(routes);
        }
        count = (2 * count).min(MAX_NODES);
    }
}

fn base_nodes(cfg: &ChannelConfig) -> usize {
    2 * (cfg.l + cfg.m) + 40
}

fn s_of(kappa: f64) -> Complex64 {
    Complex64::new(0.0, kappa)
}

/// Kernel entry selector for [`kernel_routes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// g_{j,k}, `m <= n`, column `k` in 1..=m.
    G { k: usize },
    /// t_{j,k}, equal power, indices in 1..=min(m, n).
    T { j: usize, k: usize },
    /// h_{j,k}, `m > n`, column `k` in 1..=m.
    H { k: usize },
}

/// Both routes for one kernel entry at power value `q`.
pub fn kernel_routes(cfg: &ChannelConfig, kind: KernelKind, q: f64, kappa: f64) -> Result<KernelRoutes> {
    let (m, n, l) = (cfg.m, cfg.n, cfg.l);
    let e = (l - m - n + 1) as u32;
    let s = s_of(kappa);
    match kind {
        KernelKind::G { k } => {
            if m > n {
                return Err(Error::Parameter("g kernels need m <= n".into()));
            }
            if k == 0 || k > m {
                return Err(Error::Parameter(format!("column {k} outside 1..={m}")));
            }
            beta_kernel_routes((k + n - m) as u32, e, s + (m - 1) as f64, q, 0, base_nodes(cfg))
        }
        KernelKind::T { j, k } => {
            let (mm, nn) = (m.min(n), m.max(n));
            if j == 0 || k == 0 || j > mm || k > mm {
                return Err(Error::Parameter(format!("t index ({j},{k}) outside 1..={mm}")));
            }
            beta_kernel_routes((j + k + nn - mm - 1) as u32, e, s, q, 0, base_nodes(cfg))
        }
        KernelKind::H { k } => {
            if m <= n {
                return Err(Error::Parameter("h kernels need m > n".into()));
            }
            if k == 0 || k > m {
                return Err(Error::Parameter(format!("column {k} outside 1..={m}")));
            }
            if k <= m - n {
                let v = poly_coefficient::<Complex64>(m, k, s) * q.powi(k as i32 - 1);
                return Ok(KernelRoutes { closed: v, quadrature: v, gap: 0.0 });
            }
            beta_kernel_routes((k + n - m) as u32, e, s + (m - 1) as f64, q, 0, base_nodes(cfg))
        }
    }
}

/// g_{j,k}(κ) at `q_j` (closed form, cross-checked).
pub fn kernel_g(q_j: f64, k: usize, kappa: f64, cfg: &ChannelConfig) -> Result<Complex64> {
    kernel_routes(cfg, KernelKind::G { k }, q_j, kappa)?.checked()
}

/// t_{j,k}(κ) at common power `q`.
pub fn kernel_t(j: usize, k: usize, kappa: f64, q: f64, cfg: &ChannelConfig) -> Result<Complex64> {
    kernel_routes(cfg, KernelKind::T { j, k }, q, kappa)?.checked()
}

/// h_{j,k}(κ) at `q_j`.
pub fn kernel_h(q_j: f64, k: usize, kappa: f64, cfg: &ChannelConfig) -> Result<Complex64> {
    kernel_routes(cfg, KernelKind::H { k }, q_j, kappa)?.checked()
}

// (iκ + m - k + 1)_{k-1} as a rising product
fn poly_coefficient<F: LuScalar>(m: usize, k: usize, s: Complex64) -> F {
    let mut acc = F::from(Complex64::new(1.0, 0.0));
    for i in 0..k - 1 {
        acc = acc * F::from(s + (m + i + 1 - k) as f64);
    }
    acc
}

/// K_m(κ) = (-1)^{m(m-1)/2} Π_{i=1}^{m-1} ((-iκ - m + i)/i)^{i-m}.
///
/// All exponents are integers, so no branch choice enters.
pub fn prefactor_k(m: usize, kappa: f64) -> Complex64 {
    let sign = if (m * (m.saturating_sub(1)) / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut acc = Complex64::new(sign, 0.0);
    for i in 1..m {
        let base = (Complex64::new(-(m as f64) + i as f64, -kappa)) / i as f64;
        acc *= base.powi(i as i32 - m as i32);
    }
    acc
}

/// ln C_{α,β} = Σ_{i=1}^{α} ln[Γ(l-i+1) / (Γ(i+1) Γ(l-β-i+1) Γ(β-i+1))].
pub fn norm_c_log(alpha: usize, beta: usize, l: usize) -> Result<f64> {
    if l < alpha + beta || beta < alpha {
        return Err(Error::Domain(format!(
            "C_(alpha,beta) needs beta >= alpha and l >= alpha + beta (alpha={alpha}, beta={beta}, l={l})"
        )));
    }
    let mut acc = 0.0;
    for i in 1..=alpha {
        // Γ(x) = (x-1)! for the positive integers reached here
        acc += ln_factorial((l - i) as u32)
            - ln_factorial(i as u32)
            - ln_factorial((l - beta - i) as u32)
            - ln_factorial((beta - i) as u32);
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy)]
enum Column {
    /// Euler integral with λ exponent a-1.
    Beta { a: u32 },
    /// (iκ+m-k+1)_{k-1} q^{k-1}, stored by k.
    Poly { k: usize },
}

#[derive(Debug, Clone)]
struct Cluster {
    center: f64,
    offsets: Vec<f64>,
    /// highest Taylor order retained
    order: usize,
}

#[derive(Debug, Clone)]
enum Plan {
    EqualPower {
        mm: usize,
        q: f64,
        ln_scale: f64,
    },
    Determinant {
        columns: Vec<Column>,
        clusters: Vec<Cluster>,
        /// ln(m! C / G) - ln Δ between clusters
        ln_scale: f64,
    },
}

/// Which assembly to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assembly {
    /// Equal-power shortcut when all q coincide, determinant form otherwise.
    Auto,
    /// Always the general determinant form (with confluent clusters).
    Determinant,
}

/// Precomputed constants for repeated MGF evaluation of one configuration.
#[derive(Debug, Clone)]
pub struct MgfEvaluator {
    cfg: ChannelConfig,
    plan: Plan,
}

impl MgfEvaluator {
    pub fn new(cfg: &ChannelConfig) -> Result<Self> {
        Self::with_assembly(cfg, Assembly::Auto)
    }

    pub fn with_assembly(cfg: &ChannelConfig, assembly: Assembly) -> Result<Self> {
        let (m, n, l) = (cfg.m, cfg.n, cfg.l);
        if assembly == Assembly::Auto && cfg.is_equal_power() {
            let (mm, nn) = (m.min(n), m.max(n));
            let q = cfg.q.iter().sum::<f64>() / m as f64;
            let ln_scale = ln_factorial(mm as u32) + norm_c_log(mm, nn, l)?;
            return Ok(Self {
                cfg: cfg.clone(),
                plan: Plan::EqualPower { mm, q, ln_scale },
            });
        }

        let columns: Vec<Column> = (1..=m)
            .map(|k| {
                if m <= n {
                    Column::Beta { a: (k + n - m) as u32 }
                } else if k <= m - n {
                    Column::Poly { k }
                } else {
                    Column::Beta { a: (k + n - m) as u32 }
                }
            })
            .collect();

        let mut sorted = cfg.q.clone();
        sorted.sort_by(f64::total_cmp);
        let mut groups: Vec<Vec<f64>> = Vec::new();
        for &x in &sorted {
            match groups.last_mut() {
                Some(g) if x - g[g.len() - 1] <= CLUSTER_TOL * x => g.push(x),
                _ => groups.push(vec![x]),
            }
        }
        let clusters: Vec<Cluster> = groups.iter().map(|g| make_cluster(g, m)).collect();

        let mut ln_inter = 0.0;
        for (ci, a) in groups.iter().enumerate() {
            for b in &groups[ci + 1..] {
                for &x in a {
                    for &y in b {
                        ln_inter += (y - x).ln();
                    }
                }
            }
        }
        let raw = vandermonde_log(&sorted);
        let scale = sorted[sorted.len() - 1].max(1.0).ln() * (m * (m - 1) / 2) as f64;
        if raw.ln_abs - scale < (1e-10f64).ln() {
            log::warn!(
                "q values nearly coincide (|Δ(q)| relative {:.3e}); using confluent expansion",
                (raw.ln_abs - scale).exp()
            );
        }

        let ln_const = if m <= n {
            ln_factorial(m as u32) + norm_c_log(m, n, l)?
        } else {
            ln_factorial(n as u32) + norm_c_log(n, m, l)? - barnes_g_int((m - n + 1) as u32)?.ln_abs
        };
        Ok(Self {
            cfg: cfg.clone(),
            plan: Plan::Determinant {
                columns,
                clusters,
                ln_scale: ln_const - ln_inter,
            },
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    /// True when the equal-power shortcut is in use.
    pub fn is_equal_power_path(&self) -> bool {
        matches!(self.plan, Plan::EqualPower { .. })
    }

    /// M(κ). Entries are assembled in double precision; when the determinant
    /// shows strong cancellation it is recomputed in double-double.
    pub fn eval(&self, kappa: f64) -> Result<Complex64> {
        let (dim, entries) = self.entries::<Complex64>(kappa)?;
        let det = det_lu(dim, entries.clone())?;
        if hadamard_ratio(dim, &entries, det) <= HADAMARD_LIMIT {
            return Ok(self.finish(kappa, det));
        }
        self.eval_extended(kappa)
    }

    /// M(κ) with the determinant always assembled in double-double.
    pub fn eval_extended(&self, kappa: f64) -> Result<Complex64> {
        let (dim, entries) = self.entries::<CDd>(kappa)?;
        let det = det_lu(dim, entries)?.to_c64();
        Ok(self.finish(kappa, det))
    }

    fn finish(&self, kappa: f64, det: Complex64) -> Complex64 {
        match &self.plan {
            Plan::EqualPower { ln_scale, .. } => det * ln_scale.exp(),
            Plan::Determinant { ln_scale, .. } => prefactor_k(self.cfg.m, kappa) * det * ln_scale.exp(),
        }
    }

    fn entries<F: KernelScalar>(&self, kappa: f64) -> Result<(usize, Vec<F>)> {
        if !kappa.is_finite() {
            return Err(Error::Domain(format!("kappa must be finite, got {kappa}")));
        }
        let (m, n, l) = (self.cfg.m, self.cfg.n, self.cfg.l);
        let e = (l - m - n + 1) as u32;
        let s = s_of(kappa);
        let base = base_nodes(&self.cfg);
        match &self.plan {
            Plan::EqualPower { mm, q, .. } => {
                let nn = m.max(n);
                let mut entries = Vec::with_capacity(mm * mm);
                for j in 1..=*mm {
                    for k in 1..=*mm {
                        let a = (j + k + nn - mm - 1) as u32;
                        entries.push(F::kernel(a, e, s, *q, 0, base)?);
                    }
                }
                Ok((*mm, entries))
            }
            Plan::Determinant { columns, clusters, .. } => {
                let mut entries = Vec::with_capacity(m * m);
                for cluster in clusters {
                    entries.extend(self.cluster_rows::<F>(cluster, columns, s)?);
                }
                Ok((m, entries))
            }
        }
    }

    // Divided-difference rows of one cluster, row-major (g rows of m columns).
    fn cluster_rows<F: KernelScalar>(&self, cluster: &Cluster, columns: &[Column], s: Complex64) -> Result<Vec<F>> {
        let (m, n, l) = (self.cfg.m, self.cfg.n, self.cfg.l);
        let g = cluster.offsets.len();
        let order = cluster.order;
        let e = (l - m - n + 1) as u32;
        let p = s + (m - 1) as f64;
        let base = base_nodes(&self.cfg);
        let real = |x: f64| F::from(Complex64::new(x, 0.0));

        // taylor[col][t] = (1/t!) f_col^{(t)}(centre)
        let mut taylor: Vec<Vec<F>> = Vec::with_capacity(columns.len());
        for col in columns {
            let coeffs = match *col {
                Column::Beta { a } => (0..=order)
                    .map(|t| F::kernel(a, e, p, cluster.center, t as u32, base))
                    .collect::<Result<Vec<_>>>()?,
                Column::Poly { k } => {
                    let lead: F = poly_coefficient(m, k, s);
                    let deg = k - 1;
                    (0..=order)
                        .map(|t| {
                            if t > deg {
                                return real(0.0);
                            }
                            let binom = (ln_factorial(deg as u32)
                                - ln_factorial(t as u32)
                                - ln_factorial((deg - t) as u32))
                            .exp()
                            .round();
                            let mut v = lead * real(binom);
                            for _ in 0..deg - t {
                                v = v * real(cluster.center);
                            }
                            v
                        })
                        .collect()
                }
            };
            taylor.push(coeffs);
        }

        let h = complete_homogeneous(&cluster.offsets, order);
        let mut rows = Vec::with_capacity(g * m);
        for r in 0..g {
            for coeffs in &taylor {
                let mut acc = real(0.0);
                for t in r..=order {
                    acc = acc + coeffs[t] * real(h[r][t - r]);
                }
                rows.push(acc);
            }
        }
        Ok(rows)
    }
}

/// Hadamard ratio above which the determinant is redone in double-double.
const HADAMARD_LIMIT: f64 = 1e2;

/// Scalar types the MGF determinant can be assembled in.
trait KernelScalar: LuScalar {
    fn kernel(a: u32, e: u32, p: Complex64, q: f64, deriv: u32, base_nodes: usize) -> Result<Self>;
}

impl KernelScalar for Complex64 {
    fn kernel(a: u32, e: u32, p: Complex64, q: f64, deriv: u32, base_nodes: usize) -> Result<Self> {
        beta_kernel_routes(a, e, p, q, deriv, base_nodes)?.checked()
    }
}

// The double pass has already cross-checked every entry against quadrature.
impl KernelScalar for CDd {
    fn kernel(a: u32, e: u32, p: Complex64, q: f64, deriv: u32, _base_nodes: usize) -> Result<Self> {
        closed_kernel_dd(a, e, p, q, deriv)
    }
}

fn make_cluster(values: &[f64], m: usize) -> Cluster {
    let g = values.len();
    let center = values.iter().sum::<f64>() / g as f64;
    let offsets: Vec<f64> = values.iter().map(|x| x - center).collect();
    let spread = offsets.iter().fold(0.0f64, |acc, d| acc.max(d.abs()));
    let mut order = g - 1;
    if spread > 0.0 {
        // Taylor coefficients shrink like (centre + 1)^{-t}; the divided
        // differences weight them by at most C(t, r) spread^{t-r}.
        let ratio = spread / (center + 1.0);
        let mut extra = 0usize;
        loop {
            let t = (g - 1 + extra) as f64;
            let bound = (t + 1.0).powi((g + m) as i32) * ratio.powi(extra as i32);
            if extra > 0 && bound < 1e-17 || extra >= 60 {
                break;
            }
            extra += 1;
        }
        order += extra;
    }
    Cluster { center, offsets, order }
}

// h[r][j] = complete homogeneous symmetric polynomial of degree j in
// offsets[0..=r].
fn complete_homogeneous(offsets: &[f64], max_degree: usize) -> Vec<Vec<f64>> {
    let g = offsets.len();
    let mut h = vec![vec![0.0; max_degree + 1]; g];
    for (r, &x) in offsets.iter().enumerate() {
        h[r][0] = 1.0;
        for j in 1..=max_degree {
            let prev = if r == 0 {
                if j == 0 { 1.0 } else { 0.0 }
            } else {
                h[r - 1][j]
            };
            h[r][j] = prev + x * h[r][j - 1];
        }
    }
    h
}

/// M(κ) for one configuration.
pub fn mgf_eval(cfg: &ChannelConfig, kappa: f64) -> Result<Complex64> {
    MgfEvaluator::new(cfg)?.eval(kappa)
}

/// Equal-power closed form for `m` modes of common power `q`, with the m↔n
/// interchange applied when `m > n`.
pub fn mgf_equal_power(m: usize, n: usize, l: usize, q: f64, kappa: f64) -> Result<Complex64> {
    let cfg = ChannelConfig::new(m, n, l, vec![q; m])?;
    MgfEvaluator::new(&cfg)?.eval(kappa)
}

/// Cut-off choice for the κ grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    /// Smallest L beyond which |M(κ)| stays under the threshold.
    Auto { threshold: f64 },
    Fixed(f64),
}

impl Cutoff {
    pub const DEFAULT_THRESHOLD: f64 = 1e-3;

    pub fn auto() -> Self {
        Cutoff::Auto {
            threshold: Self::DEFAULT_THRESHOLD,
        }
    }
}

const MAX_CUTOFF: f64 = 500.0;
const CUTOFF_PROBE: f64 = 0.25;

/// Samples of M on the symmetric grid κ_i = i δκ, |i| <= N.
#[derive(Debug, Clone, PartialEq)]
pub struct MgfGrid {
    pub cutoff: f64,
    pub step: f64,
    pub kappas: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl MgfGrid {
    pub fn len(&self) -> usize {
        self.kappas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappas.is_empty()
    }

    /// Checks symmetry, conjugate symmetry and M(0) = 1.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let len = self.kappas.len();
        if len.is_multiple_of(2) {
            return Err(Error::Parameter("grid must have odd length".into()));
        }
        let mid = len / 2;
        if self.kappas[mid] != 0.0 || (self.values[mid] - Complex64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::Parameter(format!("M(0) = {} is not 1", self.values[mid])));
        }
        for i in 1..=mid {
            let (lo, hi) = (mid - i, mid + i);
            if self.kappas[lo] != -self.kappas[hi] || (self.values[lo] - self.values[hi].conj()).norm() > tol {
                return Err(Error::Parameter(format!("grid asymmetric at kappa={}", self.kappas[hi])));
            }
        }
        Ok(())
    }
}

/// Find the cut-off L: scan κ upward in steps of 0.25 and stop once |M| has
/// stayed under the threshold over a trailing window of width
/// max(4, L/2) past the last exceedance.
pub fn auto_cutoff(eval: &MgfEvaluator, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Parameter(format!("cut-off threshold must be in (0, 1), got {threshold}")));
    }
    let mut last_above = 0.0f64;
    let mut i = 1u32;
    loop {
        let kappa = i as f64 * CUTOFF_PROBE;
        if kappa > MAX_CUTOFF {
            return Err(Error::Cutoff(MAX_CUTOFF));
        }
        if eval.eval(kappa)?.norm() >= threshold {
            last_above = kappa;
        } else if kappa - last_above >= (0.5 * last_above).max(4.0) {
            return Ok(last_above + CUTOFF_PROBE);
        }
        i += 1;
    }
}

/// Sample M(κ) on a symmetric grid with step `step`.
pub fn mgf_grid(cfg: &ChannelConfig, cutoff: Cutoff, step: f64) -> Result<MgfGrid> {
    let eval = MgfEvaluator::new(cfg)?;
    mgf_grid_with(&eval, cutoff, step)
}

pub fn mgf_grid_with(eval: &MgfEvaluator, cutoff: Cutoff, step: f64) -> Result<MgfGrid> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Parameter(format!("grid step must be > 0, got {step}")));
    }
    let cutoff = match cutoff {
        Cutoff::Fixed(l) if l > 0.0 && l.is_finite() => l,
        Cutoff::Fixed(l) => return Err(Error::Parameter(format!("cut-off must be > 0, got {l}"))),
        Cutoff::Auto { threshold } => auto_cutoff(eval, threshold)?,
    };
    let half = (cutoff / step).round() as usize;
    let positive: Vec<Complex64> = (0..=half)
        .into_par_iter()
        .map(|i| eval.eval(i as f64 * step))
        .collect::<Result<_>>()?;
    let mut kappas = Vec::with_capacity(2 * half + 1);
    let mut values = Vec::with_capacity(2 * half + 1);
    for i in (1..=half).rev() {
        kappas.push(-(i as f64 * step));
        values.push(positive[i].conj());
    }
    for (i, v) in positive.iter().enumerate() {
        kappas.push(i as f64 * step);
        values.push(*v);
    }
    Ok(MgfGrid {
        cutoff: half as f64 * step,
        step,
        kappas,
        values,
    })
}

/// Differentiation step used for moments.
pub const MOMENT_STEP: f64 = 5e-2;
/// Maximum imaginary residue of a moment, relative to max(1, |moment|).
pub const MOMENT_RESIDUE: f64 = 1e-7;

// 7-point central stencils (offsets -3..3)
const D1: [f64; 7] = [-1.0 / 60.0, 9.0 / 60.0, -45.0 / 60.0, 0.0, 45.0 / 60.0, -9.0 / 60.0, 1.0 / 60.0];
const D2: [f64; 7] = [
    2.0 / 180.0,
    -27.0 / 180.0,
    270.0 / 180.0,
    -490.0 / 180.0,
    270.0 / 180.0,
    -27.0 / 180.0,
    2.0 / 180.0,
];
const D3: [f64; 7] = [1.0 / 8.0, -1.0, 13.0 / 8.0, 0.0, -13.0 / 8.0, 1.0, -1.0 / 8.0];

// ln M(κ) with the linear phase κ·shift removed; continuous near κ = 0.
fn shifted_log(eval: &MgfEvaluator, kappa: f64, shift: f64) -> Result<Complex64> {
    let v = eval.eval(kappa)?;
    Ok((v * Complex64::from_polar(1.0, -kappa * shift)).ln())
}

fn phase_shift(eval: &MgfEvaluator) -> Result<f64> {
    let h = 1e-3;
    Ok(eval.eval(h)?.arg() / h)
}

/// Derivatives of the shifted cumulant function at 0 up to `order` (1..=3),
/// Richardson-combined from steps h and h/2.
fn log_derivatives(eval: &MgfEvaluator, order: usize, shift: f64) -> Result<Vec<Complex64>> {
    let stencil = |h: f64| -> Result<Vec<Complex64>> {
        let vals: Vec<Complex64> = (-3i32..=3)
            .map(|i| {
                if i == 0 {
                    Ok(Complex64::new(0.0, 0.0))
                } else {
                    shifted_log(eval, i as f64 * h, shift)
                }
            })
            .collect::<Result<_>>()?;
        let apply = |w: &[f64; 7], pow: i32| {
            vals.iter().zip(w).map(|(v, c)| v * *c).sum::<Complex64>() / h.powi(pow)
        };
        Ok(vec![apply(&D1, 1), apply(&D2, 2), apply(&D3, 3)][..order].to_vec())
    };
    let coarse = stencil(MOMENT_STEP)?;
    let fine = stencil(MOMENT_STEP / 2.0)?;
    let accuracy = [6, 6, 4];
    Ok((0..order)
        .map(|i| {
            let f = 2f64.powi(accuracy[i]);
            (fine[i] * f - coarse[i]) / (f - 1.0)
        })
        .collect())
}

fn real_part(order: usize, value: Complex64) -> Result<f64> {
    let limit = MOMENT_RESIDUE * value.re.abs().max(1.0);
    if value.im.abs() > limit {
        return Err(Error::Differentiation {
            order,
            residue: value.im.abs(),
            limit,
        });
    }
    Ok(value.re)
}

/// μ₁, μ₂, μ₃, σ² and skewness from numerical derivatives of ln M at 0.
pub fn moments(cfg: &ChannelConfig) -> Result<MomentSet> {
    moments_with(&MgfEvaluator::new(cfg)?)
}

pub fn moments_with(eval: &MgfEvaluator) -> Result<MomentSet> {
    let shift = phase_shift(eval)?;
    let d = log_derivatives(eval, 3, shift)?;
    let i = Complex64::new(0.0, 1.0);
    // cumulants: k1 = K'/i, k2 = K''/i^2, k3 = K'''/i^3
    let k1 = real_part(1, d[0] / i)? + shift;
    let k2 = real_part(2, -d[1])?;
    let k3 = real_part(3, d[2] * i)?;
    if !(k2 > 0.0) {
        return Err(Error::Differentiation {
            order: 2,
            residue: k2,
            limit: 0.0,
        });
    }
    let mu1 = k1;
    let mu2 = k2 + k1 * k1;
    let mu3 = k3 + 3.0 * k1 * k2 + k1.powi(3);
    Ok(MomentSet {
        mu1,
        mu2,
        mu3,
        sigma2: k2,
        skewness: k3 / k2.powf(1.5),
    })
}

/// Mean mutual information only (first-derivative stencil).
pub fn mean_information(eval: &MgfEvaluator) -> Result<f64> {
    let shift = phase_shift(eval)?;
    let d = log_derivatives(eval, 1, shift)?;
    Ok(real_part(1, d[0] / Complex64::new(0.0, 1.0))? + shift)
}

/// Ergodic capacity, the mean of the mutual information, in nats.
pub fn ergodic_capacity(cfg: &ChannelConfig) -> Result<f64> {
    mean_information(&MgfEvaluator::new(cfg)?)
}

/// Large-ρ approximation of the equal-power ergodic capacity (nats):
/// m ln(ρ/m) + nψ(n) - lψ(l) - (n-m)ψ(n-m) + (l-m)ψ(l-m).
pub fn high_snr_capacity(cfg: &ChannelConfig) -> Result<f64> {
    if !cfg.is_equal_power() {
        return Err(Error::Domain("high-SNR formula needs equal power".into()));
    }
    let (m, n, l) = (cfg.m as f64, cfg.n as f64, cfg.l as f64);
    if cfg.m >= cfg.n {
        return Err(Error::Domain(format!(
            "high-SNR formula needs m < n (m={}, n={})",
            cfg.m, cfg.n
        )));
    }
    let rho = cfg.rho();
    Ok(m * (rho / m).ln() + n * digamma(n)? - l * digamma(l)? - (n - m) * digamma(n - m)?
        + (l - m) * digamma(l - m)?)
}
