//! Reaction terms of the Schelling hydrodynamics.
//!
//! Everything here is a pure function of the threshold `T` and the neighborhood
//! cardinality `K` (or the `K -> infinity` limit):
//!
//! * `kappa(K, T)`, the largest like-valued neighbor count at which a site is
//!   potentially stable;
//! * the binomial and Poisson-binomial tails behind the creation and
//!   annihilation rates `c_0^+`, `c_0^-`;
//! * the lattice reaction `G(i, u)` and its centered form `H(i, v)`;
//! * the scalar reactions `g_K`, `g_inf`, their centered forms `h_K`, `h_inf`,
//!   the primitive `r_K`, the convex potential `H_inf` and its subdifferential;
//! * the potential `gamma_{inf,beta}` and the mixed / segregated phase diagram.
//!
//! `g_K` is defined as `G` evaluated on a constant field, i.e.
//! `(1-p) P_{1-p}[X <= kappa] - p P_p[X <= kappa]` with `X ~ Bin(K, .)`.
//! The variant with a strict inequality in the first term is available as
//! [`g_k_appendix_variant`]; the two differ by one binomial mass.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{NeighborTable, Threshold};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReactionError {
    #[error("threshold T={threshold} leaves no potentially stable count for K={k}")]
    DegenerateThreshold { k: usize, threshold: f64 },
    #[error("neighborhood cardinality must be positive")]
    ZeroCardinality,
    #[error("threshold must lie in [0, 1], got {0}")]
    ThresholdOutOfRange(f64),
    #[error("bound needs |p - p0| > 1/K and |1 - p - p0| > 1/K (p={p}, p0={p0}, K={k})")]
    BoundInapplicable { p: f64, p0: f64, k: usize },
    #[error("spontaneous rate beta must be positive, got {0}")]
    NonPositiveBeta(f64),
    #[error("comparison precondition violated at site {site}: {reason}")]
    NotOrdered { site: usize, reason: &'static str },
    #[error("operation needs a finite neighborhood cardinality")]
    NeedsFiniteK,
    #[error("field value {value} at site {site} outside [{lo}, {hi}]")]
    FieldOutOfRange {
        site: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// Which definition of `kappa` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaConvention {
    /// `min(ceil(KT) - 1, floor(K(1-T)))`: matches the strict inequality `r < T`.
    #[default]
    Ceil,
    /// `min(floor(KT) - 1, floor(K(1-T)))`.
    Floor,
}

/// Neighborhood cardinality, or the `K -> infinity` limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionOrder {
    Finite(usize),
    Limit,
}

/// `kappa(K, T)` under the default convention.
pub fn kappa(k: usize, threshold: f64) -> Result<usize, ReactionError> {
    kappa_with(k, threshold, KappaConvention::Ceil)
}

pub fn kappa_with(
    k: usize,
    threshold: f64,
    convention: KappaConvention,
) -> Result<usize, ReactionError> {
    if k == 0 {
        return Err(ReactionError::ZeroCardinality);
    }
    let t = Threshold::new(threshold).map_err(|_| ReactionError::ThresholdOutOfRange(threshold))?;
    let raw = match convention {
        KappaConvention::Ceil => t.kappa(k),
        KappaConvention::Floor => t.kappa_floor_variant(k),
    };
    usize::try_from(raw).map_err(|_| ReactionError::DegenerateThreshold { k, threshold })
}

/// Threshold data of the reaction: `T`, `K` and the derived `p0`, `rho`, `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReactionSpec {
    threshold: f64,
    order: ReactionOrder,
    convention: KappaConvention,
    /// Negative when the threshold is degenerate (no count is potentially stable).
    kappa: i64,
}

impl ReactionSpec {
    pub fn finite(threshold: f64, k: usize) -> Result<Self, ReactionError> {
        Self::finite_with(threshold, k, KappaConvention::Ceil)
    }

    pub fn finite_with(
        threshold: f64,
        k: usize,
        convention: KappaConvention,
    ) -> Result<Self, ReactionError> {
        if k == 0 {
            return Err(ReactionError::ZeroCardinality);
        }
        let t =
            Threshold::new(threshold).map_err(|_| ReactionError::ThresholdOutOfRange(threshold))?;
        let kappa = match convention {
            KappaConvention::Ceil => t.kappa(k),
            KappaConvention::Floor => t.kappa_floor_variant(k),
        };
        Ok(Self {
            threshold,
            order: ReactionOrder::Finite(k),
            convention,
            kappa: kappa.max(-1),
        })
    }

    pub fn limit(threshold: f64) -> Result<Self, ReactionError> {
        Threshold::new(threshold).map_err(|_| ReactionError::ThresholdOutOfRange(threshold))?;
        Ok(Self {
            threshold,
            order: ReactionOrder::Limit,
            convention: KappaConvention::Ceil,
            kappa: -1,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn order(&self) -> ReactionOrder {
        self.order
    }

    pub fn convention(&self) -> KappaConvention {
        self.convention
    }

    pub fn k(&self) -> Option<usize> {
        match self.order {
            ReactionOrder::Finite(k) => Some(k),
            ReactionOrder::Limit => None,
        }
    }

    /// `kappa(K, T)`; `None` for the limit or a degenerate threshold.
    pub fn kappa(&self) -> Option<usize> {
        match self.order {
            ReactionOrder::Finite(_) => usize::try_from(self.kappa).ok(),
            ReactionOrder::Limit => None,
        }
    }

    /// `p0 = min(T, 1 - T)`.
    pub fn p0(&self) -> f64 {
        p0(self.threshold)
    }

    /// `rho = |T - 1/2|`.
    pub fn rho(&self) -> f64 {
        (self.threshold - 0.5).abs()
    }

    /// `g_K(p)` for finite `K`, `g_inf(p)` in the limit.
    pub fn g(&self, p: f64) -> f64 {
        match self.order {
            ReactionOrder::Finite(k) => g_k_raw(k, self.kappa, p),
            ReactionOrder::Limit => g_inf(p, self.threshold),
        }
    }

    /// `h(q) = 2 g((q+1)/2) + q` on `[-1, 1]`, extended by `-1` / `1` outside.
    pub fn h(&self, q: f64) -> f64 {
        match self.order {
            ReactionOrder::Finite(_) => {
                if q < -1.0 {
                    -1.0
                } else if q > 1.0 {
                    1.0
                } else {
                    2.0 * self.g(0.5 * (q + 1.0)) + q
                }
            }
            ReactionOrder::Limit => h_inf(q, self.rho()),
        }
    }

    /// `r(q) = -int_{1/2}^{(q+1)/2} 4 g(s) ds`.
    pub fn r(&self, q: f64) -> f64 {
        match self.order {
            ReactionOrder::Finite(_) => {
                let upper = 0.5 * (q.clamp(-1.0, 1.0) + 1.0);
                -4.0 * adaptive_simpson(&|s| self.g(s), 0.5, upper, R_QUADRATURE_TOL)
            }
            ReactionOrder::Limit => 0.5 * q * q - h_inf_potential(q, self.rho()),
        }
    }

    /// `G(i, u)`: Poisson-binomial creation/annihilation balance at `site`.
    pub fn lattice_reaction(&self, table: &NeighborTable, u: &[f64], site: usize) -> f64 {
        let mut scratch = TailScratch::default();
        self.lattice_reaction_with(table, u, site, &mut scratch)
    }

    /// [`ReactionSpec::lattice_reaction`] reusing caller-owned buffers.
    pub fn lattice_reaction_with(
        &self,
        table: &NeighborTable,
        u: &[f64],
        site: usize,
        scratch: &mut TailScratch,
    ) -> f64 {
        debug_assert_eq!(self.k(), Some(table.k()), "spec K must match the table");
        let (plus, minus) =
            scratch.tails(table.neighbors(site).iter().map(|&j| u[j as usize]), self.kappa);
        let own = u[site];
        plus * (1.0 - own) - minus * own
    }

    /// `H(i, v) = 2 G(i, (v+1)/2) + v_i` for a centered field `v`.
    pub fn centered_lattice_reaction(&self, table: &NeighborTable, v: &[f64], site: usize) -> f64 {
        let mut scratch = TailScratch::default();
        let (plus, minus) = scratch.tails(
            table
                .neighbors(site)
                .iter()
                .map(|&j| 0.5 * (v[j as usize] + 1.0)),
            self.kappa,
        );
        let own = 0.5 * (v[site] + 1.0);
        2.0 * (plus * (1.0 - own) - minus * own) + v[site]
    }

    /// Whether `G(site, u) >= G(site, v)` (up to `1e-12`) for fields ordered on the
    /// neighborhood of `site` and equal at `site`.
    pub fn monotone_check(
        &self,
        table: &NeighborTable,
        u: &[f64],
        v: &[f64],
        site: usize,
    ) -> Result<bool, ReactionError> {
        if u[site] != v[site] {
            return Err(ReactionError::NotOrdered {
                site,
                reason: "fields differ at the reference site",
            });
        }
        for &j in table.neighbors(site) {
            if u[j as usize] < v[j as usize] {
                return Err(ReactionError::NotOrdered {
                    site: j as usize,
                    reason: "u < v on the neighborhood",
                });
            }
        }
        Ok(self.lattice_reaction(table, u, site) >= self.lattice_reaction(table, v, site) - 1e-12)
    }
}

const R_QUADRATURE_TOL: f64 = 1e-10;

/// Reusable buffers for the Poisson-binomial recurrences in `G`.
#[derive(Debug, Default, Clone)]
pub struct TailScratch {
    minus: Vec<f64>,
    plus: Vec<f64>,
}

impl TailScratch {
    /// `(P[S >= K - kappa], P[S <= kappa])` for `S` a sum of independent Bernoulli(`probs`).
    fn tails(&mut self, probs: impl Iterator<Item = f64>, kappa: i64) -> (f64, f64) {
        if kappa < 0 {
            return (0.0, 0.0);
        }
        let kk = kappa as usize;
        self.minus.clear();
        self.minus.resize(kk + 1, 0.0);
        self.plus.clear();
        self.plus.resize(kk + 1, 0.0);
        self.minus[0] = 1.0;
        self.plus[0] = 1.0;
        let mut n = 0usize;
        for p in probs {
            let q = 1.0 - p;
            let top = kk.min(n + 1);
            for j in (1..=top).rev() {
                self.minus[j] = self.minus[j] * q + self.minus[j - 1] * p;
                self.plus[j] = self.plus[j] * p + self.plus[j - 1] * q;
            }
            self.minus[0] *= q;
            self.plus[0] *= p;
            n += 1;
        }
        if kk >= n {
            return (1.0, 1.0);
        }
        let plus: f64 = self.plus.iter().sum();
        let minus: f64 = self.minus.iter().sum();
        (plus.min(1.0), minus.min(1.0))
    }
}

/// `P(S <= k)` for `S` a sum of independent Bernoulli(`probs[j]`), by the
/// `O(K k)` convolution recurrence truncated above `k`.
pub fn poisson_binomial_cdf(probs: &[f64], k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let kk = k as usize;
    if kk >= probs.len() {
        return 1.0;
    }
    let mut dist = vec![0.0; kk + 1];
    dist[0] = 1.0;
    for (n, &p) in probs.iter().enumerate() {
        let q = 1.0 - p;
        for j in (1..=kk.min(n + 1)).rev() {
            dist[j] = dist[j] * q + dist[j - 1] * p;
        }
        dist[0] *= q;
    }
    dist.iter().sum::<f64>().min(1.0)
}

/// `P(X <= k)` for `X ~ Bin(n, p)`, by the pmf ratio recurrence with running rescaling.
pub fn binomial_cdf(n: usize, p: f64, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let k = k as usize;
    if k >= n {
        return 1.0;
    }
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let ratio = p / (1.0 - p);
    // log P(X = 0)
    let mut log_scale = n as f64 * (-p).ln_1p();
    let mut term = 1.0;
    let mut acc = 1.0;
    const BIG: f64 = 1e200;
    for j in 0..k {
        term *= ratio * (n - j) as f64 / (j + 1) as f64;
        acc += term;
        if acc > BIG {
            acc /= BIG;
            term /= BIG;
            log_scale += BIG.ln();
        }
    }
    let out = if log_scale > -700.0 {
        acc * log_scale.exp()
    } else {
        (acc.ln() + log_scale).exp()
    };
    out.clamp(0.0, 1.0)
}

/// `P(X > k)` for `X ~ Bin(n, p)`, accurate in the upper tail.
pub fn binomial_sf(n: usize, p: f64, k: i64) -> f64 {
    if k < 0 {
        return 1.0;
    }
    // X > k  <=>  n - X <= n - k - 1
    binomial_cdf(n, 1.0 - p, n as i64 - k - 1)
}

/// Binomial probability mass `P(X = k)`, `X ~ Bin(n, p)`.
pub fn binomial_pmf(n: usize, p: f64, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let log_choose: f64 = (0..k)
        .map(|j| ((n - j) as f64).ln() - ((j + 1) as f64).ln())
        .sum();
    (log_choose + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp()
}

fn g_k_raw(k: usize, kappa: i64, p: f64) -> f64 {
    (1.0 - p) * binomial_cdf(k, 1.0 - p, kappa) - p * binomial_cdf(k, p, kappa)
}

/// `g_K(p) = (1-p) P_{1-p}[X <= kappa] - p P_p[X <= kappa]`, `X ~ Bin(K, .)`.
pub fn g_k(p: f64, spec: &ReactionSpec) -> Result<f64, ReactionError> {
    match spec.order {
        ReactionOrder::Finite(k) => Ok(g_k_raw(k, spec.kappa, p)),
        ReactionOrder::Limit => Err(ReactionError::NeedsFiniteK),
    }
}

/// `(1-p) P_{1-p}[X < kappa] - p P_p[X <= kappa]`: the strict-inequality form.
pub fn g_k_appendix_variant(p: f64, spec: &ReactionSpec) -> Result<f64, ReactionError> {
    match spec.order {
        ReactionOrder::Finite(k) => Ok((1.0 - p) * binomial_cdf(k, 1.0 - p, spec.kappa - 1)
            - p * binomial_cdf(k, p, spec.kappa)),
        ReactionOrder::Limit => Err(ReactionError::NeedsFiniteK),
    }
}

/// `min(T, 1 - T)`.
pub fn p0(threshold: f64) -> f64 {
    threshold.min(1.0 - threshold)
}

/// `g_inf(p) = (1-p) 1{1-p < p0} - p 1{p <= p0}`.
pub fn g_inf(p: f64, threshold: f64) -> f64 {
    let p0 = p0(threshold);
    let create = if 1.0 - p < p0 { 1.0 - p } else { 0.0 };
    let annihilate = if p <= p0 { p } else { 0.0 };
    create - annihilate
}

/// `g_K(p) - g_inf(p)` without the cancellation of subtracting two near-equal
/// numbers: wherever an indicator of `g_inf` is one, the matching CDF is replaced
/// by minus its upper tail.
pub fn gk_minus_ginf(p: f64, spec: &ReactionSpec) -> Result<f64, ReactionError> {
    let k = spec.k().ok_or(ReactionError::NeedsFiniteK)?;
    let p0 = spec.p0();
    let kappa = spec.kappa;
    let create = if 1.0 - p < p0 {
        -binomial_sf(k, 1.0 - p, kappa)
    } else {
        binomial_cdf(k, 1.0 - p, kappa)
    };
    let annihilate = if p <= p0 {
        -binomial_sf(k, p, kappa)
    } else {
        binomial_cdf(k, p, kappa)
    };
    Ok((1.0 - p) * create - p * annihilate)
}

/// Right-hand side of the `|g_K - g_inf|` concentration bound.
pub fn bound_gk_vs_ginf(p: f64, spec: &ReactionSpec) -> Result<f64, ReactionError> {
    let k = spec.k().ok_or(ReactionError::NeedsFiniteK)?;
    let p0 = spec.p0();
    let inv = 1.0 / k as f64;
    if (p - p0).abs() <= inv || ((1.0 - p) - p0).abs() <= inv {
        return Err(ReactionError::BoundInapplicable { p, p0, k });
    }
    let e = std::f64::consts::E;
    let kf = k as f64;
    Ok(2.0 * e * (-2.0 * kf * (p0 - p).powi(2)).exp()
        + 2.0 * e * (-2.0 * kf * (p0 - (1.0 - p)).powi(2)).exp())
}

/// `h_inf(q) = -1{q <= -2rho} + q 1{-2rho < q <= 2rho} + 1{q > 2rho}` (left-continuous).
pub fn h_inf(q: f64, rho: f64) -> f64 {
    let kink = 2.0 * rho;
    if q <= -kink {
        -1.0
    } else if q <= kink {
        q
    } else {
        1.0
    }
}

/// Right-continuous version of [`h_inf`].
pub fn h_inf_right(q: f64, rho: f64) -> f64 {
    let kink = 2.0 * rho;
    if q < -kink {
        -1.0
    } else if q < kink {
        q
    } else {
        1.0
    }
}

/// Continuous, 1-Lipschitz part of `h_inf`: `q` clamped to `[-2rho, 2rho]`.
pub fn f_inf(q: f64, rho: f64) -> f64 {
    q.clamp(-2.0 * rho, 2.0 * rho)
}

/// The convex potential `H_inf`, whose left derivative is `h_inf`.
pub fn h_inf_potential(q: f64, rho: f64) -> f64 {
    let kink = 2.0 * rho;
    if q <= -kink {
        -q - kink + 2.0 * rho * rho
    } else if q <= kink {
        0.5 * q * q
    } else {
        q - kink + 2.0 * rho * rho
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// Subdifferential of `H_inf` at `q`.
pub fn subdiff_h_inf(q: f64, rho: f64) -> Interval {
    let kink = 2.0 * rho;
    if kink > 0.0 && q == -kink {
        Interval { lo: -1.0, hi: -kink }
    } else if kink > 0.0 && q == kink {
        Interval { lo: kink, hi: 1.0 }
    } else if kink == 0.0 && q == 0.0 {
        Interval { lo: -1.0, hi: 1.0 }
    } else if q < -kink {
        Interval::point(-1.0)
    } else if q > kink {
        Interval::point(1.0)
    } else {
        Interval::point(q)
    }
}

/// Whether `w` is a valid selection of the subdifferential at `q`, where `q`
/// counts as sitting on a kink whenever it is within `tol` of one.
pub fn subdiff_contains(q: f64, w: f64, rho: f64, tol: f64) -> bool {
    let kink = 2.0 * rho;
    let at = if (q - kink).abs() <= tol {
        kink
    } else if (q + kink).abs() <= tol {
        -kink
    } else {
        q
    };
    subdiff_h_inf(at, rho).contains(w, tol) || subdiff_h_inf(q, rho).contains(w, tol)
}

/// Adaptive Simpson quadrature with an absolute tolerance.
pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// The potential `gamma_{inf,beta}(p)`.
pub fn gamma_inf_beta(p: f64, threshold: f64, beta: f64) -> f64 {
    let p0 = p0(threshold);
    let base = beta * (p - 0.5).powi(2);
    if p < p0 {
        base + 0.5 * (p * p - p0 * p0)
    } else if p < 1.0 - p0 {
        base
    } else {
        base + 0.5 * ((1.0 - p).powi(2) - p0 * p0)
    }
}

/// `p^l = beta / (1 + 2 beta)`.
pub fn p_ell(beta: f64) -> f64 {
    beta / (1.0 + 2.0 * beta)
}

/// `p^m = sqrt(beta / (2 (1 + 2 beta)))`.
pub fn p_m(beta: f64) -> f64 {
    (beta / (2.0 * (1.0 + 2.0 * beta))).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// `p0 < p^l`: the balanced state is the only minimum.
    Mixed,
    /// `p^l < p0 < p^m`: segregated minima exist but lie above the balanced one.
    MetastableSegregation,
    /// `p0 > p^m`: segregated minima are the global ones.
    Segregated,
    /// `p0` sits on `p^l` or `p^m`.
    Boundary,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Mixed => "mixed",
            Phase::MetastableSegregation => "metastable_segregation",
            Phase::Segregated => "segregated",
            Phase::Boundary => "boundary",
        }
    }
}

/// A local minimum `(p, gamma(p))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub threshold: f64,
    pub beta: f64,
    pub p0: f64,
    pub p_ell: f64,
    pub p_m: f64,
    pub phase: Phase,
    /// Minima of `gamma_{inf,beta}` from the closed form.
    pub minima: Vec<Minimum>,
}

/// Tolerance within which `p0` is reported as sitting on a phase boundary.
pub const PHASE_BOUNDARY_TOL: f64 = 1e-12;

pub fn phase_classify(threshold: f64, beta: f64) -> Result<PhaseReport, ReactionError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ReactionError::ThresholdOutOfRange(threshold));
    }
    if beta <= 0.0 || !beta.is_finite() {
        return Err(ReactionError::NonPositiveBeta(beta));
    }
    let p0 = p0(threshold);
    let pl = p_ell(beta);
    let pm = p_m(beta);
    let phase = if (p0 - pl).abs() <= PHASE_BOUNDARY_TOL || (p0 - pm).abs() <= PHASE_BOUNDARY_TOL
    {
        Phase::Boundary
    } else if p0 < pl {
        Phase::Mixed
    } else if p0 < pm {
        Phase::MetastableSegregation
    } else {
        Phase::Segregated
    };
    let at = |p: f64| Minimum {
        p,
        value: gamma_inf_beta(p, threshold, beta),
    };
    let minima = if pl < p0 {
        vec![at(pl), at(0.5), at(1.0 - pl)]
    } else {
        vec![at(0.5)]
    };
    Ok(PhaseReport {
        threshold,
        beta,
        p0,
        p_ell: pl,
        p_m: pm,
        phase,
        minima,
    })
}

/// Local minima of `gamma_{inf,beta}` found by scanning a uniform grid of `[0, 1]`.
///
/// A grid point is a minimum when it is strictly below one neighbor and not above
/// the other; flat runs are reported once.
pub fn scan_minima(threshold: f64, beta: f64, step: f64) -> Vec<Minimum> {
    let n = (1.0 / step).round() as usize;
    let values: Vec<f64> = (0..=n)
        .map(|j| gamma_inf_beta(j as f64 / n as f64, threshold, beta))
        .collect();
    let mut out = Vec::new();
    for j in 1..n {
        let (l, c, r) = (values[j - 1], values[j], values[j + 1]);
        if (c < l && c <= r) || (c <= l && c < r) {
            if c == r {
                continue;
            }
            out.push(Minimum {
                p: j as f64 / n as f64,
                value: c,
            });
        }
    }
    out
}

/// Phase deduced purely from the scanned minima structure.
pub fn scan_phase(threshold: f64, beta: f64, step: f64) -> Phase {
    let minima = scan_minima(threshold, beta, step);
    if minima.len() <= 1 {
        return Phase::Mixed;
    }
    let center = minima
        .iter()
        .min_by(|a, b| (a.p - 0.5).abs().total_cmp(&(b.p - 0.5).abs()))
        .expect("nonempty");
    let lowest_side = minima
        .iter()
        .filter(|m| (m.p - 0.5).abs() > step)
        .map(|m| m.value)
        .fold(f64::INFINITY, f64::min);
    if center.value < lowest_side {
        Phase::MetastableSegregation
    } else {
        Phase::Segregated
    }
}
