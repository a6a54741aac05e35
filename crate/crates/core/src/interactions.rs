//! Potential and Hamiltonian algebra for log-gases: free and pair
//! potentials, block interactions between annuli, compensated
//! interactions, the Taylor expansion of the log interaction seen from a
//! ball, and Lipschitz envelopes of the compensated interaction.
//!
//! Points are complex throughout; for one-dimensional ensembles the
//! imaginary parts are zero and `Re[x conj(m)]` is ordinary multiplication.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config_space::{AnnulusSequence, Configuration, Shell, Window};
use crate::ensembles::{confinement, ScalingKind};
use crate::error::{domain, invalid, Result};

/// Compensators `m_s` per annulus index and their limit `m_inf`.
///
/// `finite[s - 1]` is `m_s` for `s = 1..=finite.len()`; larger indices and
/// `s = inf` use `m_inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensatorSequence {
    pub m_inf: Complex64,
    #[serde(default)]
    pub finite: Vec<Complex64>,
}

impl CompensatorSequence {
    pub fn constant(m: Complex64) -> Self {
        Self {
            m_inf: m,
            finite: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        Self::constant(Complex64::new(0.0, 0.0))
    }

    /// Soft-edge default `m_s = m_inf = beta n^{1/3}`: cancels the linear
    /// term `beta n^{1/3} x` of the expanded soft-edge confinement.
    pub fn soft_edge(beta: f64, n: usize) -> Self {
        Self::constant(Complex64::new(beta * (n as f64).cbrt(), 0.0))
    }

    pub fn explicit(m_inf: Complex64, finite: Vec<Complex64>) -> Self {
        Self { m_inf, finite }
    }

    /// Data-centred sequence `m_s = m_inf - beta * mean_samples(sum_{|y| >= b_s} 1/y)`
    /// for `s = 1..=s_max`, which makes the empirical mean of the
    /// compensated first-order sum vanish on every complement window.
    pub fn data_centered(
        beta: f64,
        m_inf: Complex64,
        samples: &[Configuration],
        seq: &AnnulusSequence,
        s_max: usize,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("data-centred compensators need samples"));
        }
        let mut finite = Vec::with_capacity(s_max);
        for s in 1..=s_max {
            let w = seq.complement(s)?;
            let mut total = Complex64::new(0.0, 0.0);
            for c in samples {
                for z in c.iter().filter(|z| w.contains(**z)) {
                    total += z.inv();
                }
            }
            finite.push(m_inf - beta * total / samples.len() as f64);
        }
        Ok(Self { m_inf, finite })
    }

    pub fn m_at(&self, s: Shell) -> Complex64 {
        match s {
            Shell::Index(i) if i >= 1 && i <= self.finite.len() => self.finite[i - 1],
            _ => self.m_inf,
        }
    }

    /// `conj(m_t) - conj(m_u)`.
    pub fn conj_diff(&self, t: Shell, u: Shell) -> Complex64 {
        (self.m_at(t) - self.m_at(u)).conj()
    }

    /// Largest finite index with an explicit value.
    pub fn explicit_len(&self) -> usize {
        self.finite.len()
    }
}

pub type FreePotential = Arc<dyn Fn(Complex64) -> f64 + Send + Sync>;
pub type PairPotential = Arc<dyn Fn(Complex64, Complex64) -> f64 + Send + Sync>;

/// Free potential `phi` and symmetric pair potential `psi`.
#[derive(Clone)]
pub struct PotentialPair {
    pub phi: FreePotential,
    pub psi: PairPotential,
    pub beta: f64,
}

impl fmt::Debug for PotentialPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialPair")
            .field("beta", &self.beta)
            .finish_non_exhaustive()
    }
}

impl PotentialPair {
    pub fn new(phi: FreePotential, psi: PairPotential, beta: f64) -> Self {
        Self { phi, psi, beta }
    }

    /// Log-gas with the confinement of the given scaling.
    pub fn log_gas(beta: f64, n: usize, kind: ScalingKind) -> Self {
        Self {
            phi: Arc::new(move |x: Complex64| confinement(beta, n, kind, x.re)),
            psi: Arc::new(move |x, y| log_potential(x, y, beta)),
            beta,
        }
    }

    /// Independent particles: `psi = 0`.
    pub fn free_only(phi: FreePotential) -> Self {
        Self {
            phi,
            psi: Arc::new(|_, _| 0.0),
            beta: 0.0,
        }
    }
}

/// `-beta log|x - y|`; `+inf` at coincidence for `beta > 0`.
pub fn log_potential(x: Complex64, y: Complex64, beta: f64) -> f64 {
    if beta == 0.0 {
        return 0.0;
    }
    let d = (x - y).norm();
    if d == 0.0 {
        return if beta > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    -beta * d.ln()
}

/// `sum_{x in w} phi(x) + sum_{x_i, x_j in w, i<j} psi(x_i, x_j)`.
pub fn hamiltonian(pp: &PotentialPair, w: &Window, config: &Configuration) -> f64 {
    let pts = config.restrict(w);
    let pts = pts.points();
    let mut h: f64 = pts.iter().map(|&x| (pp.phi)(x)).sum();
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            h += (pp.psi)(pts[i], pts[j]);
        }
    }
    h
}

/// Hamiltonian with the free potential replaced by `phi(x) - Re[x conj(m_inf)]`.
pub fn compensated_hamiltonian(
    pp: &PotentialPair,
    comp: &CompensatorSequence,
    w: &Window,
    config: &Configuration,
) -> f64 {
    let shift: f64 = config.restrict(w).iter().map(|x| (x * comp.m_inf.conj()).re).sum();
    hamiltonian(pp, w, config) - shift
}

/// Annulus indices `(r, s, t, u)` of a block interaction: x-points in
/// `S_rs`, y-points in `S_tu`, with `r < s <= t < u <= inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocks {
    pub r: usize,
    pub s: usize,
    pub t: usize,
    pub u: Shell,
}

impl Blocks {
    pub fn new(r: usize, s: usize, t: usize, u: Shell) -> Result<Self> {
        let ok = r < s && s <= t && Shell::Index(t) < u;
        if !ok {
            return Err(invalid(format!("blocks need r < s <= t < u, got ({r},{s},{t},{u})")));
        }
        Ok(Self { r, s, t, u })
    }
}

/// `sum_{x in S_rs, y in S_tu} psi(x, y)`, plus `Re[(sum x) (conj m_t - conj m_u)]`
/// when `compensated`.
pub fn block_interaction(
    x_cfg: &Configuration,
    y_cfg: &Configuration,
    blocks: Blocks,
    seq: &AnnulusSequence,
    pp: &PotentialPair,
    comp: &CompensatorSequence,
    compensated: bool,
) -> Result<f64> {
    let Blocks { r, s, t, u } = Blocks::new(blocks.r, blocks.s, blocks.t, blocks.u)?;
    let xs = x_cfg.restrict(&seq.shell(r, Shell::Index(s))?);
    let ys = y_cfg.restrict(&seq.shell(t, u)?);
    let mut total = 0.0;
    for &x in xs.points() {
        for &y in ys.points() {
            total += (pp.psi)(x, y);
        }
    }
    if compensated {
        let sx: Complex64 = xs.iter().sum();
        total += (sx * comp.conj_diff(Shell::Index(t), u)).re;
    }
    Ok(total)
}

/// Truncated expansion of `Psi_rs(x, y) - Psi_rs(0, y)` for the log
/// interaction, `beta sum_j sum_{l <= L} (1/l) Re[(x/y_j)^l]`, together with
/// the remainder bound `|beta| sum_j r_j^{L+1} / ((L+1)(1 - r_j))`.
pub fn taylor_tail(x: Complex64, ys: &[Complex64], beta: f64, order: usize) -> Result<(f64, f64)> {
    let mut value = 0.0;
    let mut bound = 0.0;
    for &y in ys {
        let ratio = x / y;
        let rj = ratio.norm();
        if !(x.norm() < y.norm()) {
            return Err(domain(format!(
                "taylor_tail needs |x| < |y|, got |x| = {}, |y| = {}",
                x.norm(),
                y.norm()
            )));
        }
        let mut p = Complex64::new(1.0, 0.0);
        for l in 1..=order {
            p *= ratio;
            value += p.re / l as f64;
        }
        bound += rj.powi(order as i32 + 1) / ((order as f64 + 1.0) * (1.0 - rj));
    }
    Ok((beta * value, beta.abs() * bound))
}

/// `Psi~_{r,rs}(x, y)`: the log interaction of `x` with the points of
/// `y_cfg` in `S_rs`, compensated by `(m_r, m_s)`.
fn compensated_single(x: Complex64, ys: &[Complex64], beta: f64, cdiff: Complex64) -> f64 {
    let mut v = 0.0;
    for &y in ys {
        v += log_potential(x, y, beta);
    }
    v + (x * cdiff).re
}

fn annulus_points(y_cfg: &Configuration, r: usize, s: Shell, seq: &AnnulusSequence) -> Result<Vec<Complex64>> {
    Ok(y_cfg.restrict(&seq.shell(r, s)?).points().to_vec())
}

/// `|Psi~_{r,rs}(x, y) - Psi~_{r,rs}(w, y)| / |x - w|` for `x != w` in `S_r`.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_ratio(
    x: Complex64,
    w: Complex64,
    y_cfg: &Configuration,
    r: usize,
    s: Shell,
    seq: &AnnulusSequence,
    comp: &CompensatorSequence,
    beta: f64,
) -> Result<f64> {
    if x == w {
        return Err(invalid("lipschitz_ratio needs x != w"));
    }
    let br = seq.b(r)?;
    if !(x.norm() < br && w.norm() < br) {
        return Err(invalid(format!("x and w must lie in the ball of radius {br}")));
    }
    let pp = PotentialPair::log_gas(beta, 1, ScalingKind::Raw);
    let blocks = Blocks::new(0, r, r, s)?;
    let fx = block_interaction(
        &Configuration::from_points(vec![x]),
        y_cfg,
        blocks,
        seq,
        &pp,
        comp,
        true,
    )?;
    let fw = block_interaction(
        &Configuration::from_points(vec![w]),
        y_cfg,
        blocks,
        seq,
        &pp,
        comp,
        true,
    )?;
    Ok((fx - fw).abs() / (x - w).norm())
}

/// Constants of the Lipschitz envelope on the ball of radius `b_r`:
///
/// * `c6x = |beta| max_{1 <= l < l0} sup |x^l - w^l| / (l |x - w|) = |beta| max(1, b_r^{l0-2})`,
///   the sup being `b_r^{l-1}`, attained as `x, w` approach a boundary point.
/// * `c6y = l0 |beta| / b_r`. The geometric tail
///   `sum_{l >= l0} (b_r/|y|)^l = q^{l0} / (1 - q)` is at most
///   `l0 q^{l0} / (1 - q^{l0})`, which is what lets the tail be written with
///   the denominator `|y|^{l0} - b_r^{l0}`.
pub fn lipschitz_constants(b_r: f64, beta: f64, ell0: usize) -> (f64, f64) {
    let c6x = beta.abs() * (1..ell0).map(|l| b_r.powi(l as i32 - 1)).fold(0.0f64, f64::max);
    let c6y = ell0 as f64 * beta.abs() / b_r;
    (c6x, c6y)
}

/// The three pieces of the Lipschitz envelope for one `(r, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzTerms {
    /// `|beta sum 1/y + conj(m_r) - conj(m_s)|`.
    pub first_order: f64,
    /// `|sum 1/y^l|` for `l = 2..l0-1`.
    pub middle: Vec<f64>,
    /// `sum b_r^{l0} / (|y|^{l0} - b_r^{l0})`.
    pub tail: f64,
    pub c6x: f64,
    pub c6y: f64,
    pub bound: f64,
}

/// Lipschitz envelope of `x -> Psi~_{r,rs}(x, y)` on `S_r`:
/// `|F| + c6x sum_{l=2}^{l0-1} |sum 1/y^l| + c6y sum b_r^{l0}/(|y|^{l0} - b_r^{l0})`.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_terms(
    y_cfg: &Configuration,
    r: usize,
    s: Shell,
    seq: &AnnulusSequence,
    comp: &CompensatorSequence,
    beta: f64,
    ell0: usize,
) -> Result<LipschitzTerms> {
    if ell0 < 2 {
        return Err(invalid(format!("ell0 = {ell0} must be >= 2")));
    }
    if r == 0 {
        return Err(invalid("the inner ball index r must be >= 1"));
    }
    if Shell::Index(r) >= s {
        return Err(invalid(format!("need r < s, got r = {r}, s = {s}")));
    }
    let br = seq.b(r)?;
    let ys = annulus_points(y_cfg, r, s, seq)?;
    if let Some(y) = ys.iter().find(|y| y.norm() <= br) {
        return Err(domain(format!("point {y} on the boundary |y| = b_r = {br}")));
    }
    let mut sums = vec![Complex64::new(0.0, 0.0); ell0];
    let mut tail = 0.0;
    let brl = br.powi(ell0 as i32);
    for &y in &ys {
        let inv = y.inv();
        let mut p = Complex64::new(1.0, 0.0);
        for sum in sums.iter_mut().skip(1) {
            p *= inv;
            *sum += p;
        }
        tail += brl / (y.norm().powi(ell0 as i32) - brl);
    }
    let (c6x, c6y) = lipschitz_constants(br, beta, ell0);
    let first_order = (beta * sums[1] + comp.conj_diff(Shell::Index(r), s)).norm();
    let middle: Vec<f64> = (2..ell0).map(|l| sums[l].norm()).collect();
    let bound = first_order + c6x * middle.iter().sum::<f64>() + c6y * tail;
    Ok(LipschitzTerms {
        first_order,
        middle,
        tail,
        c6x,
        c6y,
        bound,
    })
}

pub fn lipschitz_bound(
    y_cfg: &Configuration,
    r: usize,
    s: Shell,
    seq: &AnnulusSequence,
    comp: &CompensatorSequence,
    beta: f64,
    ell0: usize,
) -> Result<f64> {
    Ok(lipschitz_terms(y_cfg, r, s, seq, comp, beta, ell0)?.bound)
}

/// Grid surrogate for the Lipschitz sup, with the grid size actually used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSup {
    pub value: f64,
    pub grid: usize,
    pub previous: f64,
    pub converged: bool,
}

pub const GRID_START: usize = 50;
pub const GRID_MAX: usize = 1600;

/// Interior midpoints `b (-1 + (2i + 1)/g)` of a uniform grid on `(-b, b)`.
pub fn midpoint_grid(b: f64, g: usize) -> Vec<f64> {
    (0..g).map(|i| b * (-1.0 + (2 * i + 1) as f64 / g as f64)).collect()
}

/// Sup of the Lipschitz ratio over grid pairs at a fixed grid size `g`.
///
/// Real data (points and compensators) use all pairs of a `g`-point grid
/// on `(-b_r, b_r)`. Otherwise the ball is a disc; the ratio's sup over a
/// convex set equals the sup of the gradient modulus
/// `|-beta sum 1/(x - y) + conj(m_r - m_s)|`, evaluated on the `g x g`
/// points of a square grid that fall inside the disc.
#[allow(clippy::too_many_arguments)]
pub fn lipschitz_grid_value(
    y_cfg: &Configuration,
    r: usize,
    s: Shell,
    seq: &AnnulusSequence,
    comp: &CompensatorSequence,
    beta: f64,
    g: usize,
) -> Result<f64> {
    let br = seq.b(r)?;
    let ys = annulus_points(y_cfg, r, s, seq)?;
    let cdiff = comp.conj_diff(Shell::Index(r), s);
    let real = ys.iter().all(|y| y.im == 0.0) && cdiff.im == 0.0;
    if real {
        let grid = midpoint_grid(br, g);
        let f: Vec<f64> = grid
            .iter()
            .map(|&x| compensated_single(Complex64::new(x, 0.0), &ys, beta, cdiff))
            .collect();
        let mut best = 0.0f64;
        for i in 0..g {
            for j in (i + 1)..g {
                best = best.max((f[i] - f[j]).abs() / (grid[j] - grid[i]));
            }
        }
        Ok(best)
    } else {
        let axis = midpoint_grid(br, g);
        let mut best = 0.0f64;
        for &a in &axis {
            for &b in &axis {
                let x = Complex64::new(a, b);
                if x.norm() >= br {
                    continue;
                }
                let mut grad = cdiff;
                for &y in &ys {
                    grad -= beta * (x - y).inv();
                }
                best = best.max(grad.norm());
            }
        }
        Ok(best)
    }
}

/// Grid sup starting at [`GRID_START`] points per axis, doubled until the
/// value changes by less than 1% or [`GRID_MAX`] is reached.
pub fn lipschitz_grid_sup(
    y_cfg: &Configuration,
    r: usize,
    s: Shell,
    seq: &AnnulusSequence,
    comp: &CompensatorSequence,
    beta: f64,
) -> Result<GridSup> {
    let mut g = GRID_START;
    let mut prev = lipschitz_grid_value(y_cfg, r, s, seq, comp, beta, g)?;
    loop {
        let next = lipschitz_grid_value(y_cfg, r, s, seq, comp, beta, 2 * g)?;
        g *= 2;
        let converged = (next - prev).abs() <= 0.01 * next.abs().max(f64::MIN_POSITIVE);
        if converged || g >= GRID_MAX {
            return Ok(GridSup {
                value: next.max(prev),
                grid: g,
                previous: prev,
                converged,
            });
        }
        prev = next;
    }
}

/// Cumulative inverse-power sums over the annulus `S_rs` for one outer
/// index `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShellState {
    pub s: Shell,
    /// `sums[l] = sum_{S_rs} 1/y^l` for `1 <= l < l0`; `sums[0]` unused.
    pub sums: Vec<Complex64>,
    /// `sum_{S_rs} b_r^{l0} / (|y|^{l0} - b_r^{l0})`.
    pub tail: f64,
}

/// States for `s = r+1, r+2, ..., S` and `s = inf`, where `S` is the first
/// index beyond every point and every explicit compensator; past `S` the
/// sums no longer change. For a bounded annulus sequence the finite range
/// stops at its last cutoff. Returns `None` if a point sits exactly on
/// `|y| = b_r`, where the tail diverges.
pub fn shell_sweep(
    y_cfg: &Configuration,
    r: usize,
    seq: &AnnulusSequence,
    comp: &CompensatorSequence,
    ell0: usize,
) -> Result<Option<Vec<ShellState>>> {
    if ell0 < 2 {
        return Err(invalid(format!("ell0 = {ell0} must be >= 2")));
    }
    if r == 0 {
        return Err(invalid("the inner ball index r must be >= 1"));
    }
    let br = seq.b(r)?;
    let mut ys: Vec<Complex64> = y_cfg.iter().copied().filter(|y| y.norm() >= br).collect();
    if ys.iter().any(|y| y.norm() == br) {
        return Ok(None);
    }
    ys.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let brl = br.powi(ell0 as i32);
    let last_point = ys.last().map_or(0.0, |y| y.norm());

    let mut sums = vec![Complex64::new(0.0, 0.0); ell0];
    let mut tail = 0.0;
    let mut idx = 0;
    let mut absorb_until = |limit: f64, sums: &mut Vec<Complex64>, tail: &mut f64| {
        while idx < ys.len() && ys[idx].norm() < limit {
            let inv = ys[idx].inv();
            let mut p = Complex64::new(1.0, 0.0);
            for sum in sums.iter_mut().skip(1) {
                p *= inv;
                *sum += p;
            }
            *tail += brl / (ys[idx].norm().powi(ell0 as i32) - brl);
            idx += 1;
        }
    };
    let mut states = Vec::new();
    let mut s = r + 1;
    while let Ok(bs) = seq.b(s) {
        absorb_until(bs, &mut sums, &mut tail);
        states.push(ShellState {
            s: Shell::Index(s),
            sums: sums.clone(),
            tail,
        });
        if bs > last_point && s > comp.explicit_len() {
            break;
        }
        s += 1;
    }
    absorb_until(f64::INFINITY, &mut sums, &mut tail);
    states.push(ShellState {
        s: Shell::Infinite,
        sums,
        tail,
    });
    Ok(Some(states))
}

/// `beta sum_{S_rs} 1/y + conj(m_r) - conj(m_s)` from a sweep state.
pub fn first_order_term(state: &ShellState, r: usize, comp: &CompensatorSequence, beta: f64) -> Complex64 {
    beta * state.sums[1] + comp.conj_diff(Shell::Index(r), state.s)
}

/// The `H_{r,k}` functional of one configuration: the sup over outer
/// indices `s > r` (including `s = inf`) of the Lipschitz envelope, and the
/// index where it is attained. Points with `|y| = b_r` make it infinite.
pub fn hrk_functional(
    y_cfg: &Configuration,
    r: usize,
    seq: &AnnulusSequence,
    comp: &CompensatorSequence,
    beta: f64,
    ell0: usize,
) -> Result<(f64, Shell)> {
    let Some(states) = shell_sweep(y_cfg, r, seq, comp, ell0)? else {
        return Ok((f64::INFINITY, Shell::Index(r + 1)));
    };
    let (c6x, c6y) = lipschitz_constants(seq.b(r)?, beta, ell0);
    let mut best = (f64::NEG_INFINITY, Shell::Infinite);
    for st in &states {
        let mid: f64 = (2..ell0).map(|l| st.sums[l].norm()).sum();
        let v = first_order_term(st, r, comp, beta).norm() + c6x * mid + c6y * st.tail;
        if v > best.0 {
            best = (v, st.s);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn seq() -> AnnulusSequence {
        AnnulusSequence::Identity
    }

    #[test]
    fn log_potential_examples() {
        assert_eq!(log_potential(c(0.0), c(1.0), 2.0), 0.0);
        assert!((log_potential(c(0.0), c(0.5), 2.0) - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_potential(c(0.3), c(0.3), 2.0), f64::INFINITY);
    }

    #[test]
    fn hamiltonian_examples() {
        let pp = PotentialPair::log_gas(2.0, 1, ScalingKind::Raw);
        let w = seq().ball(3).unwrap();
        assert_eq!(hamiltonian(&pp, &w, &Configuration::empty()), 0.0);
        let one = Configuration::from_reals([1.5]);
        assert_eq!(hamiltonian(&pp, &w, &one), 0.5 * 1.5 * 1.5);
        let two = Configuration::from_reals([-1.0, 0.5, 7.0]);
        let want = 0.5 * 1.0 + 0.5 * 0.25 - 2.0 * 1.5f64.ln();
        assert!((hamiltonian(&pp, &w, &two) - want).abs() < 1e-14);
    }

    #[test]
    fn compensated_hamiltonian_examples() {
        let pp = PotentialPair::log_gas(2.0, 1, ScalingKind::Raw);
        let w = seq().ball(2).unwrap();
        let cfg = Configuration::from_reals([0.4, -1.1]);
        assert_eq!(
            compensated_hamiltonian(&pp, &CompensatorSequence::zero(), &w, &cfg),
            hamiltonian(&pp, &w, &cfg)
        );
        let comp = CompensatorSequence::constant(c(0.7));
        let single = Configuration::from_reals([0.4]);
        let want = (pp.phi)(c(0.4)) - 0.4 * 0.7;
        assert!((compensated_hamiltonian(&pp, &comp, &w, &single) - want).abs() < 1e-15);
    }

    #[test]
    fn soft_edge_compensation_leaves_bounded_quadratic() {
        let beta = 2.0;
        for n in [50usize, 400, 10_000, 1_000_000] {
            let pp = PotentialPair::log_gas(beta, n, ScalingKind::SoftEdge);
            let comp = CompensatorSequence::soft_edge(beta, n);
            let w = seq().ball(5).unwrap();
            for x in [-4.5, -1.0, 0.0, 3.0] {
                let h = compensated_hamiltonian(&pp, &comp, &w, &Configuration::from_reals([x]));
                let want = 0.25 * beta * (n as f64).powf(-1.0 / 3.0) * x * x;
                assert!(
                    (h - want).abs() < 1e-9 * (1.0 + (n as f64).cbrt()),
                    "n={n} x={x}: {h} vs {want}"
                );
                assert!(h.abs() <= 0.25 * beta * x * x);
            }
        }
    }

    #[test]
    fn block_interaction_examples() {
        let pp = PotentialPair::log_gas(2.0, 1, ScalingKind::Raw);
        let b = Blocks::new(0, 1, 1, Shell::Index(3)).unwrap();
        let x = Configuration::from_reals([0.5]);
        let y = Configuration::from_reals([2.0]);
        let same = CompensatorSequence::constant(c(1.3));
        let u = block_interaction(&x, &y, b, &seq(), &pp, &same, false).unwrap();
        let k = block_interaction(&x, &y, b, &seq(), &pp, &same, true).unwrap();
        assert_eq!(u, k);
        assert_eq!(
            block_interaction(&Configuration::empty(), &y, b, &seq(), &pp, &same, true).unwrap(),
            0.0
        );
        let comp = CompensatorSequence::explicit(c(0.0), vec![c(1.0), c(2.0), c(5.0)]);
        let got = block_interaction(&x, &y, b, &seq(), &pp, &comp, true).unwrap();
        let want = log_potential(c(0.5), c(2.0), 2.0) + 0.5 * (1.0 - 5.0);
        assert!((got - want).abs() < 1e-15);
        assert!(Blocks::new(1, 1, 2, Shell::Infinite).is_err());
        assert!(Blocks::new(0, 2, 1, Shell::Infinite).is_err());
    }

    #[test]
    fn taylor_examples() {
        assert_eq!(taylor_tail(c(0.0), &[c(2.0), c(-3.0)], 2.0, 7).unwrap().0, 0.0);
        let (v, _) = taylor_tail(c(0.5), &[c(1.0)], 2.0, 200).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-13);
        let (v, rem) = taylor_tail(c(0.5), &[c(1.0)], 2.0, 20).unwrap();
        assert!((v - 2.0 * 2f64.ln()).abs() <= rem);
        assert!(taylor_tail(c(1.0), &[c(1.0)], 2.0, 3).is_err());
    }

    #[test]
    fn lipschitz_ratio_examples() {
        let comp = CompensatorSequence::constant(c(0.4));
        let empty = Configuration::empty();
        assert_eq!(
            lipschitz_ratio(c(0.1), c(-0.2), &empty, 1, Shell::Index(3), &seq(), &comp, 2.0).unwrap(),
            0.0
        );
        let comp = CompensatorSequence::explicit(c(0.0), vec![c(1.0), c(1.5), c(3.5)]);
        let ratio = lipschitz_ratio(c(0.3), c(-0.6), &empty, 1, Shell::Index(3), &seq(), &comp, 2.0).unwrap();
        assert!((ratio - 2.5).abs() < 1e-14);
        let y = Configuration::from_reals([2.5]);
        let ratio = lipschitz_ratio(
            c(0.1),
            c(-0.1),
            &y,
            1,
            Shell::Index(4),
            &seq(),
            &CompensatorSequence::zero(),
            2.0,
        )
        .unwrap();
        let direct = (-2.0 * (2.4f64).ln() + 2.0 * (2.6f64).ln()).abs() / 0.2;
        assert!((ratio - direct).abs() < 1e-12);
        let via_taylor = (taylor_tail(c(0.1), &[c(2.5)], 2.0, 60).unwrap().0
            - taylor_tail(c(-0.1), &[c(2.5)], 2.0, 60).unwrap().0)
            .abs()
            / 0.2;
        assert!((ratio - via_taylor).abs() < 1e-12);
        assert!(lipschitz_ratio(c(0.1), c(0.1), &y, 1, Shell::Index(4), &seq(), &comp, 2.0).is_err());
    }

    #[test]
    fn lipschitz_bound_examples() {
        let comp = CompensatorSequence::constant(c(3.0));
        assert_eq!(
            lipschitz_bound(&Configuration::empty(), 1, Shell::Infinite, &seq(), &comp, 2.0, 3).unwrap(),
            0.0
        );
        // c6x at l = 2 equals beta * b.
        let b = 2.5;
        let (c6x, _) = lipschitz_constants(b, 2.0, 3);
        assert!((c6x - 2.0 * b).abs() < 1e-15);
        // Grid version of the same sup approaches beta * b from below.
        let grid = midpoint_grid(b, 400);
        let mut sup = 0.0f64;
        for i in 0..grid.len() {
            for j in (i + 1)..grid.len() {
                let (x, w) = (grid[i], grid[j]);
                sup = sup.max((x * x - w * w).abs() / (2.0 * (x - w).abs()));
            }
        }
        assert!(2.0 * sup <= c6x && 2.0 * sup > 0.99 * c6x);
        let seq = AnnulusSequence::explicit(vec![1.0, 2.0]).unwrap();
        let on_boundary = Configuration::from_reals([1.0]);
        assert!(lipschitz_bound(&on_boundary, 1, Shell::Infinite, &seq, &comp, 2.0, 3).is_err());
    }

    #[test]
    fn bound_dominates_grid_near_boundary() {
        // A point just outside the ball is where a q^{l0}/(1 - q^{l0}) tail
        // with constant |beta|/b_r would fail.
        let y = Configuration::from_reals([1.0 + 1e-3]);
        let comp = CompensatorSequence::zero();
        let bound = lipschitz_bound(&y, 1, Shell::Index(2), &seq(), &comp, 2.0, 3).unwrap();
        let grid = lipschitz_grid_sup(&y, 1, Shell::Index(2), &seq(), &comp, 2.0).unwrap();
        assert!(grid.value <= bound, "{grid:?} > {bound}");
    }

    #[test]
    fn hamiltonian_decomposition() {
        let pp = PotentialPair::log_gas(2.0, 1, ScalingKind::Raw);
        let cfg = Configuration::from_reals([-2.7, -0.3, 0.8, 1.4, 2.2, 4.5]);
        let (r, s) = (1, 3);
        let whole = hamiltonian(&pp, &seq().ball(s).unwrap(), &cfg);
        let inner = hamiltonian(&pp, &seq().ball(r).unwrap(), &cfg);
        let outer = hamiltonian(&pp, &seq().annulus(r, s).unwrap(), &cfg);
        let cross = block_interaction(
            &cfg,
            &cfg,
            Blocks::new(0, r, r, Shell::Index(s)).unwrap(),
            &seq(),
            &pp,
            &CompensatorSequence::zero(),
            false,
        )
        .unwrap();
        assert!((whole - (inner + outer + cross)).abs() < 1e-12);
    }

    #[test]
    fn hrk_functional_matches_direct_sup() {
        let mut rng = replica_stream(5, 0);
        let comp = CompensatorSequence::explicit(c(2.0), vec![c(2.5), c(2.2), c(1.9), c(2.1)]);
        for _ in 0..50 {
            let pts: Vec<f64> = (0..12).map(|_| rng.random_range(-9.0..9.0)).collect();
            let cfg = Configuration::from_reals(pts);
            let (v, _) = hrk_functional(&cfg, 1, &seq(), &comp, 2.0, 3).unwrap();
            let mut direct = lipschitz_bound(&cfg, 1, Shell::Infinite, &seq(), &comp, 2.0, 3).unwrap();
            for s in 2..15 {
                direct = direct.max(lipschitz_bound(&cfg, 1, Shell::Index(s), &seq(), &comp, 2.0, 3).unwrap());
            }
            assert!((v - direct).abs() <= 1e-12 * (1.0 + direct), "{v} vs {direct}");
        }
        let boundary = Configuration::from_reals([1.0, 3.0]);
        assert_eq!(
            hrk_functional(&boundary, 1, &seq(), &comp, 2.0, 3).unwrap().0,
            f64::INFINITY
        );
    }

    fn arb_outer(b: f64) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec(
            (b * 1.0001..b * 6.0, any::<bool>()).prop_map(|(m, neg)| c(if neg { -m } else { m })),
            0..6,
        )
    }

    proptest! {
        #[test]
        fn taylor_identity_within_remainder(
            x in -0.9f64..0.9,
            ys in prop::collection::vec((1.0f64..5.0, any::<bool>()), 1..6),
        ) {
            let ys: Vec<Complex64> = ys.into_iter().map(|(m, neg)| c(if neg { -m } else { m })).collect();
            let xr = ys.iter().fold(f64::INFINITY, |a, y| a.min(y.norm())) * x;
            let (v, rem) = taylor_tail(c(xr), &ys, 2.0, 60).unwrap();
            let direct: f64 = ys.iter().map(|&y| log_potential(c(xr), y, 2.0) - log_potential(c(0.0), y, 2.0)).sum();
            prop_assert!((v - direct).abs() <= rem + 1e-12);
        }

        #[test]
        fn lemma_bound_dominates_grid(
            ys in arb_outer(2.0),
            m in prop::collection::vec(-3.0f64..3.0, 4),
            beta in prop::sample::select(vec![1.0, 2.0, 4.0]),
        ) {
            let seq = AnnulusSequence::explicit(vec![2.0, 3.0, 5.0, 8.0]).unwrap();
            let comp = CompensatorSequence::explicit(c(m[3]), m.iter().map(|&v| c(v)).collect());
            let cfg = Configuration::from_points(ys);
            let s = Shell::Index(4);
            let bound = lipschitz_bound(&cfg, 1, s, &seq, &comp, beta, 3).unwrap();
            let grid = lipschitz_grid_value(&cfg, 1, s, &seq, &comp, beta, 50).unwrap();
            prop_assert!(grid <= bound * (1.0 + 1e-12), "grid {} > bound {}", grid, bound);
        }

        #[test]
        fn compensation_is_additive_over_adjacent_blocks(
            xs in prop::collection::vec(-0.99f64..0.99, 0..4),
            ys in prop::collection::vec(-9.0f64..9.0, 0..10),
            m in prop::collection::vec(-3.0f64..3.0, 8),
        ) {
            let pp = PotentialPair::log_gas(2.0, 1, ScalingKind::Raw);
            let comp = CompensatorSequence::explicit(c(0.5), m.iter().map(|&v| c(v)).collect());
            let x = Configuration::from_reals(xs);
            let y = Configuration::from_reals(ys);
            let f = |t: usize, u: Shell, compd: bool| {
                block_interaction(&x, &y, Blocks::new(0, 1, t, u).unwrap(), &seq(), &pp, &comp, compd).unwrap()
            };
            // Adjacent y-blocks: S_tu and S_uv partition S_tv.
            let lhs = f(2, Shell::Index(4), true) + f(4, Shell::Index(7), true);
            let rhs = f(2, Shell::Index(7), true);
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
            // Same y-block, compensators (t,u) then (u,v): the interaction
            // appears twice and the compensator differences telescope.
            let xs_sum: f64 = x.restrict(&seq().ball(1).unwrap()).iter().map(|z| z.re).sum();
            let psi = f(2, Shell::Index(7), false);
            let ctu = xs_sum * (comp.m_at(Shell::Index(2)) - comp.m_at(Shell::Index(4))).re;
            let cuv = xs_sum * (comp.m_at(Shell::Index(4)) - comp.m_at(Shell::Index(7))).re;
            let ctv = xs_sum * (comp.m_at(Shell::Index(2)) - comp.m_at(Shell::Index(7))).re;
            prop_assert!(((psi + ctu) + (psi + cuv) - ((psi + ctv) + psi)).abs() < 1e-9 * (1.0 + psi.abs()));
        }

        #[test]
        fn lipschitz_functional_controls_oscillation(
            ys in arb_outer(1.0),
            xs in prop::collection::vec(-0.99f64..0.99, 1..4),
            ws in prop::collection::vec(-0.99f64..0.99, 1..4),
        ) {
            // |Psi~(x, y) - Psi~(x', y)| <= m k diam(S_r) for m-point x, x'.
            let m = xs.len().min(ws.len());
            let comp = CompensatorSequence::constant(c(0.3));
            let cfg = Configuration::from_points(ys);
            let (k, _) = hrk_functional(&cfg, 1, &seq(), &comp, 2.0, 3).unwrap();
            prop_assume!(k.is_finite());
            let pp = PotentialPair::log_gas(2.0, 1, ScalingKind::Raw);
            for s in [Shell::Index(2), Shell::Index(4), Shell::Infinite] {
                let blocks = Blocks::new(0, 1, 1, s).unwrap();
                let a = block_interaction(&Configuration::from_reals(xs[..m].to_vec()), &cfg, blocks, &seq(), &pp, &comp, true).unwrap();
                let b = block_interaction(&Configuration::from_reals(ws[..m].to_vec()), &cfg, blocks, &seq(), &pp, &comp, true).unwrap();
                prop_assert!((a - b).abs() <= m as f64 * k * 2.0 * (1.0 + 1e-12));
            }
        }
    }
}
