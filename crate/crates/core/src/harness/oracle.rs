//! Exhaustive grid search over tiny instances.
//!
//! The search evaluates the secrecy rate with its own scalar arithmetic so
//! that it can serve as an independent reference for the optimizers.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::system::SystemParams;

/// Largest number of grid points a search may visit.
pub const GRID_BUDGET: f64 = 1e8;
pub const MAX_ANTENNAS: usize = 2;
pub const MAX_ELEMENTS: usize = 2;

/// Channels and limits of one instance. `eta` may be zero, which disables
/// the surface entirely.
#[derive(Clone, Debug)]
pub struct OracleInstance {
    pub h_ab: Vec<Complex64>,
    pub h_ae: Vec<Complex64>,
    /// Row `i` is the channel from the antennas to element `i`.
    pub h_ai: Vec<Vec<Complex64>>,
    pub h_ib: Vec<Complex64>,
    pub h_ie: Vec<Complex64>,
    pub p_t: f64,
    pub p_i: f64,
    pub eta: f64,
    pub sigma2_b: f64,
    pub sigma2_e: f64,
    pub sigma2_i: f64,
}

impl OracleInstance {
    /// Uses the smallest element cap when caps differ.
    pub fn new(ch: &ChannelSet, params: &SystemParams) -> Self {
        let row = |v: &crate::numerics::CVector| v.iter().copied().collect::<Vec<_>>();
        Self {
            h_ab: row(&ch.h_ab),
            h_ae: row(&ch.h_ae),
            h_ai: (0..ch.h_ai.nrows()).map(|i| ch.h_ai.row(i).iter().copied().collect()).collect(),
            h_ib: row(&ch.h_ib),
            h_ie: row(&ch.h_ie),
            p_t: params.p_t,
            p_i: params.p_i,
            eta: params.eta.iter().copied().reduce(f64::min).unwrap_or(0.0),
            sigma2_b: params.sigma2_b,
            sigma2_e: params.sigma2_e,
            sigma2_i: params.sigma2_i,
        }
    }

    pub fn m(&self) -> usize {
        self.h_ab.len()
    }

    pub fn n(&self) -> usize {
        self.h_ib.len()
    }

    /// Secrecy rate in nats, or `None` when `(w, q)` violates a power limit.
    pub fn evaluate(&self, w: &[Complex64], q: &[Complex64]) -> Option<f64> {
        let tx: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        if tx > self.p_t * (1.0 + 1e-12) {
            return None;
        }
        let mut y_b: Complex64 = self.h_ab.iter().zip(w).map(|(h, x)| h * x).sum();
        let mut y_e: Complex64 = self.h_ae.iter().zip(w).map(|(h, x)| h * x).sum();
        let (mut leak_b, mut leak_e, mut amplified) = (0.0, 0.0, 0.0);
        for (i, qi) in q.iter().enumerate() {
            let incident: Complex64 = self.h_ai[i].iter().zip(w).map(|(h, x)| h * x).sum();
            let reflected = qi * incident;
            amplified += reflected.norm_sqr() + qi.norm_sqr() * self.sigma2_i;
            y_b += self.h_ib[i] * reflected;
            y_e += self.h_ie[i] * reflected;
            leak_b += (self.h_ib[i] * qi).norm_sqr();
            leak_e += (self.h_ie[i] * qi).norm_sqr();
        }
        if amplified > self.p_i * (1.0 + 1e-12) {
            return None;
        }
        let snr_b = y_b.norm_sqr() / (self.sigma2_b + leak_b * self.sigma2_i);
        let snr_e = y_e.norm_sqr() / (self.sigma2_e + leak_e * self.sigma2_i);
        Some((1.0 + snr_b).ln() - (1.0 + snr_e).ln())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OracleGrid {
    /// Levels per continuous coordinate.
    pub resolution: usize,
    /// Polish the best grid point with a bounded pattern search.
    pub refine: bool,
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub sr: f64,
    pub w: Vec<Complex64>,
    pub q: Vec<Complex64>,
    /// Grid points visited before refinement.
    pub points: f64,
}

/// A search coordinate: `levels` values spread over `[lo, hi]`, with the
/// upper end excluded for periodic coordinates.
#[derive(Clone, Copy, Debug)]
struct Axis {
    lo: f64,
    hi: f64,
    levels: usize,
    periodic: bool,
}

impl Axis {
    fn new(lo: f64, hi: f64, levels: usize, periodic: bool) -> Self {
        if hi <= lo {
            Self { lo, hi: lo, levels: 1, periodic: false }
        } else {
            Self { lo, hi, levels, periodic }
        }
    }

    fn value(&self, k: usize) -> f64 {
        if self.levels == 1 {
            return self.hi;
        }
        let steps = if self.periodic { self.levels } else { self.levels - 1 };
        self.lo + (self.hi - self.lo) * k as f64 / steps as f64
    }

    fn spacing(&self) -> f64 {
        if self.levels <= 1 {
            0.0
        } else {
            (self.hi - self.lo) / (if self.periodic { self.levels } else { self.levels - 1 }) as f64
        }
    }

    fn clamp(&self, x: f64) -> f64 {
        if self.periodic {
            x.rem_euclid(self.hi - self.lo) + self.lo
        } else {
            x.clamp(self.lo, self.hi)
        }
    }
}

/// Coordinates: power fraction, then direction angles (`m = 2`), then
/// amplitude and phase of each element.
fn axes(inst: &OracleInstance, resolution: usize) -> Vec<Axis> {
    let mut axes = vec![Axis::new(0.0, 1.0, resolution, false)];
    if inst.m() == 2 {
        axes.push(Axis::new(0.0, FRAC_PI_2, resolution, false));
        axes.push(Axis::new(0.0, TAU, resolution, true));
    }
    for _ in 0..inst.n() {
        axes.push(Axis::new(0.0, inst.eta, resolution, false));
        axes.push(Axis::new(0.0, if inst.eta > 0.0 { TAU } else { 0.0 }, resolution, true));
    }
    // A zero power level is never optimal.
    axes[0] = Axis { lo: 1.0 / resolution as f64, ..axes[0] };
    axes
}

fn decode(inst: &OracleInstance, x: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let amp = (x[0] * inst.p_t).sqrt();
    let (w, rest) = if inst.m() == 2 {
        let w = vec![Complex64::new(amp * x[1].cos(), 0.0), Complex64::from_polar(amp * x[1].sin(), x[2])];
        (w, &x[3..])
    } else {
        (vec![Complex64::new(amp, 0.0)], &x[1..])
    };
    let q = rest.chunks(2).map(|c| Complex64::from_polar(c[0], c[1])).collect();
    (w, q)
}

fn count(axes: &[Axis]) -> f64 {
    axes.iter().map(|a| a.levels as f64).product()
}

/// Checks dimensions and the point budget for a resolution.
pub fn check_budget(inst: &OracleInstance, resolution: usize) -> Result<f64> {
    if inst.m() == 0 || inst.m() > MAX_ANTENNAS || inst.n() > MAX_ELEMENTS {
        return Err(Error::InvalidInput(format!(
            "oracle supports at most {MAX_ANTENNAS} antennas and {MAX_ELEMENTS} elements, got m = {}, n = {}",
            inst.m(),
            inst.n()
        )));
    }
    if resolution < 2 {
        return Err(Error::InvalidInput("oracle resolution must be at least 2".into()));
    }
    let points = count(&axes(inst, resolution));
    if points > GRID_BUDGET {
        let max_resolution = (2..resolution).rev().find(|&r| count(&axes(inst, r)) <= GRID_BUDGET).unwrap_or(1);
        return Err(Error::OracleBudget { points, budget: GRID_BUDGET, max_resolution });
    }
    Ok(points)
}

fn grid_best(inst: &OracleInstance, axes: &[Axis]) -> Option<(f64, Vec<f64>)> {
    let inner: usize = axes[1..].iter().map(|a| a.levels).product();
    (0..axes[0].levels)
        .into_par_iter()
        .filter_map(|k0| {
            let mut idx = vec![0usize; axes.len()];
            idx[0] = k0;
            let mut x: Vec<f64> = axes.iter().zip(&idx).map(|(a, &k)| a.value(k)).collect();
            let mut best: Option<(f64, Vec<f64>)> = None;
            for _ in 0..inner {
                let (w, q) = decode(inst, &x);
                if let Some(sr) = inst.evaluate(&w, &q) {
                    if best.as_ref().is_none_or(|(b, _)| sr > *b) {
                        best = Some((sr, x.clone()));
                    }
                }
                // Odometer increment over axes 1.. with the last axis fastest.
                for d in (1..axes.len()).rev() {
                    idx[d] += 1;
                    if idx[d] < axes[d].levels {
                        x[d] = axes[d].value(idx[d]);
                        break;
                    }
                    idx[d] = 0;
                    x[d] = axes[d].value(0);
                }
            }
            best
        })
        // Ties resolve to the lowest power level for a thread-independent answer.
        .reduce_with(|a, b| if b.0 > a.0 { b } else { a })
}

fn pattern_search(inst: &OracleInstance, axes: &[Axis], mut x: Vec<f64>, mut best: f64) -> (f64, Vec<f64>) {
    let mut step: Vec<f64> = axes.iter().map(Axis::spacing).collect();
    for _ in 0..20_000 {
        let mut improved = false;
        for d in 0..axes.len() {
            if step[d] == 0.0 {
                continue;
            }
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[d] = axes[d].clamp(x[d] + sign * step[d]);
                let (w, q) = decode(inst, &y);
                if let Some(sr) = inst.evaluate(&w, &q) {
                    if sr > best {
                        best = sr;
                        x = y;
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            let mut active = false;
            for (s, a) in step.iter_mut().zip(axes) {
                *s *= 0.5;
                if *s > 1e-10 * (a.hi - a.lo) {
                    active = true;
                }
            }
            if !active {
                break;
            }
        }
    }
    (best, x)
}

/// Best secrecy rate over the grid, optionally polished locally.
pub fn oracle_search(inst: &OracleInstance, grid: &OracleGrid) -> Result<OracleResult> {
    let points = check_budget(inst, grid.resolution)?;
    let axes = axes(inst, grid.resolution);
    let (mut sr, mut x) = grid_best(inst, &axes).ok_or_else(|| Error::InvalidInput("no grid point satisfies the power limits".into()))?;
    if grid.refine {
        (sr, x) = pattern_search(inst, &axes, x, sr);
    }
    let (w, q) = decode(inst, &x);
    Ok(OracleResult { sr, w, q, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn toy(n: usize, eta: f64) -> OracleInstance {
        OracleInstance {
            h_ab: vec![c(1.0, 0.5), c(-0.3, 0.8)],
            h_ae: vec![c(0.4, -0.2), c(0.9, 0.1)],
            h_ai: (0..n).map(|i| vec![c(0.5, i as f64), c(1.0, -0.5)]).collect(),
            h_ib: (0..n).map(|i| c(0.7, 0.1 * i as f64)).collect(),
            h_ie: (0..n).map(|i| c(-0.2, 0.3 + i as f64)).collect(),
            p_t: 2.0,
            p_i: 5.0,
            eta,
            sigma2_b: 0.1,
            sigma2_e: 0.1,
            sigma2_i: 0.1,
        }
    }

    #[test]
    fn budget_refusal_names_feasible_resolution() {
        let inst = toy(2, 2.0);
        match check_budget(&inst, 40) {
            Err(Error::OracleBudget { max_resolution, .. }) => {
                assert!(count(&axes(&inst, max_resolution)) <= GRID_BUDGET);
                assert!(count(&axes(&inst, max_resolution + 1)) > GRID_BUDGET);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oversized_instance_rejected() {
        assert!(check_budget(&toy(3, 1.0), 4).is_err());
    }

    #[test]
    fn infeasible_points_are_rejected() {
        let inst = toy(1, 2.0);
        assert!(inst.evaluate(&[c(2.0, 0.0), c(0.0, 0.0)], &[c(0.0, 0.0)]).is_none());
        assert!(inst.evaluate(&[c(1.0, 0.0), c(0.0, 0.0)], &[c(100.0, 0.0)]).is_none());
    }

    #[test]
    fn zero_cap_matches_empty_surface() {
        let grid = OracleGrid { resolution: 24, refine: true };
        let without = oracle_search(&toy(0, 0.0), &grid).unwrap();
        let disabled = oracle_search(&toy(2, 0.0), &grid).unwrap();
        assert!((without.sr - disabled.sr).abs() < 1e-12);
    }

    #[test]
    fn refinement_never_hurts() {
        let inst = toy(1, 2.0);
        let coarse = oracle_search(&inst, &OracleGrid { resolution: 6, refine: false }).unwrap();
        let fine = oracle_search(&inst, &OracleGrid { resolution: 6, refine: true }).unwrap();
        assert!(fine.sr >= coarse.sr);
        assert!((inst.evaluate(&fine.w, &fine.q).unwrap() - fine.sr).abs() < 1e-15);
    }
}
