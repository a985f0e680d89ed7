//! Large-scale pathloss and small-scale fading for the five links.
//!
//! Direct links (Alice-Bob, Alice-Eve) are Rayleigh. Links touching the RIS
//! are Rician with a uniform-linear-array line-of-sight component:
//!
//! ```text
//! H_AI = (sqrt(k/(k+1)) a_I(phi_AI) a_A(theta_AI)^H + sqrt(1/(k+1)) H~) PL_AI
//! ```
//!
//! Randomness comes from ChaCha8 used as a counter-based generator. Each
//! block owns one stream, and entry `(row, col)` of a block always reads
//! the same words of its stream, so growing `m` or `n` leaves previously
//! drawn entries untouched:
//!
//! | block  | stream | word offset of entry        |
//! |--------|--------|-----------------------------|
//! | `h_AB` | 0      | `4 * k`                     |
//! | `h_AE` | 1      | `4 * k`                     |
//! | `H_AI` | 2      | `4 * (row * 65536 + col)`   |
//! | `h_IB` | 3      | `4 * k`                     |
//! | `h_IE` | 4      | `4 * k`                     |

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{CMatrix, CVector};
use crate::system::SystemParams;

pub type Point = [f64; 2];

const COLUMN_STRIDE: u128 = 1 << 16;

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioGeometry {
    pub alice_pos: Point,
    pub bob_pos: Point,
    pub eve_pos: Point,
    pub ris_pos: Point,
    /// Reference distance in meters.
    pub d0: f64,
    /// Pathloss at `d0` in dB.
    pub beta_db: f64,
    pub alpha_ab: f64,
    pub alpha_ae: f64,
    pub alpha_ai: f64,
    pub alpha_ib: f64,
    pub alpha_ie: f64,
    /// Rician factor (LoS to scattered power ratio).
    pub kappa: f64,
    pub dt_over_lambda: f64,
    pub dr_over_lambda: f64,
}

impl Default for ScenarioGeometry {
    fn default() -> Self {
        Self {
            alice_pos: [0.0, 0.0],
            bob_pos: [90.0, 20.0],
            eve_pos: [70.0, 20.0],
            ris_pos: [40.0, 40.0],
            d0: 1.0,
            beta_db: -30.0,
            alpha_ab: 3.8,
            alpha_ae: 3.5,
            alpha_ai: 2.2,
            alpha_ib: 2.2,
            alpha_ie: 2.2,
            kappa: 5.0,
            dt_over_lambda: 0.5,
            dr_over_lambda: 0.5,
        }
    }
}

fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Angle between the x-axis and the ray `from -> to`.
fn bearing(from: Point, to: Point) -> f64 {
    ((to[0] - from[0]) / distance(from, to)).clamp(-1.0, 1.0).acos()
}

impl ScenarioGeometry {
    pub fn validate(&self) -> Result<()> {
        let nodes = [
            ("alice_pos", self.alice_pos),
            ("bob_pos", self.bob_pos),
            ("eve_pos", self.eve_pos),
            ("ris_pos", self.ris_pos),
        ];
        for (i, (na, a)) in nodes.iter().enumerate() {
            if !(a[0].is_finite() && a[1].is_finite()) {
                return Err(Error::InvalidInput(format!("{na} is not finite")));
            }
            for (nb, b) in &nodes[i + 1..] {
                if distance(*a, *b) <= 0.0 {
                    return Err(Error::InvalidInput(format!("{na} and {nb} coincide")));
                }
            }
        }
        let positive = [
            ("d0", self.d0),
            ("alpha_ab", self.alpha_ab),
            ("alpha_ae", self.alpha_ae),
            ("alpha_ai", self.alpha_ai),
            ("alpha_ib", self.alpha_ib),
            ("alpha_ie", self.alpha_ie),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {x}")));
            }
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::InvalidInput(format!("kappa must be nonnegative, got {}", self.kappa)));
        }
        if !self.beta_db.is_finite() {
            return Err(Error::InvalidInput("beta_db is not finite".into()));
        }
        Ok(())
    }

    pub fn d_ab(&self) -> f64 {
        distance(self.alice_pos, self.bob_pos)
    }
    pub fn d_ae(&self) -> f64 {
        distance(self.alice_pos, self.eve_pos)
    }
    pub fn d_ai(&self) -> f64 {
        distance(self.alice_pos, self.ris_pos)
    }
    pub fn d_ib(&self) -> f64 {
        distance(self.ris_pos, self.bob_pos)
    }
    pub fn d_ie(&self) -> f64 {
        distance(self.ris_pos, self.eve_pos)
    }

    /// Angle of departure at Alice toward the RIS.
    pub fn theta_ai(&self) -> f64 {
        bearing(self.alice_pos, self.ris_pos)
    }

    /// Angle of arrival at the RIS from Alice.
    pub fn phi_ai(&self) -> f64 {
        PI - self.theta_ai()
    }

    pub fn phi_ib(&self) -> f64 {
        bearing(self.ris_pos, self.bob_pos)
    }

    pub fn phi_ie(&self) -> f64 {
        bearing(self.ris_pos, self.eve_pos)
    }
}

/// Amplitude scale `sqrt(beta (d0/d)^alpha)`.
pub fn pathloss(d: f64, alpha: f64, geometry: &ScenarioGeometry) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidInput(format!("distance must be positive, got {d}")));
    }
    let beta = 10f64.powf(geometry.beta_db / 10.0);
    Ok((beta * (geometry.d0 / d).powf(alpha)).sqrt())
}

/// ULA response: entry `k` is `exp(j 2 pi k spacing cos(angle))`.
pub fn steering_vector(count: usize, spacing_over_lambda: f64, angle: f64) -> CVector {
    let step = 2.0 * PI * spacing_over_lambda * angle.cos();
    CVector::from_fn(count, |k, _| Complex64::from_polar(1.0, step * k as f64))
}

/// The five channel blocks. Row channels are stored as plain vectors whose
/// entries are the row entries, so `h w = h.dot(&w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub h_ab: CVector,
    pub h_ae: CVector,
    /// `n x m`.
    pub h_ai: CMatrix,
    pub h_ib: CVector,
    pub h_ie: CVector,
}

impl ChannelSet {
    pub fn m(&self) -> usize {
        self.h_ab.len()
    }

    pub fn n(&self) -> usize {
        self.h_ib.len()
    }

    pub fn check_dims(&self, m: usize, n: usize) -> Result<()> {
        let ok = self.h_ab.len() == m
            && self.h_ae.len() == m
            && self.h_ai.nrows() == n
            && self.h_ai.ncols() == m
            && self.h_ib.len() == n
            && self.h_ie.len() == n;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("channel dimensions do not match m = {m}, n = {n}")))
        }
    }
}

#[derive(Clone, Copy)]
enum Block {
    AliceBob = 0,
    AliceEve = 1,
    AliceRis = 2,
    RisBob = 3,
    RisEve = 4,
}

struct GaussianStream {
    rng: ChaCha8Rng,
}

impl GaussianStream {
    fn new(seed: u64, block: Block) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block as u64);
        Self { rng }
    }

    /// Circular complex Gaussian with unit variance at a fixed entry index.
    fn at(&mut self, index: u128) -> Complex64 {
        self.rng.set_word_pos(4 * index);
        let u1 = 1.0 - unit_interval(self.rng.next_u64());
        let u2 = unit_interval(self.rng.next_u64());
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        Complex64::new(r * c, r * s) * std::f64::consts::FRAC_1_SQRT_2
    }
}

/// Uniform in `[0, 1)` from the top 53 bits.
fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn generate_channels(params: &SystemParams, geometry: &ScenarioGeometry, seed: u64) -> Result<ChannelSet> {
    params.validate()?;
    geometry.validate()?;
    let (m, n) = (params.m, params.n);

    let los = (geometry.kappa / (geometry.kappa + 1.0)).sqrt();
    let nlos = (1.0 / (geometry.kappa + 1.0)).sqrt();

    let rayleigh_row = |block: Block, len: usize, scale: f64| {
        let mut stream = GaussianStream::new(seed, block);
        CVector::from_fn(len, |k, _| stream.at(k as u128) * scale)
    };
    let rician_row = |block: Block, angle: f64, scale: f64| {
        let mut stream = GaussianStream::new(seed, block);
        let a = steering_vector(n, geometry.dr_over_lambda, angle);
        CVector::from_fn(n, |k, _| (a[k] * los + stream.at(k as u128) * nlos) * scale)
    };

    let h_ab = rayleigh_row(Block::AliceBob, m, pathloss(geometry.d_ab(), geometry.alpha_ab, geometry)?);
    let h_ae = rayleigh_row(Block::AliceEve, m, pathloss(geometry.d_ae(), geometry.alpha_ae, geometry)?);

    let pl_ai = pathloss(geometry.d_ai(), geometry.alpha_ai, geometry)?;
    let a_ris = steering_vector(n, geometry.dr_over_lambda, geometry.phi_ai());
    let a_alice = steering_vector(m, geometry.dt_over_lambda, geometry.theta_ai());
    let mut stream = GaussianStream::new(seed, Block::AliceRis);
    let h_ai = CMatrix::from_fn(n, m, |i, j| {
        let los_part = a_ris[i] * a_alice[j].conj();
        let scatter = stream.at(i as u128 * COLUMN_STRIDE + j as u128);
        (los_part * los + scatter * nlos) * pl_ai
    });

    let h_ib = rician_row(Block::RisBob, geometry.phi_ib(), pathloss(geometry.d_ib(), geometry.alpha_ib, geometry)?);
    let h_ie = rician_row(Block::RisEve, geometry.phi_ie(), pathloss(geometry.d_ie(), geometry.alpha_ie, geometry)?);

    Ok(ChannelSet { h_ab, h_ae, h_ai, h_ib, h_ie })
}
