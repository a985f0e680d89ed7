//! Physical configuration, the secrecy-rate objective and its constraints.

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::numerics::CVector;

/// Constraint slack at or below `ACTIVE_TOL * bound` counts as active.
pub const ACTIVE_TOL: f64 = 1e-6;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Which RIS hardware model an optimization run assumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RisModel {
    /// Amplifying elements with caps `eta`, a reflect-power budget and thermal noise.
    Active,
    /// Unit-modulus phase shifters: no amplification, no RIS noise, no power budget.
    Passive,
}

/// Powers are in watts, noise variances in watts, `eta` holds amplitude caps.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemParams {
    pub m: usize,
    pub n: usize,
    pub p_t: f64,
    pub p_i: f64,
    pub eta: Vec<f64>,
    pub sigma2_b: f64,
    pub sigma2_e: f64,
    pub sigma2_i: f64,
}

impl SystemParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m: usize,
        n: usize,
        p_t: f64,
        p_i: f64,
        eta: Vec<f64>,
        sigma2_b: f64,
        sigma2_e: f64,
        sigma2_i: f64,
    ) -> Result<Self> {
        let p = Self { m, n, p_t, p_i, eta, sigma2_b, sigma2_e, sigma2_i };
        p.validate()?;
        Ok(p)
    }

    /// Same cap on every element and the same noise power everywhere.
    pub fn uniform(m: usize, n: usize, p_t: f64, p_i: f64, eta: f64, sigma2: f64) -> Result<Self> {
        Self::new(m, n, p_t, p_i, vec![eta; n], sigma2, sigma2, sigma2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(what.to_string()));
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        if self.eta.len() != self.n {
            return bad("eta must have one entry per reflecting element");
        }
        if !(self.p_t > 0.0 && self.p_t.is_finite()) {
            return bad("P_T must be positive");
        }
        if !(self.p_i > 0.0) {
            return bad("P_I must be positive");
        }
        if self.eta.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return bad("every eta_i must be positive");
        }
        for (name, s) in [("sigma2_b", self.sigma2_b), ("sigma2_e", self.sigma2_e), ("sigma2_i", self.sigma2_i)] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// The parameters a given RIS model actually optimizes against. The
    /// passive view drops RIS noise and the reflect-power budget and fixes
    /// every amplitude to one, so it intentionally fails `validate`.
    pub fn for_model(&self, model: RisModel) -> SystemParams {
        match model {
            RisModel::Active => self.clone(),
            RisModel::Passive => SystemParams {
                p_i: f64::INFINITY,
                eta: vec![1.0; self.n],
                sigma2_i: 0.0,
                ..self.clone()
            },
        }
    }

    pub fn has_ris_power_budget(&self) -> bool {
        self.p_i.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Beamformer {
    pub w: CVector,
}

impl Beamformer {
    pub fn zeros(m: usize) -> Self {
        Self { w: CVector::zeros(m) }
    }

    pub fn power(&self) -> f64 {
        self.w.norm_squared()
    }
}

/// Diagonal of the reflection matrix `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectCoefficients {
    pub q: CVector,
}

impl ReflectCoefficients {
    pub fn zeros(n: usize) -> Self {
        Self { q: CVector::zeros(n) }
    }

    /// `Q = I`.
    pub fn ones(n: usize) -> Self {
        Self { q: CVector::from_element(n, Complex64::new(1.0, 0.0)) }
    }

    /// From the lifted-problem variable `v = q*`.
    pub fn from_v(v: &CVector) -> Self {
        Self { q: v.map(|z| z.conj()) }
    }

    pub fn v(&self) -> CVector {
        self.q.map(|z| z.conj())
    }
}

#[derive(Clone, Debug)]
pub struct EffectiveChannels {
    /// `h_AB + h_IB Q H_AI`.
    pub h_b: CVector,
    /// `h_AE + h_IE Q H_AI`.
    pub h_e: CVector,
    pub htilde_b: CVector,
    pub htilde_e: CVector,
    /// `sigma_B^2 + |h_IB Q|^2 sigma_I^2`.
    pub noise_b: f64,
    pub noise_e: f64,
}

pub fn effective_channels(ch: &ChannelSet, q: &ReflectCoefficients, params: &SystemParams) -> EffectiveChannels {
    let cascade = |direct: &CVector, ris_row: &CVector| -> (CVector, f64) {
        let weighted = ris_row.component_mul(&q.q);
        let h = direct + ch.h_ai.transpose() * &weighted;
        (h, weighted.norm_squared())
    };
    let (h_b, leak_b) = cascade(&ch.h_ab, &ch.h_ib);
    let (h_e, leak_e) = cascade(&ch.h_ae, &ch.h_ie);
    let noise_b = params.sigma2_b + leak_b * params.sigma2_i;
    let noise_e = params.sigma2_e + leak_e * params.sigma2_i;
    let htilde_b = &h_b / Complex64::new(noise_b.sqrt(), 0.0);
    let htilde_e = &h_e / Complex64::new(noise_e.sqrt(), 0.0);
    EffectiveChannels { h_b, h_e, htilde_b, htilde_e, noise_b, noise_e }
}

/// Rate difference in nats; negative when Eve is better served than Bob.
pub fn secrecy_rate(ch: &ChannelSet, w: &Beamformer, q: &ReflectCoefficients, params: &SystemParams) -> f64 {
    let eff = effective_channels(ch, q, params);
    let snr_b = eff.h_b.dot(&w.w).norm_sqr() / eff.noise_b;
    let snr_e = eff.h_e.dot(&w.w).norm_sqr() / eff.noise_e;
    snr_b.ln_1p() - snr_e.ln_1p()
}

/// `|Q H_AI w|^2 + |Q|_F^2 sigma_I^2`, the RIS amplification power.
pub fn ris_power(ch: &ChannelSet, w: &Beamformer, q: &ReflectCoefficients, params: &SystemParams) -> f64 {
    let incident = &ch.h_ai * &w.w;
    let signal: f64 = incident.iter().zip(q.q.iter()).map(|(a, b)| (a * b).norm_sqr()).sum();
    signal + q.q.norm_squared() * params.sigma2_i
}

#[derive(Clone, Debug)]
pub struct ConstraintReport {
    pub transmit_power: f64,
    pub transmit_slack: f64,
    pub transmit_active: bool,
    pub ris_power: f64,
    /// Infinite when the model has no reflect-power budget.
    pub ris_power_slack: f64,
    pub ris_power_active: bool,
    pub element_slacks: Vec<f64>,
    pub elements_active: Vec<bool>,
}

impl ConstraintReport {
    pub fn worst_violation(&self) -> f64 {
        let mut worst = (-self.transmit_slack).max(0.0);
        if self.ris_power_slack.is_finite() {
            worst = worst.max(-self.ris_power_slack);
        }
        self.element_slacks.iter().fold(worst, |acc, s| acc.max(-s))
    }

    pub fn all_elements_active(&self) -> bool {
        self.elements_active.iter().all(|&a| a)
    }
}

pub fn audit_constraints(
    ch: &ChannelSet,
    w: &Beamformer,
    q: &ReflectCoefficients,
    params: &SystemParams,
) -> ConstraintReport {
    let transmit_power = w.power();
    let transmit_slack = params.p_t - transmit_power;
    let ris = ris_power(ch, w, q, params);
    let ris_power_slack = params.p_i - ris;
    let element_slacks: Vec<f64> = q.q.iter().zip(&params.eta).map(|(z, eta)| eta - z.norm()).collect();
    let elements_active = element_slacks.iter().zip(&params.eta).map(|(s, eta)| *s <= ACTIVE_TOL * eta).collect();
    ConstraintReport {
        transmit_power,
        transmit_slack,
        transmit_active: transmit_slack <= ACTIVE_TOL * params.p_t,
        ris_power: ris,
        ris_power_slack,
        ris_power_active: params.has_ris_power_budget() && ris_power_slack <= ACTIVE_TOL * params.p_i,
        element_slacks,
        elements_active,
    }
}

/// Scales `w` and clips `q` so that every constraint of the model holds.
/// Used after rank-one extraction, which can overshoot bounds by rounding.
pub fn project_feasible(
    ch: &ChannelSet,
    w: &mut Beamformer,
    q: &mut ReflectCoefficients,
    params: &SystemParams,
    model: RisModel,
) {
    for (z, &eta) in q.q.iter_mut().zip(&params.eta) {
        let r = z.norm();
        match model {
            RisModel::Passive => {
                *z = if r > 0.0 { *z / r } else { Complex64::new(1.0, 0.0) };
            }
            RisModel::Active if r > eta => *z *= eta / r,
            RisModel::Active => {}
        }
    }
    let power = w.power();
    if power > params.p_t {
        w.w *= Complex64::new((params.p_t / power).sqrt(), 0.0);
    }
    if params.has_ris_power_budget() {
        let noise = q.q.norm_squared() * params.sigma2_i;
        let signal = ris_power(ch, w, q, params) - noise;
        if signal + noise > params.p_i && signal > 0.0 {
            let room = (params.p_i - noise).max(0.0);
            w.w *= Complex64::new((room / signal).sqrt(), 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channels, ScenarioGeometry};
    use crate::numerics::CMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(m: usize, n: usize, seed: u64) -> (ChannelSet, SystemParams) {
        let params = SystemParams::uniform(m, n, 1.0, 1.0, 10.0, dbm_to_watts(-95.0)).unwrap();
        let ch = generate_channels(&params, &ScenarioGeometry::default(), seed).unwrap();
        (ch, params)
    }

    fn random_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> CVector {
        CVector::from_fn(len, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * scale)
    }

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_watts(40.0) - 10.0).abs() < 1e-12);
        assert!((dbm_to_watts(-95.0) - 3.162_277_660_168_379e-13).abs() < 1e-25);
        assert!((db_to_linear(0.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(dbm_to_watts(4.0)) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ris_off_reduces_to_direct_link() {
        let (ch, params) = setup(3, 4, 1);
        let eff = effective_channels(&ch, &ReflectCoefficients::zeros(4), &params);
        assert_eq!(eff.h_b, ch.h_ab);
        let expected = &ch.h_ab / Complex64::new(params.sigma2_b.sqrt(), 0.0);
        assert!((&eff.htilde_b - expected).norm() < 1e-6 * eff.htilde_b.norm());
    }

    #[test]
    fn scalar_hand_expansion() {
        let ch = ChannelSet {
            h_ab: CVector::from_vec(vec![Complex64::new(0.3, -0.1)]),
            h_ae: CVector::from_vec(vec![Complex64::new(0.2, 0.4)]),
            h_ai: CMatrix::from_element(1, 1, Complex64::new(-0.5, 0.7)),
            h_ib: CVector::from_vec(vec![Complex64::new(1.1, 0.2)]),
            h_ie: CVector::from_vec(vec![Complex64::new(0.0, -0.6)]),
        };
        let params = SystemParams::new(1, 1, 1.0, 1.0, vec![2.0], 0.5, 0.25, 0.1).unwrap();
        let q = ReflectCoefficients { q: CVector::from_vec(vec![Complex64::from_polar(1.5, 0.4)]) };
        let w = Beamformer { w: CVector::from_vec(vec![Complex64::new(0.6, 0.2)]) };
        let eff = effective_channels(&ch, &q, &params);
        let hb = ch.h_ab[0] + ch.h_ib[0] * q.q[0] * ch.h_ai[(0, 0)];
        let nb = 0.5 + (ch.h_ib[0] * q.q[0]).norm_sqr() * 0.1;
        assert!((eff.h_b[0] - hb).norm() < 1e-15);
        assert!((eff.noise_b - nb).abs() < 1e-15);
        let he = ch.h_ae[0] + ch.h_ie[0] * q.q[0] * ch.h_ai[(0, 0)];
        let ne = 0.25 + (ch.h_ie[0] * q.q[0]).norm_sqr() * 0.1;
        let sr = (1.0 + (hb * w.w[0]).norm_sqr() / nb).ln() - (1.0 + (he * w.w[0]).norm_sqr() / ne).ln();
        assert!((secrecy_rate(&ch, &w, &q, &params) - sr).abs() < 1e-14);
    }

    #[test]
    fn matrix_form_matches_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (ch, params) = setup(4, 6, 2);
        let q = ReflectCoefficients { q: random_vec(&mut rng, 6, 8.0) };
        let eff = effective_channels(&ch, &q, &params);
        for j in 0..4 {
            let mut acc = ch.h_ab[j];
            for i in 0..6 {
                acc += ch.h_ib[i] * q.q[i] * ch.h_ai[(i, j)];
            }
            assert!((acc - eff.h_b[j]).norm() <= 1e-12 * acc.norm().max(1e-300) + 1e-30);
        }
    }

    #[test]
    fn zero_beamformer_has_zero_rate() {
        let (ch, params) = setup(4, 5, 4);
        let q = ReflectCoefficients::ones(5);
        assert_eq!(secrecy_rate(&ch, &Beamformer::zeros(4), &q, &params), 0.0);
    }

    #[test]
    fn ris_off_gives_plain_wiretap_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (ch, params) = setup(3, 4, 5);
        let w = Beamformer { w: random_vec(&mut rng, 3, 1.0) };
        let expected = (1.0 + ch.h_ab.dot(&w.w).norm_sqr() / params.sigma2_b).ln()
            - (1.0 + ch.h_ae.dot(&w.w).norm_sqr() / params.sigma2_e).ln();
        let got = secrecy_rate(&ch, &w, &ReflectCoefficients::zeros(4), &params);
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn rate_is_phase_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (ch, params) = setup(4, 6, 6);
        let q = ReflectCoefficients { q: random_vec(&mut rng, 6, 4.0) };
        let w = Beamformer { w: random_vec(&mut rng, 4, 1.0) };
        let base = secrecy_rate(&ch, &w, &q, &params);
        for k in 0..8 {
            let rot = Beamformer { w: &w.w * Complex64::from_polar(1.0, 0.7 * k as f64) };
            assert!((secrecy_rate(&ch, &rot, &q, &params) - base).abs() < 1e-12);
        }
    }

    #[test]
    fn passive_view_matches_noise_free_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (ch, params) = setup(2, 3, 7);
        let q = ReflectCoefficients { q: random_vec(&mut rng, 3, 1.0).map(|z| z / z.norm()) };
        let w = Beamformer { w: random_vec(&mut rng, 2, 1.0) };
        let eff = effective_channels(&ch, &q, &params);
        let passive = params.for_model(RisModel::Passive);
        let expected = (1.0 + eff.h_b.dot(&w.w).norm_sqr() / params.sigma2_b).ln()
            - (1.0 + eff.h_e.dot(&w.w).norm_sqr() / params.sigma2_e).ln();
        assert!((secrecy_rate(&ch, &w, &q, &passive) - expected).abs() < 1e-12);
    }

    #[test]
    fn audit_at_origin_has_full_slack() {
        let (ch, params) = setup(2, 3, 1);
        let r = audit_constraints(&ch, &Beamformer::zeros(2), &ReflectCoefficients::zeros(3), &params);
        assert_eq!(r.transmit_slack, params.p_t);
        assert_eq!(r.ris_power_slack, params.p_i);
        assert_eq!(r.element_slacks, params.eta);
        assert!(!r.transmit_active && !r.ris_power_active);
        assert!(r.elements_active.iter().all(|a| !a));
    }

    #[test]
    fn audit_flags_boundary_transmit_power() {
        let (ch, params) = setup(2, 3, 1);
        let w = Beamformer { w: CVector::from_vec(vec![Complex64::new(params.p_t.sqrt(), 0.0), Complex64::new(0.0, 0.0)]) };
        let r = audit_constraints(&ch, &w, &ReflectCoefficients::zeros(3), &params);
        assert!(r.transmit_slack.abs() < 1e-15);
        assert!(r.transmit_active);
    }

    #[test]
    fn audit_slacks_reproduce_independently() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (ch, params) = setup(3, 5, 9);
        let w = Beamformer { w: random_vec(&mut rng, 3, 1.0) };
        let q = ReflectCoefficients { q: random_vec(&mut rng, 5, 20.0) };
        let r = audit_constraints(&ch, &w, &q, &params);
        let mut lhs = 0.0;
        for i in 0..5 {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..3 {
                row += ch.h_ai[(i, j)] * w.w[j];
            }
            lhs += (q.q[i] * row).norm_sqr() + q.q[i].norm_sqr() * params.sigma2_i;
        }
        assert!((r.ris_power_slack - (params.p_i - lhs)).abs() < 1e-9);
        let tp: f64 = w.w.iter().map(|z| z.norm_sqr()).sum();
        assert!((r.transmit_slack - (params.p_t - tp)).abs() < 1e-9);
        for i in 0..5 {
            assert!((r.element_slacks[i] - (params.eta[i] - q.q[i].norm())).abs() < 1e-12);
        }
    }
}
