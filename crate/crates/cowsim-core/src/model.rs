//! Parameter records for the legitimate parties, the channel and the
//! eavesdropper, collected validation, and the no-attack baseline
//! statistics of the protocol.
//!
//! All intensities are mean photon numbers (dimensionless) and all angles
//! are radians. Values are immutable after construction and safe to share
//! across threads.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Eavesdropper receiver scheme.
///
/// `Usd1` maximises the probability of a conclusive result but can only
/// identify data signals. `Usd2` can also identify decoy signals at the
/// cost of a lower overall success probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Usd1,
    Usd2,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Usd1 => write!(f, "usd1"),
            Scheme::Usd2 => write!(f, "usd2"),
        }
    }
}

/// Monitored pulse sequences: the decoy signal itself plus the four
/// two-signal sequences whose adjacent pulses are both coherent.
///
/// Two-signal labels follow the convention that the label reads
/// (later, earlier): sequence `S01` means the earlier round carried signal 1
/// and the later round signal 0, so that the trailing coherent pulse of
/// signal 1 interferes with the leading coherent pulse of signal 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sequence {
    S2,
    S01,
    S02,
    S21,
    S22,
}

impl Sequence {
    pub const ALL: [Sequence; 5] = [
        Sequence::S2,
        Sequence::S01,
        Sequence::S02,
        Sequence::S21,
        Sequence::S22,
    ];

    /// Dense index used by per-sequence arrays, in `ALL` order.
    pub fn index(self) -> usize {
        match self {
            Sequence::S2 => 0,
            Sequence::S01 => 1,
            Sequence::S02 => 2,
            Sequence::S21 => 3,
            Sequence::S22 => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sequence::S2 => "2",
            Sequence::S01 => "01",
            Sequence::S02 => "02",
            Sequence::S21 => "21",
            Sequence::S22 => "22",
        }
    }

    pub fn from_label(label: &str) -> Option<Sequence> {
        Sequence::ALL.iter().copied().find(|s| s.label() == label)
    }

    /// Signal indices `(earlier, later)` for a two-signal sequence, or
    /// `None` for the within-signal decoy sequence.
    pub fn signal_pair(self) -> Option<(usize, usize)> {
        match self {
            Sequence::S2 => None,
            Sequence::S01 => Some((1, 0)),
            Sequence::S02 => Some((2, 0)),
            Sequence::S21 => Some((1, 2)),
            Sequence::S22 => Some((2, 2)),
        }
    }

    /// Sequence monitored between two consecutive rounds with the given
    /// prepared signals, if any.
    pub fn between(earlier: usize, later: usize) -> Option<Sequence> {
        match (earlier, later) {
            (1, 0) => Some(Sequence::S01),
            (2, 0) => Some(Sequence::S02),
            (1, 2) => Some(Sequence::S21),
            (2, 2) => Some(Sequence::S22),
            _ => None,
        }
    }
}

/// A single range violation found during validation. Violations are data,
/// not failures: callers collect them and decide how to report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Violation {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn check_range(
    out: &mut Vec<Violation>,
    field: &str,
    value: f64,
    lo: f64,
    hi: f64,
    lo_open: bool,
    hi_open: bool,
) {
    let lo_ok = if lo_open { value > lo } else { value >= lo };
    let hi_ok = if hi_open { value < hi } else { value <= hi };
    if !(lo_ok && hi_ok) || value.is_nan() {
        let lb = if lo_open { "(" } else { "[" };
        let rb = if hi_open { ")" } else { "]" };
        out.push(Violation::new(
            field,
            format!("{value} out of {lb}{lo}, {hi}{rb}"),
        ));
    }
}

/// Source configuration of Alice and Bob: signal intensity, decoy
/// preparation probability, and Bob's splitter and detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Mean photon number of a coherent pulse.
    pub mu: f64,
    /// Probability that Alice prepares the decoy signal.
    pub f: f64,
    /// Transmittance of Bob's data/monitor splitter.
    pub t_b: f64,
    /// Efficiency of Bob's detectors.
    pub eta_b: f64,
    /// Dark-count probability per slot of the data detector.
    pub pd_data: f64,
    /// Dark-count probability per slot of the first monitoring detector.
    pub pd_m1: f64,
    /// Dark-count probability per slot of the second monitoring detector.
    pub pd_m2: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            mu: 0.1,
            f: 0.155,
            t_b: 0.9,
            eta_b: 0.6,
            pd_data: 1e-7,
            pd_m1: 1e-7,
            pd_m2: 1e-7,
        }
    }
}

impl ProtocolParams {
    /// A priori probabilities of the three signals: the two data signals
    /// share `(1 - f)` equally and the decoy takes `f`.
    pub fn signal_probs(&self) -> [f64; 3] {
        let p_data = (1.0 - self.f) / 2.0;
        [p_data, p_data, self.f]
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if !(self.mu >= 0.0) {
            v.push(Violation::new("protocol.mu", format!("{} must be >= 0", self.mu)));
        }
        check_range(&mut v, "protocol.f", self.f, 0.0, 1.0, false, true);
        check_range(&mut v, "protocol.t_b", self.t_b, 0.0, 1.0, true, false);
        check_range(&mut v, "protocol.eta_b", self.eta_b, 0.0, 1.0, true, false);
        check_range(&mut v, "protocol.pd_data", self.pd_data, 0.0, 1.0, false, true);
        check_range(&mut v, "protocol.pd_m1", self.pd_m1, 0.0, 1.0, false, true);
        check_range(&mut v, "protocol.pd_m2", self.pd_m2, 0.0, 1.0, false, true);
        v
    }
}

/// Channel transmittance for an attenuation coefficient in dB/km and a
/// distance in km.
pub fn channel_transmittance(alpha_ch: f64, d: f64) -> Result<f64, Violation> {
    if !(alpha_ch >= 0.0) {
        return Err(Violation::new(
            "channel.alpha_ch",
            format!("{alpha_ch} must be >= 0"),
        ));
    }
    if !(d >= 0.0) {
        return Err(Violation::new("channel.d", format!("{d} must be >= 0")));
    }
    Ok(10f64.powf(-alpha_ch * d / 10.0))
}

/// Lossy channel between Alice and Bob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub eta_ch: f64,
}

impl ChannelParams {
    pub fn from_transmittance(eta_ch: f64) -> Self {
        ChannelParams { eta_ch }
    }

    pub fn from_fiber(alpha_ch: f64, d: f64) -> Result<Self, Violation> {
        Ok(ChannelParams {
            eta_ch: channel_transmittance(alpha_ch, d)?,
        })
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        check_range(&mut v, "channel.eta_ch", self.eta_ch, 0.0, 1.0, true, false);
        v
    }
}

/// Eve's receiver configuration and its imperfection model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveParams {
    pub scheme: Scheme,
    /// Maximum number of consecutive conclusive outcomes per block.
    pub m_max: usize,
    /// Transmittance of the displacement beamsplitter.
    pub bs_t: f64,
    /// Phase shift of the incoming pulses relative to Eve's reference, rad.
    pub phi: f64,
    /// Relative deviation of the interfering-pulse intensity.
    pub delta: f64,
    /// Efficiency of Eve's detectors.
    pub eta_e: f64,
    /// Dark-count probability per slot of Eve's detectors.
    pub pd_e: f64,
    /// Mode-overlap fraction of Alice's pulse at the first beamsplitter.
    pub t1: f64,
    /// Mode-overlap fraction of Eve's interfering pulse at the first beamsplitter.
    pub t2: f64,
    /// Mode-overlap fraction of the first input at the second beamsplitter (`Usd2` only).
    pub t3: f64,
    /// Mode-overlap fraction of the second input at the second beamsplitter (`Usd2` only).
    pub t4: f64,
}

impl EveParams {
    /// Scheme defaults with a mode mismatch of `2e-3` on every relevant
    /// overlap; all other imperfection values at their realistic defaults.
    pub fn new(scheme: Scheme) -> Self {
        let mut e = EveParams {
            scheme,
            m_max: 10,
            bs_t: 0.99,
            phi: 1f64.to_radians(),
            delta: 0.05,
            eta_e: 0.6,
            pd_e: 1e-7,
            t1: 1.0,
            t2: 1.0,
            t3: 1.0,
            t4: 1.0,
        };
        e.set_mode_mismatch(2e-3);
        e
    }

    /// A flawless receiver: unit transmittances and efficiency, no phase
    /// shift, no intensity deviation, no dark counts, perfect overlap.
    pub fn ideal(scheme: Scheme) -> Self {
        EveParams {
            scheme,
            m_max: 10,
            bs_t: 1.0,
            phi: 0.0,
            delta: 0.0,
            eta_e: 1.0,
            pd_e: 0.0,
            t1: 1.0,
            t2: 1.0,
            t3: 1.0,
            t4: 1.0,
        }
    }

    /// Sets every relevant overlap to `1 - epsilon`. `Usd1` only uses the
    /// first beamsplitter, so `t3` and `t4` stay at 1 there.
    pub fn set_mode_mismatch(&mut self, epsilon: f64) {
        self.t1 = 1.0 - epsilon;
        self.t2 = 1.0 - epsilon;
        match self.scheme {
            Scheme::Usd1 => {
                self.t3 = 1.0;
                self.t4 = 1.0;
            }
            Scheme::Usd2 => {
                self.t3 = 1.0 - epsilon;
                self.t4 = 1.0 - epsilon;
            }
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.m_max < 1 {
            v.push(Violation::new("eve.m_max", "must be >= 1"));
        }
        check_range(&mut v, "eve.bs_t", self.bs_t, 0.0, 1.0, true, false);
        if !self.phi.is_finite() {
            v.push(Violation::new("eve.phi", "must be finite"));
        }
        if !(self.delta >= -1.0) {
            v.push(Violation::new(
                "eve.delta",
                format!("{} below -1", self.delta),
            ));
        }
        check_range(&mut v, "eve.eta_e", self.eta_e, 0.0, 1.0, true, false);
        check_range(&mut v, "eve.pd_e", self.pd_e, 0.0, 1.0, false, true);
        check_range(&mut v, "eve.t1", self.t1, 0.0, 1.0, false, false);
        check_range(&mut v, "eve.t2", self.t2, 0.0, 1.0, false, false);
        check_range(&mut v, "eve.t3", self.t3, 0.0, 1.0, false, false);
        check_range(&mut v, "eve.t4", self.t4, 0.0, 1.0, false, false);
        if self.scheme == Scheme::Usd1 && (self.t3 != 1.0 || self.t4 != 1.0) {
            v.push(Violation::new(
                "eve.t3",
                "t3 and t4 are unused by usd1 and must be 1",
            ));
        }
        v
    }
}

/// Which observed quantities an acceptance check constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub qber: bool,
    pub v_ave: bool,
    /// Every individual sequence visibility.
    pub v_per_seq: bool,
    /// Gain must equal or exceed the legitimate no-attack gain.
    pub gain: bool,
}

impl ConstraintSet {
    /// Constraints used when Eve attacks every round.
    pub fn full_attack() -> Self {
        ConstraintSet {
            qber: true,
            v_ave: true,
            v_per_seq: false,
            gain: true,
        }
    }

    /// Constraints used for the partial-attack analysis, where the gain
    /// match is not required.
    pub fn partial_attack() -> Self {
        ConstraintSet {
            qber: true,
            v_ave: true,
            v_per_seq: false,
            gain: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.qber || self.v_ave || self.v_per_seq || self.gain)
    }
}

/// Acceptance thresholds on the observed metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub qber_th: f64,
    pub vis_th: f64,
    pub constraints: ConstraintSet,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            qber_th: 0.05,
            vis_th: 0.95,
            constraints: ConstraintSet::full_attack(),
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        check_range(&mut v, "thresholds.qber_th", self.qber_th, 0.0, 1.0, true, true);
        check_range(&mut v, "thresholds.vis_th", self.vis_th, 0.0, 1.0, true, true);
        if self.constraints.is_empty() {
            v.push(Violation::new("thresholds.constraints", "empty constraint set"));
        }
        v
    }
}

/// Probability that Bob sees at least one data-line click per round when
/// no attack is present.
pub fn gain_no_attack(p: &ProtocolParams, eta_ch: f64) -> f64 {
    let m = p.eta_b * eta_ch * p.t_b * p.mu;
    let no_click = (1.0 - p.f) * (-m).exp() + p.f * (-2.0 * m).exp();
    1.0 - no_click * (1.0 - p.pd_data) * (1.0 - p.pd_data)
}

/// Per-round probabilities that Bob distills a key bit and an erroneous
/// key bit when no attack is present.
pub fn no_attack_key_probs(p: &ProtocolParams, eta_ch: f64) -> (f64, f64) {
    let m = p.eta_b * eta_ch * p.t_b * p.mu;
    let q = 1.0 - p.pd_data;
    let p_key = (1.0 - p.f) * (1.0 - q * q * (-m).exp());
    let p_err = (1.0 - p.f) * (1.0 + q * (-m).exp()) * p.pd_data / 2.0;
    (p_key, p_err)
}

/// Per-round joint probabilities that Alice prepares the monitored
/// sequence `s` and each monitoring detector clicks at the interference
/// slot, when no attack is present.
pub fn no_attack_monitor_probs(p: &ProtocolParams, eta_ch: f64, s: Sequence) -> (f64, f64) {
    let probs = p.signal_probs();
    let weight = match s.signal_pair() {
        None => p.f,
        Some((s1, s2)) => probs[s1] * probs[s2],
    };
    let m1 = 1.0 - (1.0 - p.pd_m1) * (-2.0 * p.eta_b * eta_ch * (1.0 - p.t_b) * p.mu).exp();
    (weight * m1, weight * p.pd_m2)
}

/// No-attack reference rates consumed by the partial-attack mixing
/// formulas, all per round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoAttackBaseline {
    pub gain: f64,
    pub p_key: f64,
    pub p_err: f64,
    /// Joint monitoring click probabilities indexed by [`Sequence::index`].
    pub p_m1: [f64; 5],
    pub p_m2: [f64; 5],
}

impl NoAttackBaseline {
    pub fn new(p: &ProtocolParams, eta_ch: f64) -> Self {
        let (p_key, p_err) = no_attack_key_probs(p, eta_ch);
        let mut p_m1 = [0.0; 5];
        let mut p_m2 = [0.0; 5];
        for s in Sequence::ALL {
            let (m1, m2) = no_attack_monitor_probs(p, eta_ch, s);
            p_m1[s.index()] = m1;
            p_m2[s.index()] = m2;
        }
        NoAttackBaseline {
            gain: gain_no_attack(p, eta_ch),
            p_key,
            p_err,
            p_m1,
            p_m2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transmittance_endpoints() {
        assert_eq!(channel_transmittance(0.2, 0.0).unwrap(), 1.0);
        let t50 = channel_transmittance(0.2, 50.0).unwrap();
        assert!((t50 - 0.1).abs() < 1e-15);
        let t300 = channel_transmittance(0.2, 300.0).unwrap();
        assert!((t300 - 1e-6).abs() < 1e-18);
        assert!(channel_transmittance(-0.1, 10.0).is_err());
        assert!(channel_transmittance(0.2, -1.0).is_err());
    }

    #[test]
    fn transmittance_monotone() {
        let mut prev = 1.0;
        for i in 1..50 {
            let t = channel_transmittance(0.2, i as f64 * 6.0).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn gain_no_attack_limits() {
        let mut p = ProtocolParams::default();
        p.mu = 0.0;
        p.pd_data = 0.0;
        assert_eq!(gain_no_attack(&p, 0.1), 0.0);

        let mut p = ProtocolParams::default();
        p.f = 0.0;
        p.pd_data = 0.0;
        let expect = 1.0 - (-p.eta_b * 0.1 * p.t_b * p.mu).exp();
        assert!((gain_no_attack(&p, 0.1) - expect).abs() < 1e-15);
    }

    #[test]
    fn no_attack_key_prob_limits() {
        let mut p = ProtocolParams::default();
        p.pd_data = 0.0;
        let (_, p_err) = no_attack_key_probs(&p, 0.1);
        assert_eq!(p_err, 0.0);

        let mut p = ProtocolParams::default();
        p.mu = 0.0;
        let (p_key, _) = no_attack_key_probs(&p, 0.1);
        let q = 1.0 - p.pd_data;
        let expect = (1.0 - p.f) * (1.0 - q * q);
        assert!((p_key - expect).abs() < 1e-18);
    }

    #[test]
    fn no_attack_err_below_key() {
        for &(mu, pd) in &[(0.1, 1e-7), (0.5, 1e-3), (0.0, 0.2), (2.0, 0.4)] {
            let mut p = ProtocolParams::default();
            p.mu = mu;
            p.pd_data = pd;
            for &eta in &[1.0, 0.1, 1e-4] {
                let (p_key, p_err) = no_attack_key_probs(&p, eta);
                assert!(p_err <= p_key, "mu={mu} pd={pd} eta={eta}");
            }
        }
    }

    #[test]
    fn no_attack_monitor_prob_limits() {
        let mut p = ProtocolParams::default();
        p.pd_m2 = 0.0;
        let (_, m2) = no_attack_monitor_probs(&p, 0.1, Sequence::S01);
        assert_eq!(m2, 0.0);

        let mut p = ProtocolParams::default();
        p.pd_m1 = 0.0;
        p.mu = 0.0;
        let (m1, _) = no_attack_monitor_probs(&p, 0.1, Sequence::S2);
        assert_eq!(m1, 0.0);
    }

    #[test]
    fn validation_collects_all_violations() {
        let mut p = ProtocolParams::default();
        p.f = 1.2;
        p.pd_data = -0.1;
        let v = p.validate();
        assert_eq!(v.len(), 2);
        assert!(v[0].field.contains("f"));

        let mut e = EveParams::new(Scheme::Usd1);
        e.delta = -1.5;
        let v = e.validate();
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("below -1"));

        assert!(ProtocolParams::default().validate().is_empty());
        assert!(EveParams::new(Scheme::Usd1).validate().is_empty());
        assert!(EveParams::new(Scheme::Usd2).validate().is_empty());
        assert!(Thresholds::default().validate().is_empty());
    }

    #[test]
    fn usd1_rejects_configured_t3_t4() {
        let mut e = EveParams::new(Scheme::Usd1);
        e.t3 = 0.9;
        assert_eq!(e.validate().len(), 1);
    }

    #[test]
    fn sequence_labels_round_trip() {
        for s in Sequence::ALL {
            assert_eq!(Sequence::from_label(s.label()), Some(s));
        }
        assert_eq!(Sequence::from_label("10"), None);
    }
}
