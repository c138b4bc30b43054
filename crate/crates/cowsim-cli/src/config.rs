//! Scenario configuration: a flat key-value document with dotted sections
//! mirroring the domain records. Unset keys fall back to the realistic
//! defaults baked into the domain types; validation is total and reports
//! every violation at once.

use anyhow::{bail, Context, Result};
use cowsim_core::model::{
    ChannelParams, ConstraintSet, EveParams, ProtocolParams, Scheme, Thresholds, Violation,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pd_data: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pd_m1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pd_m2: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    /// Direct transmittance; mutually exclusive with the fiber keys.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_ch: Option<f64>,
    /// Attenuation in dB/km.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_ch: Option<f64>,
    /// Distance in km.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EveSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_max: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bs_t: Option<f64>,
    /// Phase shift in degrees; stored in radians internally.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pd_e: Option<f64>,
    /// Convenience mode mismatch: expands to the overlap fractions
    /// relevant for the scheme. Mutually exclusive with explicit t keys.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t4: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qber_th: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vis_th: Option<f64>,
    /// Subset of "qber", "v_ave", "v_per_seq", "gain".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// The raw configuration document.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub protocol: ProtocolSection,
    pub channel: ChannelSection,
    pub eve: EveSection,
    pub thresholds: ThresholdsSection,
    pub mc: McSection,
}

/// A fully resolved and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub protocol: ProtocolParams,
    pub channel: ChannelParams,
    pub eve: EveParams,
    pub qber_th: f64,
    pub vis_th: f64,
    /// Set only when the config pinned the constraint set explicitly.
    pub constraints: Option<ConstraintSet>,
    pub rounds: u64,
    pub seed: Option<u64>,
}

impl Scenario {
    /// Thresholds with the constraint set requested by the config, or the
    /// given default for the analysis at hand.
    pub fn thresholds(&self, default_set: ConstraintSet) -> Thresholds {
        Thresholds {
            qber_th: self.qber_th,
            vis_th: self.vis_th,
            constraints: self.constraints.unwrap_or(default_set),
        }
    }

    /// Representative mode-mismatch value for reporting.
    pub fn epsilon(&self) -> f64 {
        1.0 - self.eve.t1
    }

    /// Canonical resolved form: feeding this back as a config reproduces
    /// the same scenario.
    pub fn echo(&self) -> ScenarioFile {
        ScenarioFile {
            protocol: ProtocolSection {
                mu: Some(self.protocol.mu),
                f: Some(self.protocol.f),
                t_b: Some(self.protocol.t_b),
                eta_b: Some(self.protocol.eta_b),
                pd_data: Some(self.protocol.pd_data),
                pd_m1: Some(self.protocol.pd_m1),
                pd_m2: Some(self.protocol.pd_m2),
            },
            channel: ChannelSection {
                eta_ch: Some(self.channel.eta_ch),
                alpha_ch: None,
                d: None,
            },
            eve: EveSection {
                scheme: Some(self.eve.scheme),
                m_max: Some(self.eve.m_max as u64),
                bs_t: Some(self.eve.bs_t),
                phase_deg: Some(self.eve.phi.to_degrees()),
                delta: Some(self.eve.delta),
                eta_e: Some(self.eve.eta_e),
                pd_e: Some(self.eve.pd_e),
                epsilon: None,
                t1: Some(self.eve.t1),
                t2: Some(self.eve.t2),
                t3: Some(self.eve.t3),
                t4: Some(self.eve.t4),
            },
            thresholds: ThresholdsSection {
                qber_th: Some(self.qber_th),
                vis_th: Some(self.vis_th),
                constraints: self.constraints.map(constraint_names),
            },
            mc: McSection {
                rounds: Some(self.rounds),
                seed: self.seed,
            },
        }
    }
}

fn constraint_names(c: ConstraintSet) -> Vec<String> {
    let mut names = Vec::new();
    if c.qber {
        names.push("qber".to_string());
    }
    if c.v_ave {
        names.push("v_ave".to_string());
    }
    if c.v_per_seq {
        names.push("v_per_seq".to_string());
    }
    if c.gain {
        names.push("gain".to_string());
    }
    names
}

fn parse_constraints(names: &[String], out: &mut Vec<Violation>) -> Option<ConstraintSet> {
    let mut set = ConstraintSet {
        qber: false,
        v_ave: false,
        v_per_seq: false,
        gain: false,
    };
    for name in names {
        match name.as_str() {
            "qber" => set.qber = true,
            "v_ave" => set.v_ave = true,
            "v_per_seq" => set.v_per_seq = true,
            "gain" => set.gain = true,
            other => out.push(Violation::new(
                "thresholds.constraints",
                format!("unknown constraint '{other}'"),
            )),
        }
    }
    if set.is_empty() {
        out.push(Violation::new("thresholds.constraints", "empty constraint set"));
    }
    Some(set)
}

/// Resolves defaults, expands convenience keys and collects every range
/// violation.
pub fn resolve(file: &ScenarioFile) -> std::result::Result<Scenario, Vec<Violation>> {
    let mut violations = Vec::new();

    let defaults = ProtocolParams::default();
    let p = &file.protocol;
    let protocol = ProtocolParams {
        mu: p.mu.unwrap_or(defaults.mu),
        f: p.f.unwrap_or(defaults.f),
        t_b: p.t_b.unwrap_or(defaults.t_b),
        eta_b: p.eta_b.unwrap_or(defaults.eta_b),
        pd_data: p.pd_data.unwrap_or(defaults.pd_data),
        pd_m1: p.pd_m1.unwrap_or(defaults.pd_m1),
        pd_m2: p.pd_m2.unwrap_or(defaults.pd_m2),
    };
    violations.extend(protocol.validate());

    let ch = &file.channel;
    let channel = if ch.eta_ch.is_some() && (ch.alpha_ch.is_some() || ch.d.is_some()) {
        violations.push(Violation::new(
            "channel",
            "eta_ch and (alpha_ch, d) are mutually exclusive",
        ));
        ChannelParams::from_transmittance(1.0)
    } else if let Some(eta) = ch.eta_ch {
        ChannelParams::from_transmittance(eta)
    } else {
        match ChannelParams::from_fiber(ch.alpha_ch.unwrap_or(0.2), ch.d.unwrap_or(50.0)) {
            Ok(c) => c,
            Err(v) => {
                violations.push(v);
                ChannelParams::from_transmittance(1.0)
            }
        }
    };
    violations.extend(channel.validate());

    let ev = &file.eve;
    let scheme = ev.scheme.unwrap_or(Scheme::Usd1);
    let base = EveParams::new(scheme);
    let explicit_overlap =
        ev.t1.is_some() || ev.t2.is_some() || ev.t3.is_some() || ev.t4.is_some();
    if ev.epsilon.is_some() && explicit_overlap {
        violations.push(Violation::new(
            "eve.epsilon",
            "epsilon and explicit overlap fractions are mutually exclusive",
        ));
    }
    let mut eve = EveParams {
        scheme,
        m_max: ev.m_max.unwrap_or(base.m_max as u64) as usize,
        bs_t: ev.bs_t.unwrap_or(base.bs_t),
        phi: ev.phase_deg.map_or(base.phi, f64::to_radians),
        delta: ev.delta.unwrap_or(base.delta),
        eta_e: ev.eta_e.unwrap_or(base.eta_e),
        pd_e: ev.pd_e.unwrap_or(base.pd_e),
        t1: 1.0,
        t2: 1.0,
        t3: 1.0,
        t4: 1.0,
    };
    if explicit_overlap {
        eve.t1 = ev.t1.unwrap_or(1.0);
        eve.t2 = ev.t2.unwrap_or(1.0);
        eve.t3 = ev.t3.unwrap_or(1.0);
        eve.t4 = ev.t4.unwrap_or(1.0);
    } else {
        eve.set_mode_mismatch(ev.epsilon.unwrap_or(2e-3));
    }
    violations.extend(eve.validate());

    let th = &file.thresholds;
    let qber_th = th.qber_th.unwrap_or(0.05);
    let vis_th = th.vis_th.unwrap_or(0.95);
    let constraints = th
        .constraints
        .as_deref()
        .and_then(|names| parse_constraints(names, &mut violations));
    let check = Thresholds {
        qber_th,
        vis_th,
        constraints: constraints.unwrap_or_else(ConstraintSet::full_attack),
    };
    violations.extend(check.validate());

    let rounds = file.mc.rounds.unwrap_or(1_000_000);
    if rounds == 0 {
        violations.push(Violation::new("mc.rounds", "must be >= 1"));
    }

    if violations.is_empty() {
        Ok(Scenario {
            protocol,
            channel,
            eve,
            qber_th,
            vis_th,
            constraints,
            rounds,
            seed: file.mc.seed,
        })
    } else {
        Err(violations)
    }
}

/// Reads a configuration document. JSON and TOML are accepted; a document
/// with a top-level `scenario` key (such as a previous JSON output of this
/// tool) is unwrapped first.
pub fn load_file(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e == "json")
        || text.trim_start().starts_with('{');
    if is_json {
        let value: serde_json::Value = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse {} as JSON", path.display()))?;
        let scenario = value.get("scenario").cloned().unwrap_or(value);
        Ok(serde_json::from_value(scenario)
            .with_context(|| format!("invalid scenario in {}", path.display()))?)
    } else {
        let value: toml::Value = text
            .parse()
            .with_context(|| format!("cannot parse {} as TOML", path.display()))?;
        let scenario = value
            .get("scenario")
            .cloned()
            .unwrap_or(value);
        Ok(scenario
            .try_into()
            .with_context(|| format!("invalid scenario in {}", path.display()))?)
    }
}

/// Known sweep parameter paths.
pub const SWEEP_PARAMS: &[&str] = &[
    "protocol.mu",
    "protocol.f",
    "protocol.t_b",
    "protocol.eta_b",
    "protocol.pd_data",
    "protocol.pd_m1",
    "protocol.pd_m2",
    "channel.eta_ch",
    "channel.alpha_ch",
    "channel.d",
    "eve.m_max",
    "eve.bs_t",
    "eve.phase_deg",
    "eve.delta",
    "eve.eta_e",
    "eve.pd_e",
    "eve.epsilon",
    "thresholds.qber_th",
    "thresholds.vis_th",
];

/// Overwrites one dotted key in the raw document, clearing keys it is
/// mutually exclusive with.
pub fn set_param(file: &mut ScenarioFile, key: &str, value: f64) -> Result<()> {
    match key {
        "protocol.mu" => file.protocol.mu = Some(value),
        "protocol.f" => file.protocol.f = Some(value),
        "protocol.t_b" => file.protocol.t_b = Some(value),
        "protocol.eta_b" => file.protocol.eta_b = Some(value),
        "protocol.pd_data" => file.protocol.pd_data = Some(value),
        "protocol.pd_m1" => file.protocol.pd_m1 = Some(value),
        "protocol.pd_m2" => file.protocol.pd_m2 = Some(value),
        "channel.eta_ch" => {
            file.channel = ChannelSection {
                eta_ch: Some(value),
                alpha_ch: None,
                d: None,
            };
        }
        "channel.alpha_ch" => {
            file.channel.eta_ch = None;
            file.channel.alpha_ch = Some(value);
        }
        "channel.d" => {
            file.channel.eta_ch = None;
            file.channel.d = Some(value);
        }
        "eve.m_max" => file.eve.m_max = Some(value.round().max(1.0) as u64),
        "eve.bs_t" => file.eve.bs_t = Some(value),
        "eve.phase_deg" => file.eve.phase_deg = Some(value),
        "eve.delta" => file.eve.delta = Some(value),
        "eve.eta_e" => file.eve.eta_e = Some(value),
        "eve.pd_e" => file.eve.pd_e = Some(value),
        "eve.epsilon" => {
            file.eve.epsilon = Some(value);
            file.eve.t1 = None;
            file.eve.t2 = None;
            file.eve.t3 = None;
            file.eve.t4 = None;
        }
        "thresholds.qber_th" => file.thresholds.qber_th = Some(value),
        "thresholds.vis_th" => file.thresholds.vis_th = Some(value),
        other => bail!(
            "unknown sweep parameter '{other}' (known: {})",
            SWEEP_PARAMS.join(", ")
        ),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_defaults() {
        let s = resolve(&ScenarioFile::default()).unwrap();
        assert_eq!(s.protocol, ProtocolParams::default());
        assert_eq!(s.eve.m_max, 10);
        assert!((s.eve.phi - 1f64.to_radians()).abs() < 1e-15);
        assert_eq!(s.eve.t1, 0.998);
        assert_eq!(s.eve.t3, 1.0);
        assert!((s.channel.eta_ch - 0.1).abs() < 1e-12);
        assert_eq!(s.qber_th, 0.05);
        assert!(s.constraints.is_none());
        assert!(s.seed.is_none());
    }

    #[test]
    fn violations_are_collected() {
        let mut file = ScenarioFile::default();
        file.protocol.f = Some(1.5);
        file.eve.delta = Some(-2.0);
        let err = resolve(&file).unwrap_err();
        assert_eq!(err.len(), 2);
    }

    #[test]
    fn ambiguous_channel_is_rejected() {
        let mut file = ScenarioFile::default();
        file.channel.eta_ch = Some(0.1);
        file.channel.d = Some(50.0);
        let err = resolve(&file).unwrap_err();
        assert!(err.iter().any(|v| v.message.contains("mutually exclusive")));
    }

    #[test]
    fn epsilon_conflicts_with_explicit_overlaps() {
        let mut file = ScenarioFile::default();
        file.eve.epsilon = Some(0.01);
        file.eve.t1 = Some(0.99);
        assert!(resolve(&file).is_err());
    }

    #[test]
    fn usd2_epsilon_expands_to_all_overlaps() {
        let mut file = ScenarioFile::default();
        file.eve.scheme = Some(Scheme::Usd2);
        file.eve.epsilon = Some(0.01);
        let s = resolve(&file).unwrap();
        assert_eq!(s.eve.t1, 0.99);
        assert_eq!(s.eve.t4, 0.99);
    }

    #[test]
    fn echo_round_trips() {
        let mut file = ScenarioFile::default();
        file.eve.scheme = Some(Scheme::Usd2);
        file.eve.epsilon = Some(0.004);
        file.mc.seed = Some(9);
        let s = resolve(&file).unwrap();
        let echoed = resolve(&s.echo()).unwrap();
        assert_eq!(echoed.protocol, s.protocol);
        assert_eq!(echoed.eve, s.eve);
        assert_eq!(echoed.channel.eta_ch, s.channel.eta_ch);
        assert_eq!(echoed.seed, s.seed);
    }

    #[test]
    fn sweep_setter_clears_conflicts() {
        let mut file = ScenarioFile::default();
        file.channel.eta_ch = Some(0.2);
        set_param(&mut file, "channel.d", 100.0).unwrap();
        assert!(file.channel.eta_ch.is_none());
        let s = resolve(&file).unwrap();
        assert!((s.channel.eta_ch - 0.01).abs() < 1e-12);
        assert!(set_param(&mut file, "bogus.key", 1.0).is_err());
    }
}
