//! Undetectability decision, intensity-threshold search, key-rate bound,
//! and the partial-attack analysis.
//!
//! Extended-real results use `f64::INFINITY` for the unbounded case: an
//! attack that never becomes undetectable imposes no constraint on the
//! intensity or the key rate.

use crate::metrics::{expected_metrics, BlockAggregates, MetricsReport};
use crate::model::{EveParams, NoAttackBaseline, ProtocolParams, Thresholds};
use crate::usd::usd_statistics;
use rayon::prelude::*;
use serde::Serialize;

/// Whether the attacked metrics stay inside every active acceptance
/// constraint. An undefined metric under an active constraint counts as
/// detection.
pub fn is_undetectable(m: &MetricsReport, th: &Thresholds, g_ref: f64) -> bool {
    let c = th.constraints;
    if c.qber && !m.qber.is_some_and(|q| q <= th.qber_th) {
        return false;
    }
    if c.v_ave && !m.vis_ave.is_some_and(|v| v >= th.vis_th) {
        return false;
    }
    if c.v_per_seq && !m.vis.iter().all(|v| v.is_some_and(|v| v >= th.vis_th)) {
        return false;
    }
    if c.gain && !(m.gain >= g_ref) {
        return false;
    }
    true
}

/// Logarithmic intensity grid for the threshold search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuScanSpec {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl Default for MuScanSpec {
    fn default() -> Self {
        MuScanSpec {
            from: 1e-4,
            to: 10.0,
            points: 400,
        }
    }
}

impl MuScanSpec {
    pub fn grid(&self) -> Vec<f64> {
        assert!(self.points >= 2 && self.from > 0.0 && self.from < self.to);
        let ratio = (self.to / self.from).ln();
        (0..self.points)
            .map(|i| self.from * (ratio * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }
}

/// Outcome of an intensity scan at one channel transmittance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityResult {
    pub eta_ch: f64,
    pub mu_grid: Vec<f64>,
    /// Per-grid-point verdict of [`is_undetectable`].
    pub undetectable: Vec<bool>,
    /// Infimum of the undetectable intensities, refined by bisection;
    /// `INFINITY` when the attack is detectable on the whole grid.
    pub mu_max: f64,
    /// `(1 - f) * eta_ch * eta_b * mu_max`.
    pub k_max: f64,
}

fn report_at(p: &ProtocolParams, e: &EveParams, mu: f64) -> MetricsReport {
    let mut p = *p;
    p.mu = mu;
    let u = usd_statistics(e, mu);
    expected_metrics(&p, e, &u)
}

fn undetectable_at(
    p: &ProtocolParams,
    e: &EveParams,
    eta_ch: f64,
    th: &Thresholds,
    mu: f64,
) -> bool {
    let mut probe = *p;
    probe.mu = mu;
    let g_ref = crate::model::gain_no_attack(&probe, eta_ch);
    is_undetectable(&report_at(p, e, mu), th, g_ref)
}

/// Scans the intensity grid exhaustively (the boundary need not be
/// monotone), then refines the smallest undetectable point against its
/// detectable neighbour by bisection to a relative width of `1e-3`.
pub fn scan_mu(
    p: &ProtocolParams,
    e: &EveParams,
    eta_ch: f64,
    th: &Thresholds,
    scan: &MuScanSpec,
) -> FeasibilityResult {
    let mu_grid = scan.grid();
    let undetectable: Vec<bool> = mu_grid
        .par_iter()
        .map(|&mu| undetectable_at(p, e, eta_ch, th, mu))
        .collect();
    let mu_max = match undetectable.iter().position(|&u| u) {
        None => f64::INFINITY,
        Some(idx) => {
            let mut hi = mu_grid[idx];
            let mut lo = if idx > 0 { mu_grid[idx - 1] } else { 0.0 };
            if idx == 0 && undetectable_at(p, e, eta_ch, th, lo) {
                hi = lo;
            } else {
                while hi - lo > 1e-3 * hi {
                    let mid = if lo > 0.0 {
                        (lo * hi).sqrt()
                    } else {
                        (lo + hi) / 2.0
                    };
                    if undetectable_at(p, e, eta_ch, th, mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            }
            hi
        }
    };
    FeasibilityResult {
        eta_ch,
        mu_grid,
        undetectable,
        mu_max,
        k_max: key_rate_bound(mu_max, p.f, p.eta_b, eta_ch),
    }
}

/// Largest intensity Alice can use while every attack on the scan grid
/// stays detectable.
pub fn mu_max(p: &ProtocolParams, e: &EveParams, eta_ch: f64, th: &Thresholds) -> f64 {
    scan_mu(p, e, eta_ch, th, &MuScanSpec::default()).mu_max
}

/// Upper bound on the secret-key rate implied by an intensity threshold.
/// Infinite thresholds propagate.
pub fn key_rate_bound(mu_max: f64, f: f64, eta_b: f64, eta_ch: f64) -> f64 {
    (1.0 - f) * eta_ch * eta_b * mu_max
}

/// Expected metrics when a fraction `tau_a` of the rounds is attacked and
/// the rest crosses the lossy channel untouched. Unattacked per-round
/// rates scale by the average block length to share the per-block
/// normalisation of the attacked aggregates.
pub fn mixed_metrics(
    tau_a: f64,
    attacked: &MetricsReport,
    baseline: &NoAttackBaseline,
) -> MetricsReport {
    let a = &attacked.aggregates;
    let scale = (1.0 - tau_a) * a.n_sig;
    let mix = |x: f64, rate: f64| tau_a * x + scale * rate;
    let mut n_m1 = [0.0; 5];
    let mut n_m2 = [0.0; 5];
    for idx in 0..5 {
        n_m1[idx] = mix(a.n_m1[idx], baseline.p_m1[idx]);
        n_m2[idx] = mix(a.n_m2[idx], baseline.p_m2[idx]);
    }
    MetricsReport::from_aggregates(BlockAggregates {
        n_sig: a.n_sig,
        n_clk: mix(a.n_clk, baseline.gain),
        n_key: mix(a.n_key, baseline.p_key),
        n_err: mix(a.n_err, baseline.p_err),
        n_m1,
        n_m2,
    })
}

/// Largest attacked fraction that keeps every active constraint satisfied,
/// found by bisection to an absolute width of `1e-6`. Returns 0 when even
/// the untouched system violates the constraints and 1 when the fully
/// attacked system satisfies them.
pub fn max_attack_fraction(
    attacked: &MetricsReport,
    baseline: &NoAttackBaseline,
    th: &Thresholds,
) -> f64 {
    let passes = |tau: f64| {
        let m = mixed_metrics(tau, attacked, baseline);
        is_undetectable(&m, th, baseline.gain)
    };
    if passes(1.0) {
        return 1.0;
    }
    if !passes(0.0) {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while hi - lo > 1e-6 {
        let mid = (lo + hi) / 2.0;
        if passes(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Fraction of the sifted key Eve learns when attacking a `tau_a` fraction
/// of the rounds. Undefined when no key bits exist at all.
pub fn extracted_key_ratio(
    tau_a: f64,
    attacked: &MetricsReport,
    baseline: &NoAttackBaseline,
) -> Option<f64> {
    let known = tau_a * attacked.aggregates.n_key;
    let total = known + (1.0 - tau_a) * attacked.aggregates.n_sig * baseline.p_key;
    (total > 0.0).then(|| known / total)
}

/// Partial-attack summary at one scenario point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialAttackResult {
    pub tau_a: f64,
    pub ext_k: Option<f64>,
    pub mixed: MetricsReport,
}

/// Maximises the attacked fraction under the given thresholds and reports
/// the key ratio Eve extracts at that point.
pub fn partial_attack_analysis(
    p: &ProtocolParams,
    e: &EveParams,
    eta_ch: f64,
    th: &Thresholds,
) -> PartialAttackResult {
    let u = usd_statistics(e, p.mu);
    let attacked = expected_metrics(p, e, &u);
    let baseline = NoAttackBaseline::new(p, eta_ch);
    let tau_a = max_attack_fraction(&attacked, &baseline, th);
    PartialAttackResult {
        tau_a,
        ext_k: extracted_key_ratio(tau_a, &attacked, &baseline),
        mixed: mixed_metrics(tau_a, &attacked, &baseline),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintSet, Scheme};

    fn synthetic_report(gain: f64, qber: f64, vis: f64) -> MetricsReport {
        MetricsReport::from_aggregates(BlockAggregates {
            n_sig: 1.0,
            n_clk: gain,
            n_key: 1.0,
            n_err: qber,
            n_m1: [(1.0 + vis) / 2.0; 5],
            n_m2: [(1.0 - vis) / 2.0; 5],
        })
    }

    #[test]
    fn undetectable_conjunction() {
        let th = Thresholds::default();
        let m = synthetic_report(0.3, 0.04, 0.96);
        assert!(is_undetectable(&m, &th, 0.3));
        assert!(!is_undetectable(&m, &th, 0.30001));
        let m = synthetic_report(0.3, 0.06, 0.96);
        assert!(!is_undetectable(&m, &th, 0.3));
        let m = synthetic_report(0.3, 0.04, 0.94);
        assert!(!is_undetectable(&m, &th, 0.3));
    }

    #[test]
    fn undefined_metric_fails_active_constraint() {
        let th = Thresholds::default();
        let mut m = synthetic_report(0.3, 0.04, 0.96);
        m.vis_ave = None;
        assert!(!is_undetectable(&m, &th, 0.0));
        let mut th2 = th;
        th2.constraints.v_ave = false;
        assert!(is_undetectable(&m, &th2, 0.0));
    }

    #[test]
    fn key_rate_bound_examples() {
        assert_eq!(key_rate_bound(f64::INFINITY, 0.155, 0.6, 0.01), f64::INFINITY);
        let k = key_rate_bound(0.02, 0.155, 0.6, 0.01);
        assert!((k - 1.014e-4).abs() < 1e-12);
    }

    #[test]
    fn mixed_metrics_endpoints() {
        let p = ProtocolParams::default();
        let e = EveParams::new(Scheme::Usd1);
        let u = crate::usd::usd_statistics(&e, p.mu);
        let attacked = expected_metrics(&p, &e, &u);
        let baseline = NoAttackBaseline::new(&p, 0.1);

        let at_one = mixed_metrics(1.0, &attacked, &baseline);
        assert_eq!(at_one, attacked);

        let at_zero = mixed_metrics(0.0, &attacked, &baseline);
        assert!((at_zero.gain - baseline.gain).abs() < 1e-15);
        let q = at_zero.qber.unwrap();
        assert!((q - baseline.p_err / baseline.p_key).abs() < 1e-12);
    }

    #[test]
    fn attack_fraction_trivial_cases() {
        let th = Thresholds {
            constraints: ConstraintSet::partial_attack(),
            ..Thresholds::default()
        };
        let attacked = synthetic_report(0.3, 0.01, 0.99);
        let baseline = NoAttackBaseline::new(&ProtocolParams::default(), 0.1);
        assert_eq!(max_attack_fraction(&attacked, &baseline, &th), 1.0);

        // A baseline that already violates the constraints pins tau to 0.
        let bad = NoAttackBaseline {
            gain: 0.1,
            p_key: 0.5,
            p_err: 0.25,
            p_m1: [0.01; 5],
            p_m2: [0.01; 5],
        };
        let worse = synthetic_report(0.3, 0.6, 0.0);
        assert_eq!(max_attack_fraction(&worse, &bad, &th), 0.0);
    }

    #[test]
    fn extracted_key_ratio_endpoints() {
        let p = ProtocolParams::default();
        let e = EveParams::new(Scheme::Usd1);
        let u = crate::usd::usd_statistics(&e, p.mu);
        let attacked = expected_metrics(&p, &e, &u);
        let baseline = NoAttackBaseline::new(&p, 0.1);
        assert_eq!(extracted_key_ratio(0.0, &attacked, &baseline), Some(0.0));
        assert_eq!(extracted_key_ratio(1.0, &attacked, &baseline), Some(1.0));
    }
}
