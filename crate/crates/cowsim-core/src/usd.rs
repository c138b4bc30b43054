//! Conditional measurement statistics of the two USD receivers under
//! device imperfections.
//!
//! Both receivers approximate an optical displacement with a highly
//! transmissive beamsplitter fed by a strong reference pulse. The coherent
//! amplitude reaching each threshold detector is fixed by the receiver
//! network, so a click is a Poissonian event with a per-slot dark count.
//! Everything here is a pure function of immutable inputs.

use crate::model::{EveParams, Scheme};
use serde::Serialize;

/// Mean photon number at Eve's detector(s) conditioned on Alice's pulse
/// being vacuum or coherent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ConditionalIntensities {
    Usd1 {
        vac: f64,
        coh: f64,
    },
    Usd2 {
        vac_plus: f64,
        vac_minus: f64,
        coh_plus: f64,
        coh_minus: f64,
    },
}

/// Detector intensities of the single-detector receiver.
///
/// With a perfectly calibrated displacement the coherent input interferes
/// destructively (`coh` vanishes) while the vacuum input produces the
/// displaced reference.
pub fn usd1_conditional_intensities(e: &EveParams, mu: f64) -> ConditionalIntensities {
    debug_assert_eq!(e.scheme, Scheme::Usd1);
    let t = e.bs_t;
    let vac = t * mu * (1.0 + e.delta);
    let coh = t
        * mu
        * (2.0 + e.delta - 2.0 * (e.t1 * e.t2 * (1.0 + e.delta)).sqrt() * e.phi.cos());
    ConditionalIntensities::Usd1 { vac, coh }
}

/// Detector intensities of the two-detector receiver, for the ports of
/// constructive (`plus`) and destructive (`minus`) interference.
pub fn usd2_conditional_intensities(e: &EveParams, mu: f64) -> ConditionalIntensities {
    debug_assert_eq!(e.scheme, Scheme::Usd2);
    let t = e.bs_t;
    let od = 1.0 + e.delta;
    let s234 = (e.t2 * e.t3 * e.t4).sqrt();
    let s34 = (e.t3 * e.t4).sqrt();
    let s2 = e.t2.sqrt();
    let cross = 2.0 * (e.t1 * od).sqrt() * e.phi.cos();
    let q = t / 4.0 * mu;
    ConditionalIntensities::Usd2 {
        vac_plus: q * od * (1.0 - s234),
        vac_minus: q * od * (1.0 + s234),
        coh_plus: q * (2.0 + od * (1.0 - s234) - cross * (s2 - s34)),
        coh_minus: q * (2.0 + od * (1.0 + s234) - cross * (s2 + s34)),
    }
}

/// Probability that a threshold detector of efficiency `eta_e` and
/// dark-count probability `pd_e` does not click on a coherent pulse of
/// the given mean photon number.
pub fn no_click_probability(intensity: f64, eta_e: f64, pd_e: f64) -> f64 {
    (1.0 - pd_e) * (-eta_e * intensity).exp()
}

/// The 4x3 table of conditional probabilities `p(E_j | A_i)`: Eve's
/// outcome row j in {identify 0, identify 1, identify 2, inconclusive},
/// Alice's signal column i in {0, 1, 2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UsdStatistics {
    p: [[f64; 3]; 4],
}

impl UsdStatistics {
    /// Builds a table from the three conclusive rows; the inconclusive row
    /// completes each column to 1.
    pub fn from_conclusive_rows(rows: [[f64; 3]; 3]) -> Self {
        let mut p = [[0.0; 3]; 4];
        for i in 0..3 {
            for j in 0..3 {
                p[j][i] = rows[j][i];
            }
            p[3][i] = 1.0 - (rows[0][i] + rows[1][i] + rows[2][i]);
        }
        UsdStatistics { p }
    }

    /// `p(E_j | A_i)` with outcome row `j` in 0..4 and signal column `i` in 0..3.
    pub fn prob(&self, j: usize, i: usize) -> f64 {
        self.p[j][i]
    }

    /// Probability of any conclusive outcome given signal `i`, summed in a
    /// fixed order so that identities between columns stay exact.
    pub fn conclusive_given(&self, i: usize) -> f64 {
        self.p[0][i] + self.p[1][i] + self.p[2][i]
    }

    pub fn column(&self, i: usize) -> [f64; 4] {
        [self.p[0][i], self.p[1][i], self.p[2][i], self.p[3][i]]
    }
}

/// Fills the conditional-probability table for the configured receiver.
pub fn usd_statistics(e: &EveParams, mu: f64) -> UsdStatistics {
    match e.scheme {
        Scheme::Usd1 => {
            let ConditionalIntensities::Usd1 { vac, coh } = usd1_conditional_intensities(e, mu)
            else {
                unreachable!()
            };
            let nc_vac = no_click_probability(vac, e.eta_e, e.pd_e);
            let nc_coh = no_click_probability(coh, e.eta_e, e.pd_e);
            // A click in exactly one slot identifies the data signal whose
            // displaced pulse was non-vacuum in that slot; this receiver
            // can never return the decoy outcome.
            let hit = nc_coh * (1.0 - nc_vac);
            let miss = nc_vac * (1.0 - nc_coh);
            let decoy_leak = nc_coh * (1.0 - nc_coh);
            UsdStatistics::from_conclusive_rows([
                [hit, miss, decoy_leak],
                [miss, hit, decoy_leak],
                [0.0, 0.0, 0.0],
            ])
        }
        Scheme::Usd2 => {
            let ConditionalIntensities::Usd2 {
                vac_plus,
                vac_minus,
                coh_plus,
                coh_minus,
            } = usd2_conditional_intensities(e, mu)
            else {
                unreachable!()
            };
            let ncp_vac = no_click_probability(vac_plus, e.eta_e, e.pd_e);
            let ncm_vac = no_click_probability(vac_minus, e.eta_e, e.pd_e);
            let ncp_coh = no_click_probability(coh_plus, e.eta_e, e.pd_e);
            let ncm_coh = no_click_probability(coh_minus, e.eta_e, e.pd_e);
            // Click-pattern assignments: a data signal needs the minus
            // detector to fire only in its vacuum slot, the decoy needs
            // both plus detectors and neither minus detector.
            let hit = ncm_coh * ncp_vac * (1.0 - ncm_vac);
            let miss = ncm_vac * ncp_coh * (1.0 - ncm_coh);
            let data_leak = ncm_coh * ncp_coh * (1.0 - ncm_coh);
            let decoy_from_data =
                ncm_coh * ncm_vac * (1.0 - ncp_coh) * (1.0 - ncp_vac);
            let decoy_hit = ncm_coh * ncm_coh * (1.0 - ncp_coh) * (1.0 - ncp_coh);
            UsdStatistics::from_conclusive_rows([
                [hit, miss, data_leak],
                [miss, hit, data_leak],
                [decoy_from_data, decoy_from_data, decoy_hit],
            ])
        }
    }
}

/// Quantities derived from the table once Alice's signal distribution is
/// fixed: the conclusive probability and the Bayes posteriors used by the
/// block bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConclusiveStats {
    /// Probability that a measurement is conclusive.
    pub p_conc: f64,
    /// `P(E_j | conclusive)`; `None` when `p_conc` is 0.
    pub outcome_given_conc: Option<[f64; 3]>,
    /// `P(A_i | conclusive)`; `None` when `p_conc` is 0.
    pub signal_given_conc: Option<[f64; 3]>,
    /// `P(A_i | inconclusive)`; `None` when every measurement is conclusive.
    pub signal_given_inconc: Option<[f64; 3]>,
}

impl ConclusiveStats {
    /// The recursion factor: probability that a conclusive outcome was the
    /// decoy identification. Zero when no measurement is conclusive.
    pub fn recursion_factor(&self) -> f64 {
        self.outcome_given_conc.map_or(0.0, |o| o[2])
    }
}

/// Conclusive-measurement statistics for the decoy preparation
/// probability `f`.
pub fn conclusive_stats(u: &UsdStatistics, f: f64) -> ConclusiveStats {
    let p_sig = [(1.0 - f) / 2.0, (1.0 - f) / 2.0, f];
    let mut p_conc = 0.0;
    let mut outcome = [0.0; 3];
    let mut signal = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            let joint = p_sig[i] * u.prob(j, i);
            p_conc += joint;
            outcome[j] += joint;
        }
        signal[i] = p_sig[i] * u.conclusive_given(i);
    }
    let p_inconc = 1.0 - p_conc;
    let outcome_given_conc = if p_conc > 0.0 {
        Some([outcome[0] / p_conc, outcome[1] / p_conc, outcome[2] / p_conc])
    } else {
        None
    };
    let signal_given_conc = if p_conc > 0.0 {
        Some([signal[0] / p_conc, signal[1] / p_conc, signal[2] / p_conc])
    } else {
        None
    };
    let signal_given_inconc = if p_inconc > 0.0 {
        Some([
            p_sig[0] * u.prob(3, 0) / p_inconc,
            p_sig[1] * u.prob(3, 1) / p_inconc,
            p_sig[2] * u.prob(3, 2) / p_inconc,
        ])
    } else {
        None
    };
    ConclusiveStats {
        p_conc,
        outcome_given_conc,
        signal_given_conc,
        signal_given_inconc,
    }
}
