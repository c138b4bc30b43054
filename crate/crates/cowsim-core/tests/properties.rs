//! Property tests over randomly drawn valid configurations.

use cowsim_core::feasibility::mixed_metrics;
use cowsim_core::mc::{process_block, ConclusiveOutcome, Pulse};
use cowsim_core::metrics::{
    block_distribution, expected_metrics, recursion_reference, MetricsReport,
};
use cowsim_core::model::{EveParams, NoAttackBaseline, ProtocolParams, Scheme, Sequence};
use cowsim_core::usd::{conclusive_stats, usd_statistics};
use proptest::prelude::*;

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn arb_protocol() -> impl Strategy<Value = ProtocolParams> {
    (
        log_uniform(1e-3, 4.0),
        0.01..0.9f64,
        0.1..1.0f64,
        0.05..1.0f64,
        log_uniform(1e-9, 0.3),
        log_uniform(1e-9, 0.3),
        log_uniform(1e-9, 0.3),
    )
        .prop_map(|(mu, f, t_b, eta_b, pd_data, pd_m1, pd_m2)| ProtocolParams {
            mu,
            f,
            t_b,
            eta_b,
            pd_data,
            pd_m1,
            pd_m2,
        })
}

fn arb_eve() -> impl Strategy<Value = EveParams> {
    (
        prop_oneof![Just(Scheme::Usd1), Just(Scheme::Usd2)],
        1usize..=20,
        0.5..0.999f64,
        -0.1..0.1f64,
        -0.5..1.0f64,
        0.05..1.0f64,
        log_uniform(1e-9, 0.2),
        0.7..1.0f64,
        0.7..1.0f64,
        (0.7..1.0f64, 0.7..1.0f64),
    )
        .prop_map(
            |(scheme, m_max, bs_t, phi, delta, eta_e, pd_e, t1, t2, (t3, t4))| {
                let (t3, t4) = match scheme {
                    Scheme::Usd1 => (1.0, 1.0),
                    Scheme::Usd2 => (t3, t4),
                };
                EveParams {
                    scheme,
                    m_max,
                    bs_t,
                    phi,
                    delta,
                    eta_e,
                    pd_e,
                    t1,
                    t2,
                    t3,
                    t4,
                }
            },
        )
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn assert_report_in_range(report: &MetricsReport) {
    assert!((0.0..=1.0).contains(&report.gain), "gain {}", report.gain);
    if let Some(q) = report.qber {
        assert!((0.0..=1.0).contains(&q), "qber {q}");
    }
    for v in report.vis.iter().flatten() {
        assert!((-1.0..=1.0).contains(v), "vis {v}");
    }
    if let Some(v) = report.vis_ave {
        assert!((-1.0..=1.0).contains(&v), "vis_ave {v}");
    }
    assert!(report.aggregates.n_err <= report.aggregates.n_key + 1e-15);
}

proptest! {
    #[test]
    fn usd_table_is_stochastic_and_symmetric(
        e in arb_eve(),
        mu in log_uniform(1e-3, 4.0),
    ) {
        let u = usd_statistics(&e, mu);
        for i in 0..3 {
            let col = u.column(i);
            let sum: f64 = col.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            for p in col {
                prop_assert!((0.0..=1.0).contains(&p));
            }
        }
        prop_assert_eq!(u.prob(0, 0), u.prob(1, 1));
        prop_assert_eq!(u.prob(0, 1), u.prob(1, 0));
        prop_assert_eq!(u.prob(0, 2), u.prob(1, 2));
        if e.scheme == Scheme::Usd1 {
            for i in 0..3 {
                prop_assert_eq!(u.prob(2, i), 0.0);
            }
        } else {
            prop_assert_eq!(u.prob(2, 0), u.prob(2, 1));
        }
    }

    #[test]
    fn conclusive_posteriors_normalise(
        e in arb_eve(),
        mu in log_uniform(1e-3, 4.0),
        f in 0.01..0.9f64,
    ) {
        let u = usd_statistics(&e, mu);
        let c = conclusive_stats(&u, f);
        prop_assert!((0.0..=1.0).contains(&c.p_conc));
        if c.p_conc > 0.0 {
            let o = c.outcome_given_conc.unwrap();
            prop_assert!((o.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let s = c.signal_given_conc.unwrap();
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&c.recursion_factor()));
        }
        if c.p_conc < 1.0 {
            let s = c.signal_given_inconc.unwrap();
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_matches_recursion(
        p in arb_protocol(),
        e in arb_eve(),
    ) {
        let u = usd_statistics(&e, p.mu);
        let c = conclusive_stats(&u, p.f);
        let closed = expected_metrics(&p, &e, &u);
        let rec = recursion_reference(&c, &p, &e, &u);
        prop_assert!(rel_diff(closed.aggregates.n_sig, rec.aggregates.n_sig) < 1e-10);
        prop_assert!(rel_diff(closed.aggregates.n_clk, rec.aggregates.n_clk) < 1e-10);
        prop_assert!(rel_diff(closed.aggregates.n_key, rec.aggregates.n_key) < 1e-10);
        prop_assert!(rel_diff(closed.aggregates.n_err, rec.aggregates.n_err) < 1e-10);
        for idx in 0..5 {
            prop_assert!(
                rel_diff(closed.aggregates.n_m1[idx], rec.aggregates.n_m1[idx]) < 1e-10,
                "m1[{}]: {} vs {}", idx, closed.aggregates.n_m1[idx], rec.aggregates.n_m1[idx]
            );
            prop_assert!(
                rel_diff(closed.aggregates.n_m2[idx], rec.aggregates.n_m2[idx]) < 1e-10,
                "m2[{}]: {} vs {}", idx, closed.aggregates.n_m2[idx], rec.aggregates.n_m2[idx]
            );
        }
    }

    #[test]
    fn metrics_stay_in_range(
        p in arb_protocol(),
        e in arb_eve(),
    ) {
        let u = usd_statistics(&e, p.mu);
        let report = expected_metrics(&p, &e, &u);
        assert_report_in_range(&report);
    }

    #[test]
    fn block_distribution_sums_to_block_average(
        pc in 0.0..1.0f64,
        m_max in 1usize..=30,
    ) {
        let d = block_distribution(pc, m_max);
        let sum: f64 = d.probs().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        let mean: f64 = d
            .probs()
            .iter()
            .enumerate()
            .map(|(k, p)| p * (k + 1) as f64)
            .sum();
        let n_sig = (1.0 - pc.powi(m_max as i32 + 1)) / (1.0 - pc);
        prop_assert!(rel_diff(mean, n_sig) < 1e-9);
    }

    #[test]
    fn processed_train_is_vacuum_framed(
        raw in proptest::collection::vec(0u8..3, 0..40),
    ) {
        let outcomes: Vec<ConclusiveOutcome> = raw
            .iter()
            .map(|&x| match x {
                0 => ConclusiveOutcome::Id0,
                1 => ConclusiveOutcome::Id1,
                _ => ConclusiveOutcome::Id2,
            })
            .collect();
        let train = process_block(&outcomes);
        prop_assert_eq!(train.len(), 2 * outcomes.len() + 2);
        prop_assert_eq!(*train.first().unwrap(), Pulse::Vac);
        prop_assert_eq!(*train.last().unwrap(), Pulse::Vac);
        // Between the first and last vacuum the pulses are exactly the
        // identified patterns.
        let flat: Vec<Pulse> = outcomes
            .iter()
            .flat_map(|o| match o {
                ConclusiveOutcome::Id0 => [Pulse::Strong, Pulse::Vac],
                ConclusiveOutcome::Id1 => [Pulse::Vac, Pulse::Strong],
                ConclusiveOutcome::Id2 => [Pulse::Strong, Pulse::Strong],
            })
            .collect();
        if let Some(first) = flat.iter().position(|&p| p == Pulse::Vac) {
            let last = flat.iter().rposition(|&p| p == Pulse::Vac).unwrap();
            for (i, &p) in flat.iter().enumerate() {
                let expect = if i < first || i > last { Pulse::Vac } else { p };
                prop_assert_eq!(train[i], expect);
            }
        } else {
            prop_assert!(train.iter().all(|&p| p == Pulse::Vac));
        }
    }

    #[test]
    fn mixed_constraint_quantities_are_monotone(
        p in arb_protocol(),
        e in arb_eve(),
        eta_ch in log_uniform(1e-4, 1.0),
    ) {
        let u = usd_statistics(&e, p.mu);
        let attacked = expected_metrics(&p, &e, &u);
        let baseline = NoAttackBaseline::new(&p, eta_ch);
        let grid: Vec<MetricsReport> = (0..=40)
            .map(|i| mixed_metrics(i as f64 / 40.0, &attacked, &baseline))
            .collect();
        let monotone = |xs: &[f64]| {
            let up = xs.windows(2).all(|w| w[1] >= w[0] - 1e-12);
            let down = xs.windows(2).all(|w| w[1] <= w[0] + 1e-12);
            up || down
        };
        let qbers: Vec<f64> = grid.iter().filter_map(|m| m.qber).collect();
        if qbers.len() == grid.len() {
            prop_assert!(monotone(&qbers), "qber not monotone: {:?}", qbers);
        }
        let vs: Vec<f64> = grid.iter().filter_map(|m| m.vis_ave).collect();
        if vs.len() == grid.len() {
            prop_assert!(monotone(&vs), "v_ave not monotone: {:?}", vs);
        }
    }
}

#[test]
fn inconclusive_probability_decreases_with_intensity_for_ideal_receiver() {
    let e = EveParams::ideal(Scheme::Usd1);
    let mut prev = 1.0;
    for i in 1..60 {
        let mu = i as f64 * 0.05;
        let u = usd_statistics(&e, mu);
        let p3 = u.prob(3, 0);
        assert!(p3 <= prev);
        assert!((p3 - (-mu).exp()).abs() < 1e-12);
        prev = p3;
    }
}

#[test]
fn zero_error_limit_has_no_error_terms() {
    let mut p = ProtocolParams::default();
    p.pd_data = 0.0;
    p.pd_m1 = 0.0;
    p.pd_m2 = 0.0;
    for mu in [0.05, 0.1, 0.5] {
        p.mu = mu;
        let e = EveParams::ideal(Scheme::Usd1);
        let u = usd_statistics(&e, mu);
        let r = expected_metrics(&p, &e, &u);
        assert_eq!(r.aggregates.n_err, 0.0);
        for s in Sequence::ALL {
            assert_eq!(r.aggregates.n_m2[s.index()], 0.0);
        }
    }
}
