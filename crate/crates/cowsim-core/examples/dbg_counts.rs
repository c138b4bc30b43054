// Predicted monitoring-click counts per sequence at the acceptance
// configurations (dev aid).
use cowsim_core::metrics::expected_metrics;
use cowsim_core::model::{EveParams, ProtocolParams, Scheme, Sequence};
use cowsim_core::usd::usd_statistics;

fn main() {
    let p = ProtocolParams::default();
    for scheme in [Scheme::Usd1, Scheme::Usd2] {
        let mut e = EveParams::new(scheme);
        e.set_mode_mismatch(0.002);
        let u = usd_statistics(&e, p.mu);
        let m = expected_metrics(&p, &e, &u);
        println!("{scheme:?}: n_sig={:.4} gain={:.5e} qber={:?}", m.aggregates.n_sig, m.gain, m.qber);
        let rounds = 1e7;
        for s in Sequence::ALL {
            let idx = s.index();
            println!(
                "  s={:3}: pred M1 {:>12.1} M2 {:>12.1}  V={:?}",
                s.label(),
                rounds * m.aggregates.n_m1[idx] / m.aggregates.n_sig,
                rounds * m.aggregates.n_m2[idx] / m.aggregates.n_sig,
                m.vis[idx],
            );
        }
        println!("  v_ave = {:?}", m.vis_ave);
    }
}
