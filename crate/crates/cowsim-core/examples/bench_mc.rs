use cowsim_core::mc::simulate_attacked;
use cowsim_core::model::{EveParams, ProtocolParams, Scheme};
use cowsim_core::usd::usd_statistics;
use std::time::Instant;

fn main() {
    let p = ProtocolParams::default();
    for scheme in [Scheme::Usd1, Scheme::Usd2] {
        let e = EveParams::new(scheme);
        let u = usd_statistics(&e, p.mu);
        let t0 = Instant::now();
        let r = simulate_attacked(&p, &u, &e, 10_000_000, 1);
        println!(
            "{scheme:?}: {:?} rounds={} gain={:.6}±{:.6}",
            t0.elapsed(),
            r.rounds,
            r.gain.value,
            r.gain.std_err
        );
    }
}
