// Scratch comparison of the two evaluation paths across harsh parameter
// corners (dev aid).
use cowsim_core::metrics::{expected_metrics, recursion_reference};
use cowsim_core::model::{EveParams, ProtocolParams, Scheme};
use cowsim_core::usd::{conclusive_stats, usd_statistics};

fn main() {
    let mut worst: f64 = 0.0;
    for scheme in [Scheme::Usd1, Scheme::Usd2] {
        for pd in [1e-9, 1e-7, 0.05, 0.3] {
            for dm in [1e-9, 1e-7, 0.08, 0.4] {
                for mu in [0.01, 0.1, 1.0, 4.0] {
                    for eps in [0.0, 0.002, 0.2] {
                        for m_max in [1usize, 2, 3, 7, 20] {
                            let mut p = ProtocolParams::default();
                            p.pd_data = pd;
                            p.pd_m1 = dm;
                            p.pd_m2 = dm * 0.7;
                            p.mu = mu;
                            let mut e = EveParams::new(scheme);
                            e.m_max = m_max;
                            e.set_mode_mismatch(eps);
                            let u = usd_statistics(&e, p.mu);
                            let c = conclusive_stats(&u, p.f);
                            let closed = expected_metrics(&p, &e, &u);
                            let rec = recursion_reference(&c, &p, &e, &u);
                            let mut rels: Vec<(String, f64)> = Vec::new();
                            let rel = |a: f64, b: f64| {
                                (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
                            };
                            rels.push(("clk".into(), rel(closed.aggregates.n_clk, rec.aggregates.n_clk)));
                            rels.push(("key".into(), rel(closed.aggregates.n_key, rec.aggregates.n_key)));
                            rels.push(("err".into(), rel(closed.aggregates.n_err, rec.aggregates.n_err)));
                            for i in 0..5 {
                                rels.push((format!("m1[{i}]"), rel(closed.aggregates.n_m1[i], rec.aggregates.n_m1[i])));
                                rels.push((format!("m2[{i}]"), rel(closed.aggregates.n_m2[i], rec.aggregates.n_m2[i])));
                            }
                            for (name, r) in rels {
                                if r > worst {
                                    worst = r;
                                }
                                if r > 5e-11 {
                                    println!(
                                        "{scheme:?} pd={pd:.0e} dm={dm:.0e} mu={mu} eps={eps} M={m_max}: {name} rel={r:.3e}"
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    println!("worst rel = {worst:.3e}");
}
