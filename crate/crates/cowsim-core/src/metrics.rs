//! Expected per-block metrics of the attacked system: gain, QBER and the
//! five sequence visibilities, each computed two ways.
//!
//! The closed forms resolve the block bookkeeping into geometric sums in
//! the recursion factor `R`. [`recursion_reference`] evaluates the same
//! quantities by directly iterating the conditional recursions and serves
//! as an independent check of the closed forms. The closed forms contain
//! `(1 - R)` denominators, so when `R` is within [`R_SINGULARITY_TOL`] of 1
//! the engine transparently falls back to the recursion path.

use crate::model::{EveParams, ProtocolParams, Sequence};
use crate::usd::{ConclusiveStats, UsdStatistics};
use serde::Serialize;

/// Closed forms assume `R != 1`; inside this margin the recursion path is
/// used instead.
pub const R_SINGULARITY_TOL: f64 = 1e-12;

/// Distribution of conclusive-block lengths `k = 0..=m_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDistribution {
    probs: Vec<f64>,
}

impl BlockDistribution {
    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// `p_cb(k) = p_conc^k (1 - p_conc)` below the cap, with the remaining
/// mass `p_conc^m_max` on capped blocks.
pub fn block_distribution(p_conc: f64, m_max: usize) -> BlockDistribution {
    assert!(m_max >= 1, "m_max must be >= 1");
    let mut probs = vec![0.0; m_max + 1];
    let mut pow = 1.0;
    for slot in probs.iter_mut().take(m_max) {
        *slot = pow * (1.0 - p_conc);
        pow *= p_conc;
    }
    probs[m_max] = pow;
    BlockDistribution { probs }
}

/// Expected per-block counts underlying every metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockAggregates {
    /// Average number of signals per block.
    pub n_sig: f64,
    /// Average number of rounds with a data-line click per block.
    pub n_clk: f64,
    /// Average number of sifted key bits per block.
    pub n_key: f64,
    /// Average number of erroneous key bits per block.
    pub n_err: f64,
    /// Average monitoring clicks per block at each sequence, first detector.
    pub n_m1: [f64; 5],
    /// Same for the second detector.
    pub n_m2: [f64; 5],
}

/// Expected metrics of the attacked system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub gain: f64,
    /// `None` when no key bits are distilled at all.
    pub qber: Option<f64>,
    /// Per-sequence visibilities, `None` where no monitoring clicks occur.
    pub vis: [Option<f64>; 5],
    pub vis_ave: Option<f64>,
    pub aggregates: BlockAggregates,
}

impl MetricsReport {
    pub fn vis_of(&self, s: Sequence) -> Option<f64> {
        self.vis[s.index()]
    }

    pub fn from_aggregates(aggregates: BlockAggregates) -> Self {
        let ratio = |num: f64, den: f64| if den > 0.0 { Some(num / den) } else { None };
        let mut vis = [None; 5];
        let mut m1_sum = 0.0;
        let mut m2_sum = 0.0;
        for idx in 0..5 {
            let m1 = aggregates.n_m1[idx];
            let m2 = aggregates.n_m2[idx];
            vis[idx] = ratio(m1 - m2, m1 + m2);
            m1_sum += m1;
            m2_sum += m2;
        }
        MetricsReport {
            gain: aggregates.n_clk / aggregates.n_sig,
            qber: ratio(aggregates.n_err, aggregates.n_key),
            vis,
            vis_ave: ratio(m1_sum - m2_sum, m1_sum + m2_sum),
            aggregates,
        }
    }
}

/// Everything the per-block formulas consume, derived once per evaluation.
struct Ctx {
    m_max: usize,
    p_sig: [f64; 3],
    /// `tbl[j][i] = p(E_j | A_i)`.
    tbl: [[f64; 3]; 4],
    /// Conclusive probability per signal, summed in fixed order.
    conc: [f64; 3],
    pc: f64,
    /// `P(E_j | conclusive)`.
    pcj: [f64; 3],
    r: f64,
    /// `P(A_i | conclusive)`.
    ac: [f64; 3],
    /// `P(A_i | inconclusive)`.
    ai3: [f64; 3],
    /// `post[j][i] = P(A_i | E_j)` for conclusive outcomes j.
    post: [[f64; 3]; 3],
    pd_b: f64,
    d1: f64,
    d2: f64,
    /// Click probability of a resent vacuum signal, dark counts only.
    pclk_v: f64,
    /// Error probability of a key bit distilled from a resent vacuum signal.
    perr_v: f64,
}

impl Ctx {
    fn new(p: &ProtocolParams, e: &EveParams, u: &UsdStatistics) -> Self {
        let p_sig = p.signal_probs();
        let mut tbl = [[0.0; 3]; 4];
        for j in 0..4 {
            for i in 0..3 {
                tbl[j][i] = u.prob(j, i);
            }
        }
        let conc = [
            u.conclusive_given(0),
            u.conclusive_given(1),
            u.conclusive_given(2),
        ];
        let pc = (p_sig[0] * conc[0] + p_sig[1] * conc[1] + p_sig[2] * conc[2]).clamp(0.0, 1.0);
        let omp = 1.0 - pc;
        let mut pcj = [0.0; 3];
        let mut ac = [0.0; 3];
        let mut post = [[0.0; 3]; 3];
        if pc > 0.0 {
            for j in 0..3 {
                let joint: f64 = (0..3).map(|i| p_sig[i] * tbl[j][i]).sum();
                pcj[j] = joint / pc;
                if joint > 0.0 {
                    for i in 0..3 {
                        post[j][i] = p_sig[i] * tbl[j][i] / joint;
                    }
                }
            }
            for i in 0..3 {
                ac[i] = p_sig[i] * conc[i] / pc;
            }
        }
        let mut ai3 = [0.0; 3];
        if omp > 0.0 {
            for i in 0..3 {
                ai3[i] = p_sig[i] * tbl[3][i] / omp;
            }
        }
        Ctx {
            m_max: e.m_max,
            p_sig,
            tbl,
            conc,
            pc,
            pcj,
            r: pcj[2],
            ac,
            ai3,
            post,
            pd_b: p.pd_data,
            d1: p.pd_m1,
            d2: p.pd_m2,
            pclk_v: p.pd_data * (2.0 - p.pd_data),
            perr_v: p.pd_data * (2.0 - p.pd_data) / 2.0,
        }
    }

    fn n_sig(&self) -> f64 {
        if self.pc >= 1.0 {
            (self.m_max + 1) as f64
        } else if self.pc == 0.0 {
            1.0
        } else {
            (1.0 - self.pc.powi(self.m_max as i32 + 1)) / (1.0 - self.pc)
        }
    }

    fn use_recursion(&self) -> bool {
        (1.0 - self.r).abs() < R_SINGULARITY_TOL
    }

    /// Sums `p_cb(k) * (per_k(k) + boundary(k))` over the block lengths.
    /// `per_k` is called for every k in ascending order so stateful
    /// evaluators stay aligned; `boundary` is only evaluated for block
    /// lengths of nonzero probability, which keeps the posterior factors
    /// it contains well defined.
    fn assemble(
        &self,
        mut per_k: impl FnMut(usize) -> f64,
        boundary: impl Fn(usize) -> f64,
    ) -> f64 {
        let mut total = 0.0;
        let mut pow = 1.0;
        for k in 0..=self.m_max {
            let pcb = if k == self.m_max {
                pow
            } else {
                pow * (1.0 - self.pc)
            };
            let nk = per_k(k);
            if pcb > 0.0 {
                total += pcb * (nk + boundary(k));
            }
            pow *= self.pc;
        }
        total
    }

    // Boundary terms: the trailing vacuum signal of every block and, for
    // two-signal sequences, the interference slot shared with the next
    // block. Both see vacuum pulses, so only dark counts contribute.

    fn last_clk(&self, _k: usize) -> f64 {
        self.pclk_v
    }

    fn last_data(&self, k: usize, per_click: f64) -> f64 {
        if k == self.m_max {
            2.0 * self.p_sig[0] * per_click
        } else {
            self.p_sig[0] * per_click * (self.tbl[3][0] + self.tbl[3][1]) / (1.0 - self.pc)
        }
    }

    fn last_vis2(&self, k: usize, dark: f64) -> f64 {
        if k == self.m_max {
            self.p_sig[2] * dark
        } else {
            self.p_sig[2] * self.tbl[3][2] * dark / (1.0 - self.pc)
        }
    }

    fn boundary_pair(&self, k: usize, s1: usize, s2: usize, dark: f64) -> f64 {
        if k == self.m_max {
            (self.ac[s1] + self.p_sig[s1]) * self.p_sig[s2] * dark
        } else {
            let edge = self.ai3[s1] * self.p_sig[s2] * dark;
            if k == 0 {
                edge
            } else {
                self.ac[s1] * self.ai3[s2] * dark + edge
            }
        }
    }
}

/// Running geometric sums of the recursion factor, advanced once per
/// block length. All three accumulate nonnegative increments, which keeps
/// the closed forms accurate when their raw `(1 - R)`-denominator
/// expressions would cancel down to dark-count scale:
///
/// `g(k) = sum R^j over j < k`, `u(k) = g(k) - k R^k`, `s(k) = k - g(k)`.
struct RPow {
    r: f64,
    k: usize,
    /// `R^k` and `R^(k-1)` for the k about to be evaluated.
    rk: f64,
    rk1: f64,
    g: f64,
    g1: f64,
    /// `u(k-1)` and `u(k-2)`.
    u1: f64,
    u2: f64,
    s: f64,
    s1: f64,
}

impl RPow {
    fn new(r: f64) -> Self {
        RPow {
            r,
            k: 0,
            rk: 1.0,
            rk1: 0.0,
            g: 0.0,
            g1: 0.0,
            u1: 0.0,
            u2: 0.0,
            s: 0.0,
            s1: 0.0,
        }
    }

    fn advance(&mut self) {
        self.u2 = self.u1;
        // u(k) = u(k-1) + k R^(k-1) (1 - R)
        self.u1 += self.k as f64 * self.rk1 * (1.0 - self.r);
        self.g1 = self.g;
        self.s1 = self.s;
        self.g += self.rk;
        self.s += 1.0 - self.rk;
        self.rk1 = self.rk;
        self.rk *= self.r;
        self.k += 1;
    }
}

/// Closed-form per-block-length counts. Every method must be called for
/// k = 0, 1, 2, ... in order.
struct Closed<'a> {
    ctx: &'a Ctx,
    pow: RPow,
}

impl<'a> Closed<'a> {
    fn new(ctx: &'a Ctx) -> Self {
        Closed {
            ctx,
            pow: RPow::new(ctx.r),
        }
    }

    fn clk(&mut self, k: usize) -> f64 {
        let c = self.ctx;
        let (g, u1, s) = (self.pow.g, self.pow.u1, self.pow.s);
        self.pow.advance();
        if k == 0 {
            return 0.0;
        }
        // k + k R^k q^2 - (1+R)/(1-R) (1-R^k) q^2, regrouped so the
        // trimmed-boundary clicks enter at dark-count scale.
        s - c.r * u1 + c.pclk_v * (g + c.r * u1)
    }

    fn key(&mut self, k: usize) -> f64 {
        let c = self.ctx;
        let (g, u1, s) = (self.pow.g, self.pow.u1, self.pow.s);
        self.pow.advance();
        if k == 0 || c.pc == 0.0 {
            return 0.0;
        }
        let q2 = (1.0 - c.pd_b) * (1.0 - c.pd_b);
        let s3 = c.conc[0] + c.conc[1];
        let s2 = c.tbl[2][0] + c.tbl[2][1];
        c.p_sig[0] / c.pc * (s3 * (s + c.pclk_v * g) - q2 * s2 * u1)
    }

    fn err(&mut self, k: usize) -> f64 {
        let c = self.ctx;
        let (g, u1, s) = (self.pow.g, self.pow.u1, self.pow.s);
        self.pow.advance();
        if k == 0 || c.pc == 0.0 {
            return 0.0;
        }
        let kf = k as f64;
        let q = 1.0 - c.pd_b;
        let hit = c.tbl[0][0] + c.tbl[1][1];
        let swap = c.tbl[0][1] + c.tbl[1][0];
        let s2 = c.tbl[2][0] + c.tbl[2][1];
        c.p_sig[0] / (2.0 * c.pc)
            * (hit * c.pd_b * (kf + g * q)
                + swap * (2.0 - c.pd_b) * (s + g * c.pd_b)
                + s2 * ((s - u1) + c.pclk_v * (g + u1)))
    }

    fn vis2(&mut self, k: usize, first_detector: bool) -> f64 {
        let c = self.ctx;
        let (g, u1, s) = (self.pow.g, self.pow.u1, self.pow.s);
        self.pow.advance();
        if k == 0 || c.pc == 0.0 {
            return 0.0;
        }
        let e22 = c.tbl[2][2];
        let pref = c.p_sig[2] / c.pc;
        if first_detector {
            pref * (c.conc[2] * (s + g * c.d1) - e22 * (1.0 - c.d1) * u1)
        } else {
            let data = c.tbl[0][2] + c.tbl[1][2];
            pref * (data * (s + g * c.d2) + e22 * c.d2 * (g + u1))
        }
    }

    fn pair(&mut self, k: usize, s1: usize, s2: usize, first_detector: bool) -> f64 {
        let c = self.ctx;
        let (g1, u2, sp1) = (self.pow.g1, self.pow.u2, self.pow.s1);
        self.pow.advance();
        if k <= 1 || c.pc == 0.0 {
            return 0.0;
        }
        let km1 = (k - 1) as f64;
        let a = [c.tbl[0][s1], c.tbl[1][s1], c.tbl[2][s1]];
        let b = [c.tbl[0][s2], c.tbl[1][s2], c.tbl[2][s2]];
        let (ca, cb) = (c.conc[s1], c.conc[s2]);
        let pref = c.p_sig[s1] * c.p_sig[s2] / (c.pc * c.pc);
        if first_detector {
            pref * (km1 * (ca * cb - a[0] * b[1] * (1.0 - c.d1))
                - (1.0 - c.d1)
                    * (a[2] * b[2] * (g1 + u2)
                        + g1 * ((a[0] + a[1]) * b[2] + a[2] * (b[0] + b[1]))))
        } else {
            let dark = a[0] * b[1] + a[1] * b[0] + a[1] * b[2] + a[2] * b[0] + a[2] * b[2];
            pref * (km1 * (a[0] * b[0] + a[1] * b[1] + c.d2 * dark)
                + (a[0] * b[2] + a[2] * b[1]) * (sp1 + g1 * c.d2))
        }
    }
}

/// Direct iteration of the conditional block recursions.
///
/// The state tracks the expected count conditioned on the first outcome of
/// the conclusive-block being an identification of signal 0 or 1; blocks
/// whose first or last outcome identifies the decoy reduce to shorter
/// blocks, which is what the `gt`/`gi` addends capture.
struct BlockRecursion {
    pc: [f64; 3],
    /// Boundary brackets for (first, last) identification in {0,1}^2.
    v00: f64,
    v01: f64,
    v10: f64,
    v11: f64,
    /// Contribution of one fully interior round or round pair.
    w: f64,
    /// Addend when the last outcome identifies the decoy.
    gi: f64,
    /// Addend when the first outcome identifies the decoy.
    gt: f64,
    start_k: usize,
    start0: f64,
    start1: f64,
    cur0: f64,
    cur1: f64,
    prev_total: f64,
}

impl BlockRecursion {
    /// Must be called for k = 0, 1, 2, ... in order.
    fn eval(&mut self, k: usize) -> f64 {
        if k < self.start_k {
            return 0.0;
        }
        let total = if k == self.start_k {
            self.cur0 = self.start0;
            self.cur1 = self.start1;
            self.pc[0] * self.cur0 + self.pc[1] * self.cur1 + self.pc[2] * (self.prev_total + self.gt)
        } else {
            let mid = self.w * (k - self.start_k - 1) as f64;
            let new0 =
                self.pc[0] * (self.v00 + mid) + self.pc[1] * (self.v01 + mid) + self.pc[2] * (self.cur0 + self.gi);
            let new1 =
                self.pc[0] * (self.v10 + mid) + self.pc[1] * (self.v11 + mid) + self.pc[2] * (self.cur1 + self.gi);
            self.cur0 = new0;
            self.cur1 = new1;
            self.pc[0] * new0 + self.pc[1] * new1 + self.pc[2] * (self.prev_total + self.gt)
        };
        self.prev_total = total;
        total
    }
}

fn recursion_families(ctx: &Ctx) -> Recursions {
    let pc = ctx.pcj;
    let pv = ctx.pclk_v;
    let pe = ctx.perr_v;
    // P(Alice sent a data signal | E_j).
    let pdata = [
        ctx.post[0][0] + ctx.post[0][1],
        ctx.post[1][0] + ctx.post[1][1],
        ctx.post[2][0] + ctx.post[2][1],
    ];
    let ackey = ctx.ac[0] + ctx.ac[1];
    let half = ctx.pd_b / 2.0;
    // Error probability of the key bit when Bob receives the resent
    // signal j: a misidentified data signal flips the slot, a resent decoy
    // forces a double click and a random bit.
    let perr_bob = [
        ctx.post[0][0] * half + ctx.post[0][1] * (1.0 - half),
        ctx.post[1][0] * (1.0 - half) + ctx.post[1][1] * half,
        (ctx.post[2][0] + ctx.post[2][1]) / 2.0,
    ];
    // Error probability of an interior round, jointly over the resent
    // signal.
    let perr_c = pc[0] * perr_bob[0] + pc[1] * perr_bob[1] + pc[2] * perr_bob[2];

    let new = |v00, v01, v10, v11, w, gi, gt, start_k, start0, start1| BlockRecursion {
        pc,
        v00,
        v01,
        v10,
        v11,
        w,
        gi,
        gt,
        start_k,
        start0,
        start1,
        cur0: 0.0,
        cur1: 0.0,
        prev_total: 0.0,
    };

    let clk = new(1.0 + pv, 2.0 * pv, 2.0, 1.0 + pv, 1.0, pv, pv, 1, pv, pv);
    let key = new(
        pdata[0] * (1.0 + pv),
        (pdata[0] + pdata[1]) * pv,
        pdata[0] + pdata[1],
        pdata[1] * (1.0 + pv),
        ackey,
        pdata[2] * pv,
        pdata[2] * pv,
        1,
        pdata[0] * pv,
        pdata[1] * pv,
    );
    let err = new(
        pdata[0] * pe + perr_bob[0],
        (pdata[0] + pdata[1]) * pe,
        perr_bob[0] + perr_bob[1],
        perr_bob[1] + pdata[1] * pe,
        perr_c,
        pdata[2] * pe,
        pdata[2] * pe,
        1,
        pdata[0] * pe,
        pdata[1] * pe,
    );

    let b2 = [ctx.post[0][2], ctx.post[1][2], ctx.post[2][2]];
    let vis2 = |dark: f64, w: f64| {
        new(
            b2[0] * (1.0 + dark),
            (b2[0] + b2[1]) * dark,
            b2[0] + b2[1],
            b2[1] * (1.0 + dark),
            w,
            b2[2] * dark,
            b2[2] * dark,
            1,
            b2[0] * dark,
            b2[1] * dark,
        )
    };
    let m1_2 = vis2(ctx.d1, ctx.ac[2]);
    // Interior decoys resent as data signals fire the second detector;
    // correctly resent decoys interfere into the first one.
    let m2_2 = vis2(
        ctx.d2,
        ctx.p_sig[2] / ctx.pc * (ctx.tbl[0][2] + ctx.tbl[1][2]),
    );

    Recursions {
        clk,
        key,
        err,
        m1_2,
        m2_2,
    }
}

fn recursion_pair(ctx: &Ctx, s1: usize, s2: usize, first_detector: bool) -> BlockRecursion {
    let pc = ctx.pcj;
    let dark = if first_detector { ctx.d1 } else { ctx.d2 };
    let b1 = [ctx.post[0][s1], ctx.post[1][s1], ctx.post[2][s1]];
    let b2 = [ctx.post[0][s2], ctx.post[1][s2], ctx.post[2][s2]];
    let (ac1, ac2) = (ctx.ac[s1], ctx.ac[s2]);
    let a = [ctx.tbl[0][s1], ctx.tbl[1][s1], ctx.tbl[2][s1]];
    let b = [ctx.tbl[0][s2], ctx.tbl[1][s2], ctx.tbl[2][s2]];
    let (js1, js2) = (ctx.p_sig[s1] / ctx.pc, ctx.p_sig[s2] / ctx.pc);
    // Interference slot between the leading kept signal and the next
    // interior signal, or between the last interior signal and the trailing
    // kept signal; "bright" pairs click with certainty and the resend
    // patterns that leave the slot dark enter at dark-count scale.
    let (v00, v01, v10, v11, w, start0, start1);
    if first_detector {
        let lead0 = b1[0] * js2 * (b[0] + b[2] + b[1] * dark);
        let tail0 = ac1 * b2[0];
        let tail1 = b2[1] * js1 * (a[1] + a[2] + a[0] * dark);
        v00 = lead0 + tail0;
        v01 = lead0 + tail1;
        v10 = b1[1] * ac2 + tail0;
        v11 = b1[1] * ac2 + tail1;
        w = js1
            * js2
            * (a[0] * (b[0] + b[2] + b[1] * dark)
                + (a[1] + a[2]) * (b[0] + b[1] + b[2]));
        start0 = b1[0] * (pc[0] * b2[0] + pc[1] * b2[1] * dark + pc[2] * b2[2] * dark);
        start1 = b1[1] * (pc[0] * b2[0] + pc[1] * b2[1] + pc[2] * b2[2] * dark);
    } else {
        let lead0 = b1[0] * js2 * (b[0] + b[2] + b[1] * dark);
        let lead1 = b1[1] * js2 * (b[1] + (b[0] + b[2]) * dark);
        let tail0 = b2[0] * js1 * (a[0] + (a[1] + a[2]) * dark);
        let tail1 = b2[1] * js1 * (a[1] + a[2] + a[0] * dark);
        v00 = lead0 + tail0;
        v01 = lead0 + tail1;
        v10 = lead1 + tail0;
        v11 = lead1 + tail1;
        w = js1
            * js2
            * (a[0] * b[0]
                + a[0] * b[2]
                + a[1] * b[1]
                + a[2] * b[1]
                + dark * (a[0] * b[1] + a[1] * b[0] + a[1] * b[2] + a[2] * b[0] + a[2] * b[2]));
        start0 = b1[0] * (pc[0] * b2[0] + pc[1] * b2[1] * dark + pc[2] * b2[2] * dark);
        start1 = b1[1] * (pc[0] * b2[0] * dark + pc[1] * b2[1] + pc[2] * b2[2] * dark);
    }
    BlockRecursion {
        pc,
        v00,
        v01,
        v10,
        v11,
        w,
        gi: ac1 * b2[2] * dark,
        gt: b1[2] * ac2 * dark,
        start_k: 2,
        start0,
        start1,
        cur0: 0.0,
        cur1: 0.0,
        prev_total: 0.0,
    }
}

struct Recursions {
    clk: BlockRecursion,
    key: BlockRecursion,
    err: BlockRecursion,
    m1_2: BlockRecursion,
    m2_2: BlockRecursion,
}

fn aggregates_closed(ctx: &Ctx) -> BlockAggregates {
    let n_clk = ctx.assemble(
        {
            let mut c = Closed::new(ctx);
            move |k| c.clk(k)
        },
        |k| ctx.last_clk(k),
    );
    let n_key = ctx.assemble(
        {
            let mut c = Closed::new(ctx);
            move |k| c.key(k)
        },
        |k| ctx.last_data(k, ctx.pclk_v),
    );
    let n_err = ctx.assemble(
        {
            let mut c = Closed::new(ctx);
            move |k| c.err(k)
        },
        |k| ctx.last_data(k, ctx.perr_v),
    );
    let mut n_m1 = [0.0; 5];
    let mut n_m2 = [0.0; 5];
    for (first_detector, out) in [(true, &mut n_m1), (false, &mut n_m2)] {
        for s in Sequence::ALL {
            let dark = if first_detector { ctx.d1 } else { ctx.d2 };
            out[s.index()] = match s.signal_pair() {
                None => ctx.assemble(
                    {
                        let mut c = Closed::new(ctx);
                        move |k| c.vis2(k, first_detector)
                    },
                    |k| ctx.last_vis2(k, dark),
                ),
                Some((s1, s2)) => ctx.assemble(
                    {
                        let mut c = Closed::new(ctx);
                        move |k| c.pair(k, s1, s2, first_detector)
                    },
                    |k| ctx.boundary_pair(k, s1, s2, dark),
                ),
            };
        }
    }
    BlockAggregates {
        n_sig: ctx.n_sig(),
        n_clk,
        n_key,
        n_err,
        n_m1,
        n_m2,
    }
}

fn aggregates_recursion(ctx: &Ctx) -> BlockAggregates {
    let mut fams = recursion_families(ctx);
    let n_clk = ctx.assemble(|k| fams.clk.eval(k), |k| ctx.last_clk(k));
    let n_key = ctx.assemble(|k| fams.key.eval(k), |k| ctx.last_data(k, ctx.pclk_v));
    let n_err = ctx.assemble(|k| fams.err.eval(k), |k| ctx.last_data(k, ctx.perr_v));
    let mut n_m1 = [0.0; 5];
    let mut n_m2 = [0.0; 5];
    n_m1[0] = ctx.assemble(|k| fams.m1_2.eval(k), |k| ctx.last_vis2(k, ctx.d1));
    n_m2[0] = ctx.assemble(|k| fams.m2_2.eval(k), |k| ctx.last_vis2(k, ctx.d2));
    for s in Sequence::ALL {
        if let Some((s1, s2)) = s.signal_pair() {
            let mut rec = recursion_pair(ctx, s1, s2, true);
            n_m1[s.index()] =
                ctx.assemble(|k| rec.eval(k), |k| ctx.boundary_pair(k, s1, s2, ctx.d1));
            let mut rec = recursion_pair(ctx, s1, s2, false);
            n_m2[s.index()] =
                ctx.assemble(|k| rec.eval(k), |k| ctx.boundary_pair(k, s1, s2, ctx.d2));
        }
    }
    BlockAggregates {
        n_sig: ctx.n_sig(),
        n_clk,
        n_key,
        n_err,
        n_m1,
        n_m2,
    }
}

/// Expected gain together with the underlying per-block averages
/// `(gain, n_sig, n_clk)`.
pub fn expected_gain(c: &ConclusiveStats, p: &ProtocolParams, e: &EveParams) -> (f64, f64, f64) {
    // The gain only depends on the table through the conclusive statistics,
    // so a synthetic table reproducing them is enough for the engine.
    let u = table_from_stats(c, p.f);
    let ctx = Ctx::new(p, e, &u);
    let agg = if ctx.use_recursion() {
        aggregates_recursion(&ctx)
    } else {
        aggregates_closed(&ctx)
    };
    (agg.n_clk / agg.n_sig, agg.n_sig, agg.n_clk)
}

/// Reconstructs a minimal table consistent with the given conclusive
/// statistics. Only valid for consumers that never look at how conclusive
/// probability is split between correct and erroneous identifications.
fn table_from_stats(c: &ConclusiveStats, f: f64) -> UsdStatistics {
    let p_sig = [(1.0 - f) / 2.0, (1.0 - f) / 2.0, f];
    let mut rows = [[0.0; 3]; 3];
    if let (Some(outcome), Some(signal)) = (c.outcome_given_conc, c.signal_given_conc) {
        for j in 0..3 {
            for i in 0..3 {
                if p_sig[i] > 0.0 {
                    // Any split with the right row and column sums works;
                    // independence is the simplest.
                    rows[j][i] = c.p_conc * outcome[j] * signal[i] / p_sig[i];
                }
            }
        }
    }
    UsdStatistics::from_conclusive_rows(rows)
}

/// Expected QBER together with `(n_key, n_err)`; the QBER is undefined
/// when no key bits are distilled.
pub fn expected_qber(
    _c: &ConclusiveStats,
    p: &ProtocolParams,
    e: &EveParams,
    u: &UsdStatistics,
) -> (Option<f64>, f64, f64) {
    let ctx = Ctx::new(p, e, u);
    let agg = if ctx.use_recursion() {
        aggregates_recursion(&ctx)
    } else {
        aggregates_closed(&ctx)
    };
    let qber = if agg.n_key > 0.0 {
        Some(agg.n_err / agg.n_key)
    } else {
        None
    };
    (qber, agg.n_key, agg.n_err)
}

/// Expected per-sequence visibilities, the average visibility, and the
/// underlying monitoring-click averages.
#[allow(clippy::type_complexity)]
pub fn expected_visibilities(
    _c: &ConclusiveStats,
    p: &ProtocolParams,
    e: &EveParams,
    u: &UsdStatistics,
) -> ([Option<f64>; 5], Option<f64>, [f64; 5], [f64; 5]) {
    let ctx = Ctx::new(p, e, u);
    let agg = if ctx.use_recursion() {
        aggregates_recursion(&ctx)
    } else {
        aggregates_closed(&ctx)
    };
    let report = MetricsReport::from_aggregates(agg);
    (report.vis, report.vis_ave, agg.n_m1, agg.n_m2)
}

/// Full closed-form report (with the automatic recursion fallback at the
/// `R` singularity).
pub fn expected_metrics(p: &ProtocolParams, e: &EveParams, u: &UsdStatistics) -> MetricsReport {
    let ctx = Ctx::new(p, e, u);
    let agg = if ctx.use_recursion() {
        aggregates_recursion(&ctx)
    } else {
        aggregates_closed(&ctx)
    };
    MetricsReport::from_aggregates(agg)
}

/// Reference report computed by direct iteration of the conditional
/// recursions, independent of the closed forms.
pub fn recursion_reference(
    _c: &ConclusiveStats,
    p: &ProtocolParams,
    e: &EveParams,
    u: &UsdStatistics,
) -> MetricsReport {
    let ctx = Ctx::new(p, e, u);
    MetricsReport::from_aggregates(aggregates_recursion(&ctx))
}

/// Convenience wrapper: statistics, conclusive stats and report in one call.
pub fn attacked_metrics(p: &ProtocolParams, e: &EveParams) -> MetricsReport {
    let u = crate::usd::usd_statistics(e, p.mu);
    expected_metrics(p, e, &u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Scheme;
    use crate::usd::{conclusive_stats, usd_statistics};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn block_distribution_examples() {
        let d = block_distribution(0.0, 5);
        assert_eq!(d.prob(0), 1.0);
        assert_eq!(d.prob(3), 0.0);

        let d = block_distribution(0.5, 2);
        assert_eq!(d.probs(), &[0.5, 0.25, 0.25]);

        let d = block_distribution(1.0, 4);
        assert_eq!(d.prob(4), 1.0);
        assert_eq!(d.prob(0), 0.0);

        for &pc in &[0.0, 0.3, 0.99, 1.0] {
            let d = block_distribution(pc, 10);
            let sum: f64 = d.probs().iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gain_zero_without_light_or_darks() {
        let mut p = ProtocolParams::default();
        p.pd_data = 0.0;
        p.mu = 0.0;
        let e = EveParams::ideal(Scheme::Usd1);
        let u = usd_statistics(&e, p.mu);
        let c = conclusive_stats(&u, p.f);
        let (gain, n_sig, _) = expected_gain(&c, &p, &e);
        assert_eq!(gain, 0.0);
        assert_eq!(n_sig, 1.0);
    }

    #[test]
    fn ideal_usd1_is_error_free() {
        let mut p = ProtocolParams::default();
        p.pd_data = 0.0;
        p.pd_m1 = 0.0;
        p.pd_m2 = 0.0;
        let e = EveParams::ideal(Scheme::Usd1);
        let u = usd_statistics(&e, p.mu);
        let report = expected_metrics(&p, &e, &u);
        assert_eq!(report.qber, Some(0.0));
        assert_eq!(report.vis_of(Sequence::S01), Some(1.0));
        assert_eq!(report.vis_ave, Some(1.0));
        for s in Sequence::ALL {
            assert_eq!(report.aggregates.n_m2[s.index()], 0.0);
        }
    }

    #[test]
    fn vacuum_only_key_bits_are_random() {
        let mut p = ProtocolParams::default();
        p.mu = 0.0;
        p.pd_data = 1e-3;
        let e = EveParams::ideal(Scheme::Usd1);
        let u = usd_statistics(&e, 0.0);
        let c = conclusive_stats(&u, p.f);
        assert_eq!(c.p_conc, 0.0);
        let (qber, _, _) = expected_qber(&c, &p, &e, &u);
        assert!((qber.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn usd1_decoy_visibility_vanishes() {
        let p = ProtocolParams::default();
        let e = EveParams::new(Scheme::Usd1);
        let u = usd_statistics(&e, p.mu);
        let report = expected_metrics(&p, &e, &u);
        assert!(report.vis_of(Sequence::S2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn recursion_matches_closed_form_at_defaults() {
        for scheme in [Scheme::Usd1, Scheme::Usd2] {
            let p = ProtocolParams::default();
            let e = EveParams::new(scheme);
            let u = usd_statistics(&e, p.mu);
            let c = conclusive_stats(&u, p.f);
            let closed = expected_metrics(&p, &e, &u);
            let rec = recursion_reference(&c, &p, &e, &u);
            assert!(close(closed.aggregates.n_clk, rec.aggregates.n_clk, 1e-12));
            assert!(close(closed.aggregates.n_key, rec.aggregates.n_key, 1e-12));
            assert!(close(closed.aggregates.n_err, rec.aggregates.n_err, 1e-12));
            for idx in 0..5 {
                assert!(
                    close(closed.aggregates.n_m1[idx], rec.aggregates.n_m1[idx], 1e-11),
                    "{scheme:?} m1[{idx}]: {} vs {}",
                    closed.aggregates.n_m1[idx],
                    rec.aggregates.n_m1[idx]
                );
                assert!(
                    close(closed.aggregates.n_m2[idx], rec.aggregates.n_m2[idx], 1e-11),
                    "{scheme:?} m2[{idx}]: {} vs {}",
                    closed.aggregates.n_m2[idx],
                    rec.aggregates.n_m2[idx]
                );
            }
        }
    }

    #[test]
    fn symmetric_sequences_have_equal_visibility() {
        for scheme in [Scheme::Usd1, Scheme::Usd2] {
            let p = ProtocolParams::default();
            let e = EveParams::new(scheme);
            let u = usd_statistics(&e, p.mu);
            let report = expected_metrics(&p, &e, &u);
            let v02 = report.vis_of(Sequence::S02).unwrap();
            let v21 = report.vis_of(Sequence::S21).unwrap();
            assert!((v02 - v21).abs() < 1e-12, "{scheme:?}: {v02} vs {v21}");
        }
    }
}
