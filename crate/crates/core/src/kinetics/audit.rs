//! Sampled numerical certification of the model assumptions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{raw_delta, CollisionModel, ModelSpec};
use crate::space::StateVec;

/// A check passes when its worst relative margin is at least `-AUDIT_SLACK`.
pub const AUDIT_SLACK: f64 = 1e-12;

pub const CHECK_NAMES: [&str; 13] = [
    "A0",
    "A1.envelope",
    "A1.isotone",
    "A2.nonneg",
    "A2.isotone",
    "A3.lambda1",
    "A3.povzner",
    "aQ.k1",
    "aQ.k2",
    "a54",
    "deltamarg",
    "gain.isotone",
    "loss.isotone",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub sample: usize,
    pub seed: u64,
    /// Flattened state, size-major within each cell.
    pub g: Vec<f64>,
    /// Larger member of an ordered pair, for isotonicity checks.
    pub h: Option<Vec<f64>>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub worst_margin: f64,
    pub evaluations: usize,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub samples: usize,
    pub seed: u64,
    pub sizes: usize,
    pub cells: usize,
    pub checks: Vec<CheckResult>,
}

impl AuditReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

struct Tally {
    name: &'static str,
    worst: f64,
    evaluations: usize,
    witness: Option<Witness>,
}

impl Tally {
    fn record(&mut self, margin: f64, witness: impl FnOnce() -> Witness) {
        self.evaluations += 1;
        let margin = if margin.is_nan() {
            f64::NEG_INFINITY
        } else {
            margin
        };
        if margin < self.worst {
            self.worst = margin;
            if margin < -AUDIT_SLACK {
                self.witness = Some(witness());
            }
        }
    }

    fn finish(self) -> CheckResult {
        let worst = if self.evaluations == 0 {
            0.0
        } else {
            self.worst
        };
        CheckResult {
            name: self.name.to_string(),
            passed: worst >= -AUDIT_SLACK,
            worst_margin: worst,
            evaluations: self.evaluations,
            witness: self.witness,
        }
    }
}

/// `min_k (upper_k - lower_k) / scale`, with scale the largest magnitude involved.
fn componentwise_margin(lower: &[f64], upper: &[f64]) -> (f64, usize) {
    let scale = lower
        .iter()
        .chain(upper)
        .fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return (0.0, 0);
    }
    let mut worst = (f64::INFINITY, 0);
    for (k, (l, u)) in lower.iter().zip(upper).enumerate() {
        let m = (u - l) / scale;
        if m < worst.0 {
            worst = (m, k);
        }
    }
    worst
}

fn scalar_margin(lower: f64, upper: f64) -> f64 {
    let scale = lower.abs().max(upper.abs());
    if scale == 0.0 {
        0.0
    } else {
        (upper - lower) / scale
    }
}

fn weighted(w: &[f64], p: i32, g: &StateVec) -> Vec<f64> {
    let k = w.len();
    g.as_slice()
        .iter()
        .enumerate()
        .map(|(idx, v)| w[idx % k].powi(p) * v)
        .collect()
}

fn wnorm(w: &[f64], p: i32, g: &StateVec) -> f64 {
    weighted(w, p, g).iter().sum()
}

fn draw_state(rng: &mut ChaCha8Rng, len: usize, stratum: usize) -> Vec<f64> {
    let (scale, sparse) = match stratum % 4 {
        0 => (0.1, false),
        1 => (1.0, false),
        2 => (10.0, false),
        _ => (1.0, true),
    };
    let mut v: Vec<f64> = (0..len)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            if sparse && rng.gen::<f64>() < 0.9 {
                0.0
            } else {
                z.abs() * scale
            }
        })
        .collect();
    if v.iter().all(|x| *x == 0.0) {
        let i = rng.gen_range(0..len);
        v[i] = scale;
    }
    v
}

fn draw_perturbation(rng: &mut ChaCha8Rng, base: &[f64]) -> Vec<f64> {
    let scale = base.iter().fold(0.0f64, |m, v| m.max(*v)).max(1e-3);
    let frac: f64 = [1e-3, 0.1, 1.0][rng.gen_range(0..3)];
    base.iter()
        .map(|v| {
            if rng.gen::<f64>() < 0.5 {
                let z: f64 = rng.sample(StandardNormal);
                v + z.abs() * scale * frac
            } else {
                *v
            }
        })
        .collect()
}

/// Draws `samples` cone states and ordered pairs from a seeded generator and
/// evaluates every assumption on them. Failures are reported, never raised.
pub fn audit_assumptions(model: &ModelSpec, samples: usize, seed: u64) -> AuditReport {
    let k = model.sizes();
    let cells = model.kernel().modulation().map_or(1, |m| m.len());
    let lam = model.lambda().weights().to_vec();
    let lam1 = model.lambda1().weights().to_vec();
    let lambda0 = model.lambda().lambda0();
    let a_env = model.a_env();
    let rho_env = model.rho_env();
    let mut tallies: Vec<Tally> = CHECK_NAMES
        .iter()
        .map(|name| Tally {
            name,
            worst: f64::INFINITY,
            evaluations: 0,
            witness: None,
        })
        .collect();
    let idx = |name: &str| CHECK_NAMES.iter().position(|n| *n == name).unwrap();

    // A0 is a property of Λ alone.
    {
        let (min_k, min_w) =
            lam.iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (i, w)| if w < acc.1 { (i, w) } else { acc },
                );
        let margin = if lambda0 > 0.0 {
            (min_w - lambda0) / lambda0.max(min_w.abs())
        } else {
            -1.0
        };
        tallies[idx("A0")].record(margin, || Witness {
            sample: 0,
            seed,
            g: (0..k).map(|i| if i == min_k { 1.0 } else { 0.0 }).collect(),
            h: None,
            detail: format!("lambda0 = {lambda0}, weight[{min_k}] = {min_w}"),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = samples.max(1);
    for s in 0..samples {
        let gv = draw_state(&mut rng, k * cells, s);
        let hv = draw_perturbation(&mut rng, &gv);
        let g = StateVec::new(k, cells, gv).expect("sampler draws cone states");
        let h = StateVec::new(k, cells, hv).expect("sampler draws cone states");
        let (gain_g, loss_g) = model.gain_loss_at(0, &g).expect("shapes match the model");
        let (gain_h, loss_h) = model.gain_loss_at(0, &h).expect("shapes match the model");
        let single = |detail: String| {
            let g = g.as_slice().to_vec();
            move || Witness {
                sample: s,
                seed,
                g,
                h: None,
                detail,
            }
        };
        let pair = |detail: String| {
            let (g, h) = (g.as_slice().to_vec(), h.as_slice().to_vec());
            move || Witness {
                sample: s,
                seed,
                g,
                h: Some(h),
                detail,
            }
        };

        let lam_g = wnorm(&lam, 1, &g);
        let lam_h = wnorm(&lam, 1, &h);
        let ag = a_env.eval(lam_g);
        let ah = a_env.eval(lam_h);

        // A1 envelope and remark aQ for k = 1, 2
        let env1: Vec<f64> = weighted(&lam, 1, &g).iter().map(|v| ag * v).collect();
        let (m, at) = componentwise_margin(loss_g.as_slice(), &env1);
        tallies[idx("A1.envelope")]
            .record(m, single(format!("loss exceeds a(|Lg|)Lg at entry {at}")));
        tallies[idx("aQ.k1")].record(m, single(format!("entry {at}")));
        let lq = weighted(&lam, 1, &loss_g);
        let env2: Vec<f64> = weighted(&lam, 2, &g).iter().map(|v| ag * v).collect();
        let (m, at) = componentwise_margin(&lq, &env2);
        tallies[idx("aQ.k2")].record(m, single(format!("entry {at}")));

        // A1 isotone remainder
        let rem = |a: f64, st: &StateVec, loss: &StateVec| -> Vec<f64> {
            weighted(&lam, 1, st)
                .iter()
                .zip(loss.as_slice())
                .map(|(lg, q)| a * lg - q)
                .collect()
        };
        let (m, at) = componentwise_margin(&rem(ag, &g, &loss_g), &rem(ah, &h, &loss_h));
        tallies[idx("A1.isotone")].record(m, pair(format!("remainder decreases at entry {at}")));

        // A2
        let (dg, lqm_g) = raw_delta(model.lambda(), &gain_g, &loss_g);
        let (dh, lqm_h) = raw_delta(model.lambda(), &gain_h, &loss_h);
        let scale = lqm_g.max(lqm_h);
        let nonneg = if lqm_g == 0.0 { 0.0 } else { dg / lqm_g };
        tallies[idx("A2.nonneg")].record(nonneg, single(format!("delta = {dg:e}")));
        let iso = if scale == 0.0 { 0.0 } else { (dh - dg) / scale };
        tallies[idx("A2.isotone")]
            .record(iso, pair(format!("delta(g) = {dg:e} > delta(h) = {dh:e}")));

        // A3
        let l1m = wnorm(&lam1, 1, &loss_g);
        let l1p = wnorm(&lam1, 1, &gain_g);
        tallies[idx("A3.lambda1")].record(
            scalar_margin(l1p, l1m),
            single(format!("|L1 Q-| = {l1m:e} < |L1 Q+| = {l1p:e}")),
        );
        let l2p = wnorm(&lam, 2, &gain_g);
        let l2m = wnorm(&lam, 2, &loss_g);
        let l2g = wnorm(&lam, 2, &g);
        let bound = l2m + rho_env.eval(wnorm(&lam1, 1, &g)) * l2g;
        tallies[idx("A3.povzner")].record(
            scalar_margin(l2p, bound),
            single(format!("|L2 Q+| = {l2p:e} exceeds bound {bound:e}")),
        );

        // deltamarg: Δ ≤ ‖ΛQ⁻‖ ≤ a(‖Λg‖)‖Λ²g‖
        let top = ag * l2g;
        let m = scalar_margin(dg, lqm_g).min(scalar_margin(lqm_g, top));
        tallies[idx("deltamarg")]
            .record(m, single(format!("chain {dg:e} <= {lqm_g:e} <= {top:e}")));

        // a54 chain
        let lqp = wnorm(&lam, 1, &gain_g);
        let n_plus: f64 = gain_g.as_slice().iter().sum();
        let n_minus: f64 = loss_g.as_slice().iter().sum();
        let m = [
            scalar_margin(n_plus, lqp / lambda0),
            scalar_margin(n_minus, lqm_g / lambda0),
            scalar_margin(lqp, lqm_g),
            scalar_margin(lqm_g, top),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        tallies[idx("a54")].record(m, single("norm chain broken".into()));

        let (m, at) = componentwise_margin(gain_g.as_slice(), gain_h.as_slice());
        tallies[idx("gain.isotone")].record(m, pair(format!("entry {at}")));
        let (m, at) = componentwise_margin(loss_g.as_slice(), loss_h.as_slice());
        tallies[idx("loss.isotone")].record(m, pair(format!("entry {at}")));
    }

    AuditReport {
        samples,
        seed,
        sizes: k,
        cells,
        checks: tallies.into_iter().map(Tally::finish).collect(),
    }
}
