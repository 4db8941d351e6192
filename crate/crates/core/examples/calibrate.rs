//! Diagnostic: dual-arm effect sizes on the default fixture, one line per
//! replicate. Useful when tuning simulator defaults.
//!
//! Run with `cargo run --release -p praxis-core --example calibrate`.

use praxis_core::embed::HashEmbedder;
use praxis_core::eval::{run_grid, ArmSpec, GridConfig};
use praxis_core::hashing::mix64;
use praxis_core::sim::{generate_site, PolicyParams, SiteParams};

fn main() {
    let params = SiteParams::default(); // 100 nodes, branching 4, 20 tasks
    let (site, tasks) = generate_site(42, &params).unwrap();
    let policy = PolicyParams::default();
    let embedder = HashEmbedder::<f64>::default();

    println!(
        "site: {} nodes ({} penalty), {} tasks, optimal lengths {:?}",
        site.node_count(),
        site.penalty_nodes.len(),
        tasks.len(),
        tasks.iter().map(|t| t.optimal_steps).collect::<Vec<_>>()
    );

    // Outcome anatomy for one replicate: how often each arm succeeds, dies
    // on a penalty page, or times out, and what each outcome costs in steps.
    {
        let seed = mix64(42);
        for (name, arm) in [
            ("base", ArmSpec::Baseline { params: policy }),
            (
                "memory",
                ArmSpec::Memory {
                    params: policy,
                    k: 8,
                    tau: 0.3,
                },
            ),
        ] {
            let cfg = GridConfig {
                reps: 5,
                base_seed: seed,
                arm,
            };
            let m = run_grid(&site, &tasks, &cfg, &embedder).unwrap().matrix;
            let (mut n_succ, mut n_to, mut n_death) = (0usize, 0usize, 0usize);
            let (mut s_succ, mut s_to, mut s_death) = (0usize, 0usize, 0usize);
            for (ti, task) in tasks.iter().enumerate() {
                for r in 0..5 {
                    let st = m.steps(ti, r);
                    if m.success(ti, r) {
                        n_succ += 1;
                        s_succ += st;
                    } else if st >= task.max_steps {
                        n_to += 1;
                        s_to += st;
                    } else {
                        n_death += 1;
                        s_death += st;
                    }
                }
            }
            let avg = |s: usize, n: usize| if n == 0 { 0.0 } else { s as f64 / n as f64 };
            println!(
                "{name}: succ {n_succ} (len {:.1}), timeout {n_to} (len {:.1}), death {n_death} (len {:.1})",
                avg(s_succ, n_succ),
                avg(s_to, n_to),
                avg(s_death, n_death)
            );
        }
    }

    let mut acc_wins = 0;
    let mut rel_wins = 0;
    let mut step_wins = 0;
    for replicate in 0..10u64 {
        let seed = mix64(42 ^ replicate);
        let base_cfg = GridConfig {
            reps: 5,
            base_seed: seed,
            arm: ArmSpec::Baseline { params: policy },
        };
        let mem_cfg = GridConfig {
            reps: 5,
            base_seed: seed,
            arm: ArmSpec::Memory {
                params: policy,
                k: 8,
                tau: 0.3,
            },
        };
        let base = run_grid(&site, &tasks, &base_cfg, &embedder).unwrap().matrix;
        let mem = run_grid(&site, &tasks, &mem_cfg, &embedder).unwrap().matrix;

        let (ba, ma) = (base.accuracy().unwrap(), mem.accuracy().unwrap());
        let br = base.reliability().unwrap();
        let mr = mem.reliability().unwrap();
        let bs = base.avg_steps().unwrap();
        let ms = mem.avg_steps().unwrap();
        let acc_gain = ma - ba;
        let rel_gain = match (br, mr) {
            (Some(b), Some(m)) => m - b,
            _ => f64::NAN,
        };
        let step_cut = match (bs, ms) {
            (Some(b), Some(m)) => (b - m) / b,
            _ => f64::NAN,
        };
        if acc_gain >= 0.10 {
            acc_wins += 1;
        }
        if rel_gain > 0.0 {
            rel_wins += 1;
        }
        if step_cut >= 0.10 {
            step_wins += 1;
        }
        println!(
            "replicate {replicate}: acc {ba:.3} -> {ma:.3} (gain {acc_gain:+.3}), \
             rel {br:?} -> {mr:?} (gain {rel_gain:+.3}), \
             steps {bs:?} -> {ms:?} (cut {step_cut:+.3})"
        );
    }
    println!("wins: accuracy {acc_wins}/10, reliability {rel_wins}/10, steps {step_wins}/10");
}
