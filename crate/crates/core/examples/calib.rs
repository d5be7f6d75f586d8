//! Temporary calibration harness (not part of the deliverable).

use gso::baselines::{mean_field_gd, simulated_annealing, SaConfig, SkSaProblem};
use gso::engine::{gso_solve, OptimConfig};
use gso::graph::SkInstance;
use gso::objectives::SkProblem;
use gso::relaxation::AnnealSchedule;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("gso");
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(256);
    let instances: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(5);

    match mode {
        "gso" => {
            let steps: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1000);
            let lr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.01);
            let rate: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.99);
            let batch: usize = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(128);
            let tau0: f64 = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(1.0);
            let tau_min: f64 = args.get(9).and_then(|s| s.parse().ok()).unwrap_or(0.1);
            let init_stddev: f64 = args.get(10).and_then(|s| s.parse().ok()).unwrap_or(0.01);
            let beta1: f64 = args.get(11).and_then(|s| s.parse().ok()).unwrap_or(0.9);
            let beta2: f64 = args.get(12).and_then(|s| s.parse().ok()).unwrap_or(0.999);
            let patience: usize = args.get(13).and_then(|s| s.parse().ok()).unwrap_or(500);
            let t0 = std::time::Instant::now();
            let mut sum = 0.0;
            for i in 0..instances {
                let inst = SkInstance::generate(n, 1000 + i as u64).unwrap();
                let problem = SkProblem::new(inst);
                let cfg = OptimConfig {
                    batch_size: batch,
                    steps,
                    learning_rate: lr,
                    schedule: AnnealSchedule::new(tau0, rate, tau_min).unwrap(),
                    seed: i as u64,
                    init_stddev,
                    beta1,
                    beta2,
                    patience,
                    ..OptimConfig::default()
                };
                let res = gso_solve(&problem, &cfg).unwrap();
                println!(
                    "  instance {i}: E/N = {:.5}  steps_run={} wall={:.2}s",
                    res.best_value,
                    res.history.len(),
                    res.wall_time
                );
                sum += res.best_value;
            }
            println!(
                "GSO n={n} steps={steps} lr={lr} rate={rate} batch={batch}: mean E/N = {:.5}, total {:.1}s",
                sum / instances as f64,
                t0.elapsed().as_secs_f64()
            );
        }
        "sa" => {
            let sweeps_mult: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(10);
            let t_start: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(2.0);
            let t0 = std::time::Instant::now();
            let mut sum = 0.0;
            for i in 0..instances {
                let inst = SkInstance::generate(n, 1000 + i as u64).unwrap();
                let problem = SkSaProblem::new(&inst);
                let cfg = SaConfig::with_schedule(sweeps_mult * n, t_start, 0.01, i as u64);
                let res = simulated_annealing(&problem, &cfg);
                println!("  instance {i}: E/N = {:.5} wall={:.2}s", res.best_value, res.wall_time);
                sum += res.best_value;
            }
            println!(
                "SA n={n} sweeps={}n t_start={t_start}: mean E/N = {:.5}, total {:.1}s",
                sweeps_mult,
                sum / instances as f64,
                t0.elapsed().as_secs_f64()
            );
        }
        "gd" => {
            let steps: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(2000);
            let lr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.01);
            let batch: usize = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(1);
            let t0 = std::time::Instant::now();
            let mut sum = 0.0;
            for i in 0..instances {
                let inst = SkInstance::generate(n, 1000 + i as u64).unwrap();
                let cfg = OptimConfig {
                    batch_size: batch,
                    steps,
                    learning_rate: lr,
                    seed: i as u64,
                    ..OptimConfig::default()
                };
                let res = mean_field_gd(&inst, &cfg).unwrap();
                println!("  instance {i}: E/N = {:.5} wall={:.2}s", res.best_value, res.wall_time);
                sum += res.best_value;
            }
            println!(
                "GD n={n} steps={steps} lr={lr} batch={batch}: mean E/N = {:.5}, total {:.1}s",
                sum / instances as f64,
                t0.elapsed().as_secs_f64()
            );
        }
        "bestever" => {
            // prototype: track the best hardened sample across the whole
            // trajectory instead of only the final one
            use gso::engine::{chain_through_softmax_inplace, AdamState, Problem};
            use gso::relaxation::{fill_gumbel, gumbel_softmax_into, harden};
            use gso::rng::{replica_stream_seed, rng_from_seed};
            use ndarray::{Array2, Ix2};
            use rand::Rng;
            use rand_distr::StandardNormal;

            let steps: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(2000);
            let lr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.01);
            let rate: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.999);
            let batch: usize = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(1);
            let tau0: f64 = args.get(8).and_then(|s| s.parse().ok()).unwrap_or(1.0);
            let tau_min: f64 = args.get(9).and_then(|s| s.parse().ok()).unwrap_or(0.1);
            let every: usize = args.get(10).and_then(|s| s.parse().ok()).unwrap_or(1);
            let schedule = AnnealSchedule::new(tau0, rate, tau_min).unwrap();
            let t0 = std::time::Instant::now();
            let mut sum = 0.0;
            for i in 0..instances {
                let inst = SkInstance::generate(n, 1000 + i as u64).unwrap();
                let problem = SkProblem::new(inst);
                let mut best = f64::INFINITY;
                for b in 0..batch {
                    let mut rng = rng_from_seed(replica_stream_seed(i as u64, b));
                    let mut logits = Array2::from_shape_fn((n, 2), |_| {
                        0.01 * rng.sample::<f64, _>(StandardNormal)
                    });
                    let mut adam = AdamState::new(Ix2(n, 2));
                    let mut noise = Array2::zeros((n, 2));
                    let mut probs = Array2::zeros((n, 2));
                    let mut grad = Array2::zeros((n, 2));
                    for step in 0..steps {
                        let tau = schedule.tau_at(step);
                        fill_gumbel(noise.as_slice_mut().unwrap(), &mut rng);
                        for ((l, g), mut p) in logits
                            .rows()
                            .into_iter()
                            .zip(noise.rows())
                            .zip(probs.rows_mut())
                        {
                            gumbel_softmax_into(
                                l.as_slice().unwrap(),
                                g.as_slice().unwrap(),
                                tau,
                                p.as_slice_mut().unwrap(),
                            );
                        }
                        problem.relaxed_value_grad(&probs.view(), &mut grad.view_mut());
                        if step % every == 0 {
                            let config = harden(probs.view());
                            let d = problem.discrete_value(&config);
                            if d < best {
                                best = d;
                            }
                        }
                        chain_through_softmax_inplace(&probs.view(), &mut grad.view_mut(), tau);
                        adam.update(&mut logits, &grad, lr).unwrap();
                    }
                    let config = harden(logits.view());
                    let d = problem.discrete_value(&config);
                    if d < best {
                        best = d;
                    }
                }
                println!("  instance {i}: best-ever E/N = {best:.5}");
                sum += best;
            }
            println!(
                "BESTEVER n={n} steps={steps} lr={lr} rate={rate} batch={batch} tau0={tau0} tau_min={tau_min} every={every}: mean = {:.5}, total {:.1}s",
                sum / instances as f64,
                t0.elapsed().as_secs_f64()
            );
        }
        _ => eprintln!("unknown mode"),
    }
}
