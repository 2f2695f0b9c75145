// Portfolio value under a log-normal family restricted to the admissible shell.
// Smaller than the bundled config so it finishes quickly.

use precistab::cli::load_config;
use precistab::lab::{run_stability_experiment, stats};

fn main() -> precistab::Result<()> {
    let mut cfg = load_config(include_str!("../configs/lognormal_portfolio.json"))?;
    cfg.sample_size = 100;
    cfg.repetitions = 100;
    cfg.raw_factor = 5;
    cfg.family.alphas = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    let rep = run_stability_experiment(&cfg)?;
    for r in &rep.rows {
        println!(
            "α = {:.2}  d1 = {:.4}  dK = {:.6} ± {:.6}  bound = {:.1}",
            r.alpha.unwrap(),
            r.d1_proxy,
            r.dk_hat,
            r.dk_se,
            r.bound_rhs
        );
    }
    let d1: Vec<f64> = rep.rows.iter().map(|r| r.d1_proxy).collect();
    let dk: Vec<f64> = rep.rows.iter().map(|r| r.dk_hat).collect();
    println!("Pearson(d1, dK) = {:.3}", stats::pearson(&d1, &dk));
    println!("shell rejection rate = {:.4}", rep.rejection_rate.unwrap_or(0.0));
    println!("infeasible redraws = {}", rep.infeasible_redraws);
    Ok(())
}
