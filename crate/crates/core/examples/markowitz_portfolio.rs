// Long-only minimum-variance portfolio with a target return, its duals and the dual bound.

use precistab::portfolio::{dual_bound_check, feasible_interval, solve_markowitz, PortfolioProblem};
use precistab::SymMatrix;

fn main() -> precistab::Result<()> {
    let mu = vec![0.08, 0.12, 0.15, 0.10];
    let sigma = SymMatrix::from_rows(&[
        vec![0.040, 0.006, 0.004, 0.002],
        vec![0.006, 0.090, 0.010, 0.004],
        vec![0.004, 0.010, 0.160, 0.008],
        vec![0.002, 0.004, 0.008, 0.060],
    ])?;
    let (lo, hi) = feasible_interval(&mu);
    println!("feasible targets: [{lo}, {hi}]");
    for z in [0.09, 0.11, 0.13, 0.145] {
        let p = PortfolioProblem::new(mu.clone(), sigma.clone(), z)?;
        let s = solve_markowitz(&p)?;
        let bound = dual_bound_check(&p)?;
        println!(
            "z = {z:<5} value {:.6}  w = {:?}  |λ₁| = {:.4} ≤ {:.4}",
            s.value,
            s.w.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            bound.lhs,
            bound.rhs
        );
    }
    match PortfolioProblem::new(mu, sigma, 0.2) {
        Err(e) => println!("z = 0.2: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
