// Sparse precision matrix from a covariance: proximal solver, KKT residual,
// the smoothed variant and the recovered edge set.

use precistab::precision::{edge_set, kkt_residual, solve_default, solve_smoothed, PrecisionProblem};
use precistab::SymMatrix;

fn main() -> precistab::Result<()> {
    // Chain graph: tridiagonal precision, so the covariance is dense.
    let truth = SymMatrix::from_fn(5, |i, j| match j - i {
        0 => 2.0,
        1 => 0.6,
        _ => 0.0,
    });
    let sigma = precistab::linalg::inverse_pd(&truth)?;

    for lambda in [0.5, 0.05, 0.005] {
        let p = PrecisionProblem::new(lambda, sigma.clone())?;
        let r = solve_default(&p)?;
        println!(
            "λ = {lambda:<6} objective {:.6}  iterations {:>4}  kkt {:.1e}  ‖S*‖₁ = {:.3} (cap {:.1})",
            r.objective,
            r.iterations,
            kkt_residual(&p, &r.s_star)?,
            r.s_star.norm_entry1(),
            p.ell1_cap()
        );
        println!("  edges above 0.05: {:?}", edge_set(&r.s_star, 0.05));
    }

    // Diagonal covariance has the closed form 1/(σᵢ + λ).
    let diag = PrecisionProblem::new(0.5, SymMatrix::from_diag(&[1.0, 2.0]))?;
    let exact = solve_default(&diag)?;
    let smooth = solve_smoothed(&diag, 1e-6, 1e-9, 200_000)?;
    println!("diag(1,2), λ=0.5: S* = {:?}", exact.s_star.diag());
    println!("smoothed ε=1e-6 gap = {:.2e}", (&smooth.s_star - &exact.s_star).norm_fro());
    Ok(())
}
