// One pass of every pairwise bound check on a small Gaussian pair,
// plus the discrete covariance-difference bound.

use precistab::lab::{
    verify_chain_rule, verify_prop82, verify_thm51, verify_thm52, verify_thm53, verify_thm55,
    DistributionSpec, MonteCarlo,
};
use precistab::SymMatrix;

fn main() -> precistab::Result<()> {
    let p = DistributionSpec::Gaussian {
        mu: vec![0.0, 0.5, -0.5],
        sigma: SymMatrix::from_rows(&[vec![1.0, 0.2, 0.0], vec![0.2, 1.0, 0.1], vec![0.0, 0.1, 0.5]])?,
    };
    let q = DistributionSpec::Gaussian {
        mu: vec![0.2, 0.5, -0.3],
        sigma: SymMatrix::from_diag(&[1.4, 1.0, 0.8]),
    };
    let mc = MonteCarlo {
        raw_factor: 5,
        ..MonteCarlo::new(100, 100, 42)
    };
    let rows = [
        ("covariance", verify_thm51(&p, &q, true, &mc)?),
        ("covariance, uncentered", verify_thm51(&p, &q, false, &mc)?),
        ("mean and covariance", verify_thm52(&p, &q, &mc)?),
        ("precision λ=1", verify_thm53(&p, &q, 1.0, None, true, &mc)?),
        ("eigenvalues", verify_thm55(&p, &q, true, &mc)?),
    ];
    for (name, r) in &rows {
        println!(
            "{name:<24} dK = {:.4} ± {:.4}   bound = {:.4}   pass = {}",
            r.dk_hat, r.dk_se, r.bound_rhs, r.pass
        );
    }
    let chain = verify_chain_rule(&p, &q, 1.0, true, &mc)?;
    println!(
        "precision dK {:.4} ≤ κ·covariance dK = {:.4}: {}",
        chain.precision_dk,
        chain.kappa * chain.covariance_dk,
        chain.holds
    );

    let dp = DistributionSpec::Discrete {
        atoms: vec![vec![0.0], vec![2.0]],
        probs: vec![0.5, 0.5],
    };
    let dq = DistributionSpec::Discrete {
        atoms: vec![vec![0.0], vec![4.0]],
        probs: vec![0.5, 0.5],
    };
    let c = verify_prop82(&dp, &dq)?;
    println!("‖Σ_P − Σ_Q‖ = {} ≤ {} (d₁ = {}, d₂ ≤ {})", c.lhs, c.rhs_upper, c.d1, c.d2_upper);
    Ok(())
}
