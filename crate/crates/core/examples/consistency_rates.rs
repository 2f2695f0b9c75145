// Monte-Carlo error of the covariance and precision estimators against N, with the log-log slope.

use precistab::lab::{verify_consistency, DistributionSpec, Statistic};
use precistab::SymMatrix;

fn main() -> precistab::Result<()> {
    let p = DistributionSpec::Gaussian {
        mu: vec![0.0; 4],
        sigma: SymMatrix::identity(4),
    };
    let grid = [50, 100, 200, 400, 800];
    for stat in [
        Statistic::Covariance { centered: true },
        Statistic::Eigenvalues { centered: true },
        Statistic::Precision {
            lambda: 0.5,
            centered: true,
            kappa: None,
        },
    ] {
        let r = verify_consistency(&p, &stat, &grid, 100, 3)?;
        println!("{} (slope {:.3}, pass {})", r.statistic, r.slope, r.pass);
        for row in &r.rows {
            println!(
                "  N = {:<4} E_N = {:.5}  bound = {:.5}  holds = {}",
                row.sample_size, row.e_n, row.bound, row.holds
            );
        }
    }
    Ok(())
}
