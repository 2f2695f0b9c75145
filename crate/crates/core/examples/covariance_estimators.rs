// Sample mean, centered and uncentered covariance, sorted eigenvalues and the
// data-Lipschitz inequality for the centered covariance.

use precistab::estimators::{
    cov_data_lipschitz_check, sample_cov, sample_eigvals, sample_mean, spectral_gap, SampleSet,
};

fn main() -> precistab::Result<()> {
    let rows = vec![
        vec![1.0, 0.2, -0.4],
        vec![-0.5, 1.1, 0.3],
        vec![0.7, -0.9, 0.8],
        vec![0.1, 0.4, -1.2],
        vec![-1.3, -0.2, 0.5],
    ];
    let x = SampleSet::from_rows(&rows)?;
    println!("mean         = {:?}", sample_mean(&x));
    println!("centered     = {:?}", sample_cov(&x, true).to_rows());
    println!("uncentered   = {:?}", sample_cov(&x, false).to_rows());
    let eig = sample_eigvals(&x, true)?;
    println!("eigenvalues  = {eig:?}");
    println!("spectral gap = {}", spectral_gap(&eig)?);

    // Move every observation a little and compare both sides.
    let y = x.shifted(&[0.05, -0.02, 0.01]).scaled(1.1);
    let ineq = cov_data_lipschitz_check(&x, &y)?;
    println!("‖Σ̂(x) − Σ̂(y)‖ = {:.6} ≤ {:.6}", ineq.lhs, ineq.rhs);
    Ok(())
}
