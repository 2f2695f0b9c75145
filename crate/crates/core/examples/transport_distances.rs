// W1 between empirical measures: sorted 1-d formula, exact assignment,
// and the order-2 Fortet–Mourier bracket.

use precistab::transport::{
    fm2_upper, fm_lower_dictionary, gaussian_w2, w1_assignment, w1_sorted_1d, EmpiricalMeasure,
    GroundMetric,
};
use precistab::SymMatrix;

fn main() -> precistab::Result<()> {
    let a = EmpiricalMeasure::from_scalars(&[0.0, 1.0])?;
    let b = EmpiricalMeasure::from_scalars(&[0.0, 3.0])?;
    println!("scalar W1 sorted     = {}", w1_sorted_1d(&a, &b)?);
    println!("scalar W1 assignment = {}", w1_assignment(&a, &b, GroundMetric::Euclidean)?);

    let p = EmpiricalMeasure::from_vectors(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 2.0]])?;
    let q = EmpiricalMeasure::from_vectors(&[vec![0.5, 0.5], vec![1.5, 0.0], vec![0.0, 3.0]])?;
    println!("vector W1            = {:.6}", w1_assignment(&p, &q, GroundMetric::Euclidean)?);
    let (lo, hi) = (fm_lower_dictionary(&p, &q, 2)?, fm2_upper(&p, &q)?);
    println!("order-2 bracket      = [{lo:.6}, {hi:.6}]");

    let w2 = gaussian_w2(
        &[0.0, 0.0],
        &SymMatrix::identity(2),
        &[1.0, 0.0],
        &SymMatrix::from_diag(&[4.0, 1.0]),
    )?;
    println!("Gaussian W2          = {w2:.6}  (expected √2)");
    Ok(())
}
