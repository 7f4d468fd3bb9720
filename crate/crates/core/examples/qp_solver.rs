//! The dense QP solver on a tiny problem with both kinds of constraints.

use jumpilc::qp::{solve, QpProblem, QpSettings};
use nalgebra::{dmatrix, dvector};

fn main() {
    // min (z0 - 1)² + (z1 - 2)²  s.t.  z0 + z1 ≤ 2,  z0 - z1 = 0
    let p = QpProblem::new(dmatrix![2.0, 0.0; 0.0, 2.0], dvector![-2.0, -4.0])
        .with_inequalities(dmatrix![1.0, 1.0], dvector![2.0])
        .with_equalities(dmatrix![1.0, -1.0], dvector![0.0]);
    let sol = solve(&p, &QpSettings::default()).expect("well-posed");
    println!("status {:?} after {} iterations", sol.status, sol.iterations);
    println!("z = [{:.6}, {:.6}], objective {:.6}", sol.z[0], sol.z[1], sol.objective);
    println!("multipliers: ineq {:?}, eq {:?}", sol.multipliers.ineq.as_slice(), sol.multipliers.eq.as_slice());
    println!("KKT residual {:.2e}", sol.kkt_residual);
}
