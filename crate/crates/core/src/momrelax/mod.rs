//! Moment relaxations of polynomial matrix inequalities, and the containment
//! hierarchy `μ_mom(t)` built from them.

mod poly;
mod relax;

pub use poly::{
    add_exponents, binomial, linearize, localizing_matrix_structure, moment_matrix_structure, monomial_value, Exponent, MonomialBasis,
    Poly, PolyMatrix,
};
pub use relax::{
    build_containment_relaxation, build_pmi_relaxation, containment_objective, relaxation_sizes, solve_mu_mom, CheckOptions,
    ContainmentProblem, MomentOutcome, MomentRelaxation, MomentVector, Verdict,
};

#[cfg(test)]
mod tests;
