//! Probabilistic diagnostics of the two-time path measure: screening-off,
//! the F/G/Z split, the Bernstein and interior-shielding properties, and
//! the preparation dependence of time-oriented conditionals.

pub mod ci;
pub mod fgz;
pub mod joint;
pub mod lambda;
pub mod screening;
pub mod sweep;

pub use ci::{ci_test, gaussian_ci, sampled_ci, Backend, CITestResult, PermutationOptions, Verdict, EXACT_THRESHOLD};
pub use fgz::{factorization_check, fgz_decomposition, FactorizationCheck, FgzDecomposition};
pub use joint::{conditional_law, gaussian_joint, AffineGaussianLaw, GaussianPreparation, JointData, MultiTimeJoint};
pub use lambda::{lambda_mediation_test, LambdaReport};
pub use screening::{bernstein_test, ci_blocks, interior_shielding_test, markov_screening_test, Block, EndpointData, FiveSteps};
pub use sweep::{screening_sweep, InstanceKind, ScreeningInstance};

/// One row of a verdict table.
#[derive(Clone, Debug)]
pub struct VerdictRow {
    pub instance_id: String,
    pub test: String,
    pub result: CITestResult,
}

pub fn verdict_csv(rows: &[VerdictRow]) -> String {
    let mut out = String::from("instance_id,test,statistic,threshold,verdict,backend,n_samples,seed\n");
    for r in rows {
        let seed = r.result.seed.map(|s| s.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{:.6e},{:.6e},{},{},{},{}\n",
            r.instance_id, r.test, r.result.statistic, r.result.threshold, r.result.verdict, r.result.backend, r.result.n_samples, seed
        ));
    }
    out
}
