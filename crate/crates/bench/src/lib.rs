//! Shared setup for the benchmarks in `benches/`.

use ihpe_core::operators::make_problem;
use ihpe_core::{HpeParams, Instance, InstanceConfig, InstanceKind, LambdaRule, ProblemKind, TestProblem};

/// A seeded problem, an instance on it and the parameters to run it with.
pub struct Setup {
    pub problem: TestProblem,
    pub instance: Instance,
    pub params: HpeParams,
}

/// `α = 0.2`, `β = 0.4`; PPM uses `σ = 0` and `λ = 1`, the splitting methods
/// `σ = 0.9` at their stepsize cap.
pub fn setup(kind: InstanceKind, problem: ProblemKind, dim: usize, seed: u64) -> Setup {
    let problem = make_problem(problem, dim, seed).expect("zoo problem");
    let (sigma, lambda) = match kind {
        InstanceKind::Ppm => (0.0, LambdaRule::Constant { value: 1.0 }),
        _ => (0.9, LambdaRule::AtCap),
    };
    let params = HpeParams::from_beta(0.2, sigma, 0.4).expect("valid parameters");
    let instance = Instance::build(&problem, &InstanceConfig { kind, lambda }, sigma).expect("instance");
    Setup { problem, instance, params }
}
