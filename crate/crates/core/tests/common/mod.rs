//! Helpers shared by the integration tests: seeded scenarios, a run wrapper
//! and brute-force reference solutions.
#![allow(dead_code)]

use ihpe_core::ergodic::ErgodicPoint;
use ihpe_core::hpe::{run_with_observer, Certificate, InnerSolver, RunOptions, SolverState, StoppingRule, Verdict};
use ihpe_core::operators::{make_problem, Backward, ProblemKind, TestProblem};
use ihpe_core::{HpeParams, Instance, InstanceConfig, InstanceKind, LambdaRule, VectorH};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: String,
    pub problem: TestProblem,
    pub kind: InstanceKind,
    pub params: HpeParams,
    pub rule: LambdaRule,
}

impl Scenario {
    pub fn new(
        problem: TestProblem,
        kind: InstanceKind,
        params: HpeParams,
        rule: LambdaRule,
    ) -> Self {
        let label = format!(
            "{}/{} n={} seed={:?} α={} σ={} τ={:.4}",
            kind,
            problem.kind,
            problem.dim(),
            problem.seed,
            params.alpha,
            params.sigma,
            params.tau
        );
        Self { label, problem, kind, params, rule }
    }

    pub fn instance(&self) -> Instance {
        let config = InstanceConfig { kind: self.kind, lambda: self.rule.clone() };
        Instance::build(&self.problem, &config, self.params.sigma).expect(&self.label)
    }

    pub fn d0(&self) -> f64 {
        self.problem.known_d0.expect("seeded problems carry d₀")
    }
}

/// A finished run plus whatever the observer collected.
pub struct Outcome {
    pub state: SolverState,
    pub verdict: Verdict,
    pub lambda_floor: f64,
    pub certs: Vec<Certificate>,
    pub ergodic: Vec<ErgodicPoint>,
    pub iterates: Vec<VectorH>,
}

pub fn execute(sc: &Scenario, stop: &StoppingRule, collect: bool) -> Outcome {
    let mut inst = sc.instance();
    let lambda_floor = inst.lambda_floor();
    let opts = RunOptions { reference: sc.problem.known_solution.clone(), ..RunOptions::default() };
    let (mut certs, mut ergodic, mut iterates) = (Vec::new(), Vec::new(), Vec::new());
    let (state, verdict) = run_with_observer(&sc.problem.z0, &mut inst, &sc.params, stop, &opts, &mut |s| {
        if collect {
            certs.push(s.cert.clone());
            ergodic.push(s.ergodic.point().expect("at least one update"));
            iterates.push(s.z.clone());
        }
    })
    .unwrap_or_else(|e| panic!("{}: {e}", sc.label));
    Outcome { state, verdict, lambda_floor, certs, ergodic, iterates }
}

pub fn default_stop() -> StoppingRule {
    StoppingRule { max_iter: 100_000, ..StoppingRule::default() }
}

fn params(alpha: f64, sigma: f64, beta: f64) -> HpeParams {
    HpeParams::from_beta(alpha, sigma, beta).unwrap()
}

/// 20 seeded scenarios per instance kind, covering every problem family
/// the instance accepts.
pub fn seeded_suite() -> Vec<Scenario> {
    let mut out = Vec::new();
    let alphas = [0.0, 0.1, 0.2, 0.3];
    for seed in 0..20u64 {
        let i = seed as usize;
        let alpha = alphas[i % 4];
        // Proximal point on the affine families.
        let (pk, n) = if i.is_multiple_of(2) {
            (ProblemKind::AffineInclusion, 8 + 2 * (i % 5))
        } else {
            (ProblemKind::BilinearSaddle, 6 + 2 * (i % 4))
        };
        let sigma = [0.0, 0.3][i % 2];
        out.push(Scenario::new(
            make_problem(pk, n, seed).unwrap(),
            InstanceKind::Ppm,
            params(alpha, sigma, 1.0 / 3.0),
            LambdaRule::Constant { value: [1.0, 0.5, 2.0][i % 3] },
        ));
        // Tseng on all four families.
        let pk = ProblemKind::ALL[i % 4];
        let n = if pk == ProblemKind::BilinearSaddle { 10 } else { 6 + i % 7 };
        let sigma = [0.5, 0.9, 0.7, 0.99][i % 4];
        out.push(Scenario::new(
            make_problem(pk, n, 100 + seed).unwrap(),
            InstanceKind::TsengFbf,
            params(alpha, sigma, 0.4),
            LambdaRule::AtCap,
        ));
        // Forward-backward on the cocoercive families.
        let pk = [ProblemKind::BoxConstrainedQuadratic, ProblemKind::L1Composite][i % 2];
        let sigma = [0.5, 0.9, 0.99, 0.75][i % 4];
        out.push(Scenario::new(
            make_problem(pk, 5 + i % 6, 200 + seed).unwrap(),
            InstanceKind::ForwardBackward,
            params(alpha, sigma, 0.35),
            LambdaRule::AtCap,
        ));
    }
    out
}

fn qc_of(problem: &TestProblem) -> (DMatrix<f64>, DVector<f64>) {
    let f = problem.forward.as_ref().expect("structured problem");
    (f.map.matrix().clone(), f.map.offset().to_dvector())
}

/// Solves `0 ∈ Qz + c + μ∂‖z‖₁` by enumerating all `3ⁿ` sign patterns.
pub fn l1_enumeration_oracle(problem: &TestProblem) -> VectorH {
    let Backward::L1 { weight: mu, .. } = problem.backward else {
        panic!("not an l1 problem")
    };
    let (q, c) = qc_of(problem);
    let n = c.len();
    assert!(n <= 10, "enumeration is for small n");
    let mut signs = vec![-1i8; n];
    loop {
        let support: Vec<usize> = (0..n).filter(|&i| signs[i] != 0).collect();
        let m = support.len();
        let q_ss = DMatrix::from_fn(m, m, |a, b| q[(support[a], support[b])]);
        let rhs = DVector::from_fn(m, |a, _| -c[support[a]] - mu * signs[support[a]] as f64);
        let sol = if m == 0 { Some(DVector::zeros(0)) } else { q_ss.lu().solve(&rhs) };
        if let Some(sol) = sol {
            let mut z = DVector::zeros(n);
            for (a, &i) in support.iter().enumerate() {
                z[i] = sol[a];
            }
            let grad = &q * &z + &c;
            let signs_ok = support.iter().enumerate().all(|(a, &i)| sol[a] * signs[i] as f64 > 0.0);
            let off_ok = (0..n).filter(|&i| signs[i] == 0).all(|i| grad[i].abs() <= mu + 1e-12);
            if signs_ok && off_ok {
                return VectorH::from_dvector(&z);
            }
        }
        // Next pattern in {−1, 0, 1}ⁿ.
        let mut i = 0;
        loop {
            if i == n {
                panic!("no sign pattern satisfies the optimality conditions");
            }
            if signs[i] < 1 {
                signs[i] += 1;
                break;
            }
            signs[i] = -1;
            i += 1;
        }
    }
}

/// Solves `0 ∈ Qz + c + N_[l,u](z)` by enumerating active sets.
pub fn box_active_set_oracle(problem: &TestProblem) -> VectorH {
    let Backward::BoxNormalCone(bx) = &problem.backward else {
        panic!("not a box problem")
    };
    let (q, c) = qc_of(problem);
    let n = c.len();
    assert!(n <= 10, "enumeration is for small n");
    // 0 = lower, 1 = free, 2 = upper.
    let mut state = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let mut z = DVector::from_fn(n, |i, _| match state[i] {
            0 => bx.lower[i],
            2 => bx.upper[i],
            _ => 0.0,
        });
        let m = free.len();
        let q_ff = DMatrix::from_fn(m, m, |a, b| q[(free[a], free[b])]);
        let partial = &q * &z + &c;
        let rhs = DVector::from_fn(m, |a, _| -partial[free[a]]);
        let sol = if m == 0 { Some(DVector::zeros(0)) } else { q_ff.lu().solve(&rhs) };
        if let Some(sol) = sol {
            for (a, &i) in free.iter().enumerate() {
                z[i] = sol[a];
            }
            let grad = &q * &z + &c;
            let ok = (0..n).all(|i| match state[i] {
                0 => grad[i] >= -1e-12,
                2 => grad[i] <= 1e-12,
                _ => z[i] >= bx.lower[i] - 1e-12 && z[i] <= bx.upper[i] + 1e-12,
            });
            if ok {
                return VectorH::from_dvector(&z);
            }
        }
        let mut i = 0;
        loop {
            if i == n {
                panic!("no active set satisfies the optimality conditions");
            }
            if state[i] < 2 {
                state[i] += 1;
                break;
            }
            state[i] = 0;
            i += 1;
        }
    }
}

/// Dense `(λA + I)^{-1}(z − λb)`, independent of the library's cached solver.
pub fn exact_prox_step(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64, z: &DVector<f64>) -> DVector<f64> {
    let n = z.len();
    let m = a * lambda + DMatrix::identity(n, n);
    m.lu().solve(&(z - b * lambda)).expect("resolvent system is nonsingular")
}

pub fn clamp(z: &DVector<f64>, lo: &VectorH, hi: &VectorH) -> DVector<f64> {
    DVector::from_fn(z.len(), |i, _| z[i].clamp(lo[i], hi[i]))
}

pub fn shrink(z: &DVector<f64>, t: f64) -> DVector<f64> {
    z.map(|x| x.signum() * (x.abs() - t).max(0.0))
}
