use invopt::config::ProblemFile;
use invopt::instances::{random_cost_model, random_qp};
use invopt::learner::{run_with_truth, LearnerConfig};
use invopt::qp::{enumerate_kkt, solve};
use invopt::{eval_loss, implicit_update, Observation};
use nalgebra::DVector;
use proptest::prelude::*;

const BUDGET: &str = r#"
n = 2
p = 1
sense = "maximize"
q = [-1.0, 0.0, 0.0, -1.0]
c0 = [4.0, 4.0]
a_ineq = [-1.0, -1.0, 1.0, 0.0, 0.0, 1.0]
b_ineq = [0.0, 0.0, 0.0]
b_theta = [-1.0, 0.0, 0.0]
theta = [3.0]

[box]
lo = [0.0]
hi = [10.0]
"#;

#[test]
fn file_to_solution_loss_and_update() {
    let file = ProblemFile::parse(BUDGET).unwrap();
    let problem = file.problem().unwrap();
    let bx = file.parameter_box().unwrap();
    let theta = file.theta().unwrap();
    let sol = solve(&problem.instantiate(&theta, &file.signal()).unwrap()).unwrap();
    // Spending 3 on two symmetric goods with bliss point 4 splits the budget evenly.
    assert!((&sol.x - DVector::from_row_slice(&[1.5, 1.5])).norm() < 1e-9);

    let y = DVector::from_row_slice(&[2.0, 2.0]);
    let obs = Observation::new(DVector::zeros(0), y).unwrap();
    let loss = eval_loss(&problem, &theta, &obs).unwrap().value;
    assert!((loss - 0.5).abs() < 1e-9);

    let step = implicit_update(&problem, &bx, &theta, 1.0, &obs).unwrap();
    assert!(step.theta_next[0] > 3.0 && step.theta_next[0] <= 4.0 + 1e-9);
    let after = eval_loss(&problem, &step.theta_next, &obs).unwrap().value;
    assert!(0.5 * (step.theta_next[0] - 3.0).powi(2) + after <= loss + 1e-9);
}

#[test]
fn noiseless_stream_recovers_cost_vector() {
    let (problem, bx) = random_cost_model(3, 2, 3);
    let truth = DVector::from_row_slice(&[2.0, 3.0]);
    let stream: Vec<Observation> = (0..60)
        .map(|_| {
            let x = solve(&problem.instantiate(&truth, &DVector::zeros(0)).unwrap())
                .unwrap()
                .x;
            Observation::new(DVector::zeros(0), x).unwrap()
        })
        .collect();
    let cfg = LearnerConfig::cold(2.0, bx.lo().clone());
    let trace = run_with_truth(&problem, &bx, &stream, &cfg, Some(&truth)).unwrap();
    assert!(trace.losses().last().unwrap() < &1e-6);
    assert!(trace.max_progress_gap() <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn active_set_matches_enumeration(seed in 0u64..10_000, n in 1usize..5, q in 0usize..7, strict in any::<bool>()) {
        let (qp, x_feas) = random_qp(seed, n, q, strict);
        let a = solve(&qp).unwrap();
        let b = enumerate_kkt(&qp).unwrap();
        prop_assert!((a.objective - b.objective).abs() <= 1e-7 * b.objective.abs().max(1.0));
        prop_assert!(a.objective <= qp.objective(&x_feas) + 1e-9);
    }

    #[test]
    fn loss_vanishes_on_own_solution(seed in 0u64..10_000, t0 in 0.0f64..5.0, t1 in 0.0f64..5.0) {
        let (problem, _) = random_cost_model(seed, 2, 3);
        let theta = DVector::from_row_slice(&[t0, t1]);
        let x = solve(&problem.instantiate(&theta, &DVector::zeros(0)).unwrap()).unwrap().x;
        let obs = Observation::new(DVector::zeros(0), x).unwrap();
        prop_assert!(eval_loss(&problem, &theta, &obs).unwrap().value <= 1e-10);
    }
}
