use ikep_milp::{
    solve, solve_relaxation, Bounds, LinExpr, LpOutcome, MilpModel, Rational, Relation, Sense, SolveLimits,
    SolveStatus,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_binary_model(rng: &mut ChaCha8Rng) -> MilpModel {
    let sense = if rng.random_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    let mut m = MilpModel::new("random", sense);
    let nvars = rng.random_range(1..=7);
    let vars: Vec<_> = (0..nvars).map(|i| m.add_binary(format!("b{i}"))).collect();
    for r in 0..rng.random_range(1..=5) {
        let mut expr = LinExpr::new();
        for v in &vars {
            if rng.random_bool(0.7) {
                expr.add_term(*v, Rational::new(rng.random_range(-3..=3), rng.random_range(1..=2)));
            }
        }
        let rel = match rng.random_range(0..3) {
            0 => Relation::Le,
            1 => Relation::Ge,
            _ => Relation::Eq,
        };
        let rhs = Rational::new(rng.random_range(-2..=5), rng.random_range(1..=2));
        m.add_constraint(format!("r{r}"), expr, rel, rhs);
    }
    let obj: LinExpr = vars.iter().map(|v| (*v, Rational::from(rng.random_range(-4..=4i64)))).collect();
    m.set_objective(obj);
    m
}

fn enumerate(m: &MilpModel) -> Option<Rational> {
    let n = m.variables().len();
    let mut best: Option<Rational> = None;
    for mask in 0u32..(1 << n) {
        let vals: Vec<Rational> =
            (0..n).map(|i| if mask >> i & 1 == 1 { Rational::ONE } else { Rational::ZERO }).collect();
        if !m.is_feasible(&vals) {
            continue;
        }
        let z = m.objective().expr.evaluate(&vals);
        let better = match (&best, m.objective().sense) {
            (None, _) => true,
            (Some(b), Sense::Maximize) => z > *b,
            (Some(b), Sense::Minimize) => z < *b,
        };
        if better {
            best = Some(z);
        }
    }
    best
}

#[test]
fn agrees_with_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut feasible_seen = 0;
    for _ in 0..50 {
        let m = random_binary_model(&mut rng);
        let s = solve(&m, &SolveLimits::default()).unwrap();
        let brute = enumerate(&m);
        match brute {
            None => assert_eq!(s.status, SolveStatus::Infeasible),
            Some(z) => {
                feasible_seen += 1;
                assert_eq!(s.status, SolveStatus::Optimal);
                assert_eq!(s.objective.as_ref(), Some(&z));
                assert!(m.is_feasible(&s.values), "returned assignment violates the model exactly");
            }
        }
    }
    assert!(feasible_seen >= 10, "generator produced too few feasible models");
}

#[test]
fn relaxation_bound_dominates_integer_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..60 {
        let m = random_binary_model(&mut rng);
        let bounds: Vec<Bounds> = m.variables().iter().map(|v| v.bounds.clone()).collect();
        let s = solve(&m, &SolveLimits::default()).unwrap();
        let Some(z) = s.objective else { continue };
        match solve_relaxation(&m, &bounds) {
            LpOutcome::Optimal { objective, .. } => match m.objective().sense {
                Sense::Maximize => assert!(objective >= z),
                Sense::Minimize => assert!(objective <= z),
            },
            other => panic!("relaxation of a feasible model returned {other:?}"),
        }
    }
}

#[test]
fn mixed_model_with_continuous_deviation() {
    // min d s.t. |b1 + b2 - 3/2| <= d, b1 + b2 >= 1 -> d = 1/2
    let mut m = MilpModel::new("dev", Sense::Minimize);
    let b1 = m.add_binary("b1");
    let b2 = m.add_binary("b2");
    let d = m.add_continuous("d", Bounds::range(Rational::ZERO, Rational::from(5)));
    let s = LinExpr::new().term(b1, 1).term(b2, 1);
    let mut up = s.clone();
    up.add_term(d, -Rational::ONE);
    m.add_constraint("up", up, Relation::Le, Rational::new(3, 2));
    let mut down = s.clone();
    down.add_term(d, Rational::ONE);
    m.add_constraint("down", down, Relation::Ge, Rational::new(3, 2));
    m.add_constraint("cover", s, Relation::Ge, 1);
    m.set_objective(LinExpr::new().term(d, 1));
    let sol = solve(&m, &SolveLimits::default()).unwrap();
    assert_eq!(sol.objective, Some(Rational::new(1, 2)));
    assert!(m.is_feasible(&sol.values));
}
