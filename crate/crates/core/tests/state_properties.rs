//! Invariants of the Gaussian state under random sequences of operations.

use gaussi::lang::unroll::Action;
use gaussi::{ArithOp, GaussianState};
use gaussi_oracle::{relative_deviation, NoiseBasisModel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Independent { mean: f64, variance: f64 },
    Linear { coeff: f64, dep: usize, offset: f64, variance: f64 },
    ShiftScale { src: usize, op: ArithOp, operand: f64 },
    Sum { a: usize, b: usize },
}

fn arith() -> impl Strategy<Value = ArithOp> {
    prop_oneof![Just(ArithOp::Add), Just(ArithOp::Sub), Just(ArithOp::Mul), Just(ArithOp::Div)]
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (-10.0..10.0f64, 0.1..10.0f64).prop_map(|(mean, variance)| Op::Independent { mean, variance }),
        (-3.0..3.0f64, any::<prop::sample::Index>(), -10.0..10.0f64, 0.1..10.0f64).prop_map(|(coeff, dep, offset, variance)| {
            Op::Linear {
                coeff,
                dep: dep.index(usize::MAX),
                offset,
                variance,
            }
        }),
        (any::<prop::sample::Index>(), arith(), 0.5..5.0f64, any::<bool>()).prop_map(|(src, op, c, neg)| Op::ShiftScale {
            src: src.index(usize::MAX),
            op,
            operand: if neg { -c } else { c },
        }),
        (any::<prop::sample::Index>(), any::<prop::sample::Index>()).prop_map(|(a, b)| Op::Sum {
            a: a.index(usize::MAX),
            b: b.index(usize::MAX),
        }),
    ]
}

fn name(i: usize) -> String {
    format!("V{i}")
}

/// Action for op `i` on a state holding `V0..V{i-1}`; the first op is
/// always an independent draw.
fn action(i: usize, op: &Op) -> Action {
    let pick = |k: usize| name(k % i.max(1));
    match (i, op) {
        (0, Op::Independent { mean, variance }) => Action::Independent {
            target: name(0),
            mean: *mean,
            variance: *variance,
        },
        (0, _) => Action::Independent {
            target: name(0),
            mean: 0.0,
            variance: 1.0,
        },
        (_, Op::Independent { mean, variance }) => Action::Independent {
            target: name(i),
            mean: *mean,
            variance: *variance,
        },
        (_, Op::Linear { coeff, dep, offset, variance }) => Action::Linear {
            target: name(i),
            coeff: *coeff,
            dep: pick(*dep),
            offset: *offset,
            variance: *variance,
        },
        (_, Op::ShiftScale { src, op, operand }) => Action::ShiftScale {
            target: name(i),
            src: pick(*src),
            op: *op,
            operand: *operand,
        },
        (_, Op::Sum { a, b }) => Action::Sum {
            target: name(i),
            lhs: pick(*a),
            rhs: pick(*b),
        },
    }
}

fn apply(s: GaussianState, a: &Action) -> GaussianState {
    match a.clone() {
        Action::Independent { target, mean, variance } => s.extend_independent(&target, mean, variance),
        Action::Linear {
            target,
            coeff,
            dep,
            offset,
            variance,
        } => s.extend_linear(&target, coeff, &dep, offset, variance),
        Action::ShiftScale {
            target,
            src,
            op,
            operand,
        } => s.extend_shift_scale(&target, &src, op, operand),
        Action::Sum { target, lhs, rhs } => s.extend_sum(&target, &lhs, &rhs),
        Action::Condition { target, value } => s.condition(&target, value),
    }
    .unwrap()
}

fn build(ops: &[Op]) -> GaussianState {
    ops.iter()
        .enumerate()
        .fold(GaussianState::new(), |s, (i, op)| apply(s, &action(i, op)))
}

fn states() -> impl Strategy<Value = GaussianState> {
    prop::collection::vec(op(), 1..12).prop_map(|ops| build(&ops))
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn scale(s: &GaussianState) -> f64 {
    1.0 + s.covariance_matrix().amax() + s.mean_dvector().amax()
}

/// Variables whose variance is safely away from zero.
fn observable(s: &GaussianState) -> Vec<String> {
    let big = s.covariance_matrix().amax();
    s.names()
        .iter()
        .filter(|n| s.variance_of(n).unwrap() > 1e-6 * (1.0 + big))
        .cloned()
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn every_operation_preserves_invariants(ops in prop::collection::vec(op(), 1..12), pick in any::<prop::sample::Index>(), z in -2.0..2.0f64) {
        let mut s = GaussianState::new();
        for (i, op) in ops.iter().enumerate() {
            s = apply(s, &action(i, op));
            prop_assert!(s.check_invariants().is_ok());
        }
        let obs = observable(&s);
        prop_assume!(!obs.is_empty());
        let o = pick.get(&obs).clone();
        let v = s.mean_of(&o).unwrap() + z * s.variance_of(&o).unwrap().sqrt();
        let c = s.clone().condition(&o, v).unwrap();
        prop_assert!(c.check_invariants().is_ok());
        prop_assume!(!c.is_empty());
        let cov = c.covariance_matrix();
        let eig = cov.clone().symmetric_eigenvalues();
        let tol = 1e-8 * (1.0 + (0..c.len()).map(|i| cov[(i, i)]).fold(0.0, f64::max));
        prop_assert!(eig.iter().all(|&e| e >= -tol), "{eig}");
    }

    #[test]
    fn extensions_grow_by_one_and_keep_old_entries(s in states(), op in op()) {
        let n = s.len();
        let before_mean = s.mean_dvector();
        let before_cov = s.covariance_matrix();
        let after = apply(s, &action(n, &op));
        prop_assert_eq!(after.len(), n + 1);
        for i in 0..n {
            prop_assert_eq!(after.mean_vector()[i].to_bits(), before_mean[i].to_bits());
            for j in 0..n {
                prop_assert_eq!(after.entry(i, j).to_bits(), before_cov[(i, j)].to_bits());
            }
        }
    }

    #[test]
    fn sum_variance_identity(s in states(), a in any::<prop::sample::Index>(), b in any::<prop::sample::Index>()) {
        let names = s.names().to_vec();
        let (a, b) = (a.get(&names).clone(), b.get(&names).clone());
        let (va, vb) = (s.variance_of(&a).unwrap(), s.variance_of(&b).unwrap());
        let expected = va + vb + 2.0 * s.covariance_of(&a, &b).unwrap();
        let t = s.extend_sum("S", &a, &b).unwrap();
        prop_assert!((t.variance_of("S").unwrap() - expected).abs() <= 4.0 * f64::EPSILON * (va + vb));
    }

    #[test]
    fn condition_drops_one_dimension(s in states(), pick in any::<prop::sample::Index>(), z in -2.0..2.0f64) {
        let obs = observable(&s);
        prop_assume!(!obs.is_empty());
        let o = pick.get(&obs).clone();
        let v = s.mean_of(&o).unwrap() + z * s.variance_of(&o).unwrap().sqrt();
        let n = s.len();
        let c = s.condition(&o, v).unwrap();
        prop_assert_eq!(c.len(), n - 1);
        prop_assert!(!c.contains(&o));
    }

    #[test]
    fn observing_an_independent_variable_changes_nothing(s in states(), mean in -10.0..10.0f64, var in 0.1..10.0f64, v in -10.0..10.0f64) {
        let before_mean = s.mean_dvector();
        let before_cov = s.covariance_matrix();
        let c = s.extend_independent("free", mean, var).unwrap().condition("free", v).unwrap();
        prop_assert!((c.mean_dvector() - before_mean).amax() <= 1e-12);
        prop_assert!(max_abs_diff(&c.covariance_matrix(), &before_cov) <= 1e-12);
    }

    #[test]
    fn conditions_commute(s in states(), p1 in any::<prop::sample::Index>(), p2 in any::<prop::sample::Index>(), z1 in -2.0..2.0f64, z2 in -2.0..2.0f64) {
        let obs = observable(&s);
        prop_assume!(obs.len() >= 2);
        let o1 = p1.get(&obs).clone();
        let o2 = p2.get(&obs).clone();
        prop_assume!(o1 != o2);
        let (v1, v2) = (s.variance_of(&o1).unwrap(), s.variance_of(&o2).unwrap());
        let c12 = s.covariance_of(&o1, &o2).unwrap();
        // a nearly collinear pair makes the second observation ill-posed
        prop_assume!(v1 * v2 - c12 * c12 > 1e-3 * v1 * v2);
        let x1 = s.mean_of(&o1).unwrap() + z1 * v1.sqrt();
        let x2 = s.mean_of(&o2).unwrap() + z2 * v2.sqrt();
        let tol = 1e-9 * scale(&s);
        let a = s.clone().condition(&o1, x1).unwrap().condition(&o2, x2).unwrap();
        let b = s.condition(&o2, x2).unwrap().condition(&o1, x1).unwrap();
        prop_assert_eq!(a.names(), b.names());
        prop_assert!((a.mean_dvector() - b.mean_dvector()).amax() <= tol);
        prop_assert!(max_abs_diff(&a.covariance_matrix(), &b.covariance_matrix()) <= tol);
    }

    #[test]
    fn marginal_commutes_with_condition(s in states(), pick in any::<prop::sample::Index>(), keep in prop::collection::vec(any::<bool>(), 12), z in -2.0..2.0f64) {
        let obs = observable(&s);
        prop_assume!(!obs.is_empty());
        let o = pick.get(&obs).clone();
        let targets: Vec<String> = s.names().iter().zip(&keep).filter(|(n, &k)| k && **n != o).map(|(n, _)| n.clone()).collect();
        prop_assume!(!targets.is_empty());
        let v = s.mean_of(&o).unwrap() + z * s.variance_of(&o).unwrap().sqrt();
        let tol = 1e-9 * scale(&s);

        let (m1, c1) = s.clone().condition(&o, v).unwrap().marginal(&targets).unwrap();
        let mut with_obs = targets.clone();
        with_obs.push(o.clone());
        let (m2, c2) = s.marginal_state(&with_obs).unwrap().condition(&o, v).unwrap().marginal(&targets).unwrap();
        prop_assert!((m1 - m2).amax() <= tol);
        prop_assert!(max_abs_diff(&c1, &c2) <= tol);
    }

    #[test]
    fn affine_maps_compose(s in states(), a1 in prop::collection::vec(-2.0..2.0f64, 36), b1 in prop::collection::vec(-5.0..5.0f64, 3), a2 in prop::collection::vec(-2.0..2.0f64, 6), b2 in prop::collection::vec(-5.0..5.0f64, 2)) {
        let n = s.len().min(12);
        let s = s.marginal_state(&s.names()[..n]).unwrap();
        let a1 = DMatrix::from_fn(3, n, |i, j| a1[(i * 12 + j) % 36]);
        let b1 = DVector::from_vec(b1);
        let a2 = DMatrix::from_row_slice(2, 3, &a2);
        let b2 = DVector::from_vec(b2);
        let two_step = s
            .affine_transform(&a1, &b1, &["Y0", "Y1", "Y2"])
            .unwrap()
            .affine_transform(&a2, &b2, &["Z0", "Z1"])
            .unwrap();
        let direct = s.affine_transform(&(&a2 * &a1), &(&a2 * &b1 + &b2), &["Z0", "Z1"]).unwrap();
        let tol = 1e-10 * (1.0 + direct.covariance_matrix().amax() + direct.mean_dvector().amax());
        prop_assert!((two_step.mean_dvector() - direct.mean_dvector()).amax() <= tol);
        prop_assert!(max_abs_diff(&two_step.covariance_matrix(), &direct.covariance_matrix()) <= tol);
    }

    #[test]
    fn matches_noise_basis_model(ops in prop::collection::vec(op(), 1..12), picks in prop::collection::vec((any::<prop::sample::Index>(), -1.5..1.5f64), 0..3)) {
        let mut s = GaussianState::new();
        let mut oracle = NoiseBasisModel::new();
        for (i, op) in ops.iter().enumerate() {
            let a = action(i, op);
            oracle.apply(&a).unwrap();
            s = apply(s, &a);
        }
        for (pick, z) in &picks {
            let obs = observable(&s);
            if obs.len() < 2 {
                break;
            }
            let o = pick.get(&obs).clone();
            let v = s.mean_of(&o).unwrap() + z * s.variance_of(&o).unwrap().sqrt();
            oracle.observe(&o, v).unwrap();
            s = s.condition(&o, v).unwrap();
        }
        let names = s.names().to_vec();
        let (mean, cov) = gaussi_oracle::oracle_moments(&oracle, &names).unwrap();
        let engine_cov: Vec<f64> = s.covariance_matrix().iter().copied().collect();
        prop_assert!(relative_deviation(s.mean_vector(), &mean) <= 1e-8);
        prop_assert!(relative_deviation(&engine_cov, &cov.concat()) <= 1e-8);
    }
}

#[test]
fn duplicate_and_negative_variance_are_rejected() {
    let s = GaussianState::new().extend_independent("X", 0.0, 1.0).unwrap();
    assert!(s.clone().extend_independent("X", 0.0, 1.0).is_err());
    assert!(s.clone().extend_independent("Y", 0.0, -1.0).is_err());
    assert!(s.clone().extend_sum("Y", "X", "Q").is_err());
    assert!(s.extend_shift_scale("Y", "X", ArithOp::Div, 0.0).is_err());
}

#[test]
fn point_mass_observations() {
    let s = GaussianState::new()
        .extend_independent("X", 2.0, 0.0)
        .unwrap()
        .extend_independent("Y", 0.0, 1.0)
        .unwrap();
    let c = s.clone().condition("X", 2.0).unwrap();
    assert_eq!(c.names(), ["Y"]);
    assert_eq!(c.variance_of("Y").unwrap(), 1.0);
    assert!(s.condition("X", 3.0).is_err());
}
