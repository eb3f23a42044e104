mod common;

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use common::*;
use reward_calculus::analysis::{
    check_conservative, check_finitely_conservative, check_optimality_preserving,
    is_action_independent, q_star, reachable_under, solve_potential, ConservativeOptions,
    OptimalityOptions, Witness,
};
use reward_calculus::fields::{inner_product_rewards, reward_combine, reward_norm};
use reward_calculus::graph::{
    count_trajectories, enumerate_deterministic_dynamics, enumerate_diamonds,
    enumerate_trajectories, topology_report, LassoTrajectory, Trajectory,
};
use reward_calculus::io::{parse, to_json, PotentialFile, RewardFile};
use reward_calculus::operators::{curl, grad, line_integral_finite, line_integral_lasso};
use reward_calculus::{decompose, Decomposer, Potential, Reward, Tolerance, TransitionGraph};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

/// A lasso obtained by walking until a state repeats.
fn random_lasso(rng: &mut impl Rng, g: &TransitionGraph) -> LassoTrajectory {
    let start = rng.gen_range(0..g.num_states());
    let mut seen = vec![None; g.num_states()];
    let mut steps = Vec::new();
    let mut state = start;
    seen[state] = Some(0);
    loop {
        let out = g.outgoing(state);
        let e = out[rng.gen_range(0..out.len())];
        steps.push(e);
        state = g.transition(e).dst;
        if let Some(at) = seen[state] {
            let prefix = Trajectory::new(g, start, steps[..at].to_vec()).unwrap();
            let cycle = Trajectory::new(g, state, steps[at..].to_vec()).unwrap();
            return LassoTrajectory::new(g, prefix, cycle).unwrap();
        }
        seen[state] = Some(steps.len());
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn diamond_legs_share_endpoints(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, 5, 2, 0.9);
        for d in enumerate_diamonds(&g, 1_000_000).unwrap() {
            let a = d.first_trajectory(&g);
            let b = d.second_trajectory(&g);
            prop_assert_eq!(a.len(), 2);
            prop_assert_eq!(b.len(), 2);
            prop_assert!(a.check(&g).is_ok() && b.check(&g).is_ok());
            prop_assert_eq!(a.start(), b.start());
            prop_assert_eq!(a.end(&g), b.end(&g));
        }
    }

    #[test]
    fn trajectory_counts_match_matrix_powers(seed in any::<u64>(), len in 0usize..=5) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, 5, 3, 0.9);
        let n = g.num_states();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for t in g.transitions() {
            m[(t.src, t.dst)] += 1.0;
        }
        let mut power = DMatrix::<f64>::identity(n, n);
        for _ in 0..len {
            power = &power * &m;
        }
        for s in 0..n {
            let expected: f64 = power.row(s).sum();
            let listed = enumerate_trajectories(&g, s, len, 1_000_000).unwrap();
            prop_assert_eq!(listed.len() as f64, expected);
            prop_assert_eq!(count_trajectories(&g, s, len) as f64, expected);
            prop_assert!(listed.iter().all(|t| t.len() == len && t.check(&g).is_ok()));
        }
    }

    #[test]
    fn completeness_is_transition_count(seed in any::<u64>(), dense in any::<bool>()) {
        let mut rng = rng(seed);
        let g = random_graph_with_density(&mut rng, 4, 3, 0.9, if dense { 1.0 } else { 0.6 });
        let full = g.num_transitions() == g.num_states() * g.num_actions() * g.num_states();
        let report = topology_report(&g);
        prop_assert_eq!(report.is_complete, full);
        if report.is_complete && g.num_actions() >= 2 && g.num_states() >= 2 {
            prop_assert!(report.has_distinguishing_actions);
        }
    }

    #[test]
    fn enumerated_dynamics_are_compatible(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, 4, 2, 0.9);
        let mut count = 0u128;
        let mut enumeration = enumerate_deterministic_dynamics(&g, 10_000);
        let total = enumeration.total();
        for d in enumeration.by_ref() {
            prop_assert!(d.is_compatible(&g));
            count += 1;
        }
        prop_assert_eq!(count, total.min(10_000));
    }

    #[test]
    fn reward_inner_product_is_an_inner_product(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, 6, 2, 0.9);
        let x = random_reward(&mut rng, &g, 10.0);
        let y = random_reward(&mut rng, &g, 10.0);
        let z = random_reward(&mut rng, &g, 10.0);
        let xy = inner_product_rewards(&g, &x, &y).unwrap();
        prop_assert!((xy - inner_product_rewards(&g, &y, &x).unwrap()).abs() <= 1e-12 * (1.0 + xy.abs()));
        let lhs = inner_product_rewards(&g, &reward_combine(a, &x, b, &y).unwrap(), &z).unwrap();
        let rhs = a * inner_product_rewards(&g, &x, &z).unwrap() + b * inner_product_rewards(&g, &y, &z).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        prop_assert!(inner_product_rewards(&g, &x, &x).unwrap() > 0.0);
        prop_assert_eq!(reward_norm(&g, &Reward::zeros(&g)).unwrap(), 0.0);
    }

    #[test]
    fn parallelogram_identity(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, 6, 2, 0.9);
        let x = random_reward(&mut rng, &g, 10.0);
        let y = random_reward(&mut rng, &g, 10.0);
        let sq = |r: &Reward| reward_norm(&g, r).unwrap().powi(2);
        let lhs = sq(&reward_combine(1.0, &x, 1.0, &y).unwrap()) + sq(&reward_combine(1.0, &x, -1.0, &y).unwrap());
        let rhs = 2.0 * sq(&x) + 2.0 * sq(&y);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
    }

    #[test]
    fn fields_round_trip_bit_exact(
        seed in any::<u64>(),
        values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 64),
    ) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, 6, 2, 0.9);
        let r = Reward::from_values(&g, values[..g.num_transitions().min(64)].to_vec());
        prop_assume!(r.is_ok());
        let r = r.unwrap();
        let text = to_json(&RewardFile::from_reward(&g, &r));
        let back = parse::<RewardFile>(&text, "reward").unwrap().to_reward(&g).unwrap();
        for (x, y) in r.values().iter().zip(back.values()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        let p = Potential::from_values(&g, values[..g.num_states()].to_vec()).unwrap();
        let text = to_json(&PotentialFile::from_potential(&g, &p));
        let back = parse::<PotentialFile>(&text, "potential").unwrap().to_potential(&g).unwrap();
        for (x, y) in p.values().iter().zip(back.values()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn lasso_integral_of_gradient_is_minus_start_potential(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let gamma = [0.0, 0.3, 0.9][rng.gen_range(0..3)];
        let g = random_graph(&mut rng, 8, 3, gamma);
        let p = random_potential(&mut rng, &g, 5.0);
        let lasso = random_lasso(&mut rng, &g);
        let v = line_integral_lasso(&g, &grad(&g, &p).unwrap(), &lasso).unwrap();
        prop_assert!((v + p.get(lasso.start())).abs() <= 1e-9);
    }

    #[test]
    fn lasso_integral_is_limit_of_truncations(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let gamma = [0.3, 0.5, 0.9][rng.gen_range(0..3)];
        let g = random_graph(&mut rng, 8, 3, gamma);
        let r = random_reward(&mut rng, &g, 5.0);
        let lasso = random_lasso(&mut rng, &g);
        let n = 64;
        let mut steps = lasso.prefix().steps().to_vec();
        while steps.len() < n {
            steps.extend_from_slice(lasso.cycle().steps());
        }
        steps.truncate(n);
        let truncated = line_integral_finite(&g, &r, &Trajectory::new(&g, lasso.start(), steps).unwrap()).unwrap();
        let full = line_integral_lasso(&g, &r, &lasso).unwrap();
        let bound = r.max_abs() * gamma.powi(n as i32) / (1.0 - gamma);
        prop_assert!((full - truncated).abs() <= bound + 1e-12);
    }

    #[test]
    fn shaping_shifts_integrals_by_boundary_terms(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let gamma = [0.0, 0.3, 0.9, 1.0][rng.gen_range(0..4)];
        let g = random_graph(&mut rng, 8, 3, gamma);
        let r = random_reward(&mut rng, &g, 5.0);
        let p = random_potential(&mut rng, &g, 5.0);
        let t = random_trajectory(&mut rng, &g, 10);
        let shaped = reward_combine(1.0, &r, 1.0, &grad(&g, &p).unwrap()).unwrap();
        let lhs = line_integral_finite(&g, &shaped, &t).unwrap();
        let rhs = line_integral_finite(&g, &r, &t).unwrap() + gamma.powi(t.len() as i32) * p.get(t.end(&g)) - p.get(t.start());
        prop_assert!((lhs - rhs).abs() <= 1e-9);
    }

    #[test]
    fn curl_is_antisymmetric_and_kills_gradients(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let gamma = [0.0, 0.3, 0.9, 1.0][rng.gen_range(0..4)];
        let g = random_graph(&mut rng, 6, 2, gamma);
        let r = random_reward(&mut rng, &g, 5.0);
        let field = curl(&g, &r, 1_000_000).unwrap();
        let by_pair: HashMap<_, _> = field.iter().map(|(d, v)| ((d.first, d.second), v)).collect();
        for (d, v) in field.iter() {
            let s = d.swapped();
            prop_assert_eq!(by_pair[&(s.first, s.second)], -v);
        }
        let p = random_potential(&mut rng, &g, 5.0);
        prop_assert!(curl(&g, &grad(&g, &p).unwrap(), 1_000_000).unwrap().max_abs() <= 1e-9);
    }

    #[test]
    fn decomposition_is_unique_under_shaping(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let gamma = [0.3, 0.9, 1.0][rng.gen_range(0..3)];
        let g = random_graph(&mut rng, 8, 3, gamma);
        let r = random_reward(&mut rng, &g, 5.0);
        let p = random_potential(&mut rng, &g, 5.0);
        let shaped = reward_combine(1.0, &r, 1.0, &grad(&g, &p).unwrap()).unwrap();
        let a = decompose(&g, &r).unwrap();
        let b = decompose(&g, &shaped).unwrap();
        for (x, y) in a.divergence_free.values().iter().zip(b.divergence_free.values()) {
            prop_assert!((x - y).abs() <= 1e-8);
        }
        let q = random_potential(&mut rng, &g, 5.0);
        let ip = inner_product_rewards(&g, &a.divergence_free, &grad(&g, &q).unwrap()).unwrap();
        prop_assert!(ip.abs() <= 1e-9);
    }

    #[test]
    fn potential_matches_inverse_laplacian_oracle(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let gamma = [0.3, 0.9][rng.gen_range(0..2)];
        let g = looped_graph(&mut rng, 8, 3, gamma);
        let r = random_reward(&mut rng, &g, 5.0);
        let (m, n) = (g.num_transitions(), g.num_states());
        // laplacian = -Lambda^-1 G^T W G and div = -Lambda^-1 G^T W, so the weights cancel
        let mut gm = DMatrix::<f64>::zeros(m, n);
        for (i, t) in g.transitions().iter().enumerate() {
            gm[(i, t.dst)] += gamma;
            gm[(i, t.src)] -= 1.0;
        }
        let w = DMatrix::from_diagonal(&DVector::from_iterator(m, g.transitions().iter().map(|t| t.weight)));
        let lhs = gm.transpose() * &w * &gm;
        let rhs = gm.transpose() * &w * DVector::from_column_slice(r.values());
        let phi = lhs.lu().solve(&rhs).unwrap();
        let d = Decomposer::new(&g).unwrap();
        prop_assert!(d.laplacian().invertible);
        let got = d.decompose(&r).unwrap();
        for (x, y) in got.potential.values().iter().zip(phi.iter()) {
            prop_assert!((x - y).abs() <= 1e-8 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn finite_check_matches_enumeration(seed in any::<u64>(), gradient in any::<bool>()) {
        let mut rng = rng(seed);
        let gamma = [0.0, 0.3, 0.9, 1.0][rng.gen_range(0..4)];
        let g = random_graph(&mut rng, 4, 2, gamma);
        let r = if gradient {
            grad(&g, &random_potential(&mut rng, &g, 5.0)).unwrap()
        } else {
            random_reward(&mut rng, &g, 5.0)
        };
        let tol = Tolerance::default();
        let oracle = brute_force_finitely_conservative(&g, &r, 5, tol, 1_000_000).unwrap();
        let check = check_finitely_conservative(&g, &r, 5, tol).unwrap();
        prop_assert_eq!(check.holds, oracle);
        if let Some(w) = check.witness {
            prop_assert_eq!(w.first.start(), w.second.start());
            prop_assert_eq!(w.first.end(&g), w.second.end(&g));
            prop_assert_eq!(w.first.len(), w.second.len());
            prop_assert!(!tol.close(line_integral_finite(&g, &r, &w.first).unwrap(), line_integral_finite(&g, &r, &w.second).unwrap()));
        }
    }

    #[test]
    fn witnesses_agree_with_residual(seed in any::<u64>(), gradient in any::<bool>()) {
        let mut rng = rng(seed);
        let gamma = [0.3, 0.9][rng.gen_range(0..2)];
        let g = random_graph(&mut rng, 5, 2, gamma);
        let r = if gradient {
            grad(&g, &random_potential(&mut rng, &g, 5.0)).unwrap()
        } else {
            random_reward(&mut rng, &g, 5.0)
        };
        let tol = Tolerance::default();
        let fit = solve_potential(&g, &r, tol).unwrap();
        let verdict = check_conservative(&g, &r, ConservativeOptions::default()).unwrap();
        if let Some(Witness::Lasso(w)) = &verdict.witness {
            prop_assert!(!fit.exact);
            prop_assert!(!tol.close(w.first_integral, w.second_integral));
            prop_assert!(tol.close(line_integral_lasso(&g, &r, &w.first).unwrap(), w.first_integral));
        }
        if fit.exact {
            prop_assert!(check_finitely_conservative(&g, &r, 6, tol).unwrap().holds);
        }
    }

    #[test]
    fn action_dependent_rewards_have_counterexamples(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let g = distinguishing_graph(&mut rng, 4, 0.9);
        let p = random_potential(&mut rng, &g, 5.0);
        let mut values = grad(&g, &p).unwrap().values().to_vec();
        // perturb one of two transitions sharing endpoints under different actions
        let pair = (0..g.num_transitions()).find_map(|i| {
            let t = g.transition(i);
            g.transitions().iter().position(|u| u.src == t.src && u.dst == t.dst && u.action != t.action).map(|_| i)
        });
        prop_assume!(pair.is_some());
        values[pair.unwrap()] += rng.gen_range(0.5..2.0);
        let f = Reward::from_values(&g, values).unwrap();
        prop_assert!(!is_action_independent(&g, &f, Tolerance::default()).unwrap().independent);
        let v = check_optimality_preserving(&g, &f, OptimalityOptions::default()).unwrap();
        prop_assert!(v.counterexample.is_some());
    }

    #[test]
    fn shaping_preserves_greedy_actions(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let g = random_graph(&mut rng, 4, 3, 0.9);
        let r = random_reward(&mut rng, &g, 5.0);
        let p = random_potential(&mut rng, &g, 5.0);
        let shaped = reward_combine(1.0, &r, 1.0, &grad(&g, &p).unwrap()).unwrap();
        for d in enumerate_deterministic_dynamics(&g, 64) {
            let q = q_star(&g, &d, &r).unwrap();
            let qs = q_star(&g, &d, &shaped).unwrap();
            let reachable = reachable_under(&g, &d);
            for s in (0..g.num_states()).filter(|&s| reachable[s]) {
                prop_assert_eq!(q.optimal_actions(s, 1e-8), qs.optimal_actions(s, 1e-8));
            }
        }
    }

    #[test]
    fn parallel_search_matches_sequential(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let g = random_graph_with_density(&mut rng, 4, 2, 0.9, 0.5);
        let f = if rng.gen_bool(0.5) {
            grad(&g, &random_potential(&mut rng, &g, 5.0)).unwrap()
        } else {
            random_reward(&mut rng, &g, 1.0)
        };
        let one = check_optimality_preserving(&g, &f, OptimalityOptions { threads: 1, ..Default::default() }).unwrap();
        let four = check_optimality_preserving(&g, &f, OptimalityOptions { threads: 4, ..Default::default() }).unwrap();
        prop_assert_eq!(one.verdict, four.verdict);
        prop_assert_eq!(one.counterexample.map(|c| c.index), four.counterexample.map(|c| c.index));
    }
}
