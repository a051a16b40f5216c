//! Evaluation metrics: the sub-optimality bound, the margin lower bound and
//! regret non-negativity.

mod common;

use cilp_core::feasibility::make_projector;
use cilp_core::metrics::{delta_lower_bound, estimate_loss, suboptimality};
use cilp_core::numerics::{dot, norm};
use cilp_core::Problem;
use common::*;
use rand::Rng;

#[test]
fn suboptimality_is_bounded_by_root_h() {
    let mut rng = rng(80);
    let mut checked = 0;
    while checked < 100 {
        let inst = random_bounded_lp(&mut rng, 2, 6);
        let problem = Problem::Lp(inst.clone());
        let x_star = problem.decide(&gaussian_vec(&mut rng, 6)).unwrap();
        let chi = [0.1, 1.0, 10.0][checked % 3];
        let Ok(delta) = delta_lower_bound(&inst, &x_star, chi) else {
            continue;
        };
        let proj = make_projector(&inst, &x_star, chi).unwrap();
        let c_theta = gaussian_vec(&mut rng, 6);
        let gamma = suboptimality(&problem, &proj, &c_theta).unwrap();
        let h = 0.5 * proj.project(&c_theta).unwrap().distance_sq;
        assert!(gamma <= (2.0 * 6.0 * h).sqrt() / delta + 1e-6);
        checked += 1;
    }
}

#[test]
fn delta_bounds_the_smallest_member_norm() {
    let mut rng = rng(81);
    let mut checked = 0;
    while checked < 100 {
        let inst = random_bounded_lp(&mut rng, 3, 7);
        let x_star = inst.decide(&gaussian_vec(&mut rng, 7)).unwrap();
        let chi: f64 = rng.random_range(0.1..5.0);
        let Ok(delta) = delta_lower_bound(&inst, &x_star, chi) else {
            continue;
        };
        let proj = make_projector(&inst, &x_star, chi).unwrap();
        let smallest = proj.project(&[0.0; 7]).unwrap().point;
        assert!(norm(&smallest) >= delta - 1e-7, "{} < {delta}", norm(&smallest));
        checked += 1;
    }
}

#[test]
fn suboptimality_uses_the_unit_normalized_projection() {
    let mut rng = rng(82);
    for _ in 0..30 {
        let inst = random_bounded_lp(&mut rng, 2, 5);
        let problem = Problem::Lp(inst.clone());
        let x_star = problem.decide(&gaussian_vec(&mut rng, 5)).unwrap();
        let proj = make_projector(&inst, &x_star, 1.0).unwrap();
        let c: Vec<f64> = gaussian_vec(&mut rng, 5);
        for alpha in [0.1, 1.0, 10.0] {
            let scaled: Vec<f64> = c.iter().map(|v| alpha * v).collect();
            let p = proj.project(&scaled).unwrap().point;
            let x_hat = problem.decide(&scaled).unwrap();
            let gap: Vec<f64> = x_hat.iter().zip(&x_star).map(|(a, b)| a - b).collect();
            let want = dot(&p, &gap) / norm(&p);
            assert_eq!(suboptimality(&problem, &proj, &scaled).unwrap(), want);
        }
    }
}

#[test]
fn regret_is_never_negative() {
    for seed in 0..10 {
        let mut rng = rng(83 + seed);
        let set = random_linear_set(&mut rng, 20, 3, 2, 6, 1.0);
        let model = random_model(&mut rng, 3, 6, 2.0);
        let loss = estimate_loss(&set, &model).unwrap();
        assert!(loss >= -1e-7 * set.len() as f64);
        let c_stars = set.c_stars().unwrap();
        for (i, c) in c_stars.iter().enumerate() {
            let x_hat = set
                .problem()
                .decide(model.predict(set.z().row(i)).unwrap().as_slice())
                .unwrap();
            assert!(dot(c, &x_hat) >= dot(c, &set.x_stars()[i]) - 1e-7);
        }
    }
}
