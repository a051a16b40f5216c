//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line each.
//!
//! Numeric arguments select a subset of criteria. With `--strict` the process
//! exits non-zero when any selected criterion fails; without it the verdicts
//! are reported only in the output, so a workspace test run continues past
//! this target.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use cilp_core::data::{generate, generate_splits, GeneratorConfig};
use cilp_core::feasibility::make_projector;
use cilp_core::lp::{basis_reduced_costs, solve_lp};
use cilp_core::metrics::{delta_lower_bound, pl_constant, suboptimality};
use cilp_core::numerics::{dot, Mat};
use cilp_core::qp::{solve_qp, QpConfig, QpProblem};
use cilp_core::training::{
    grad_h, loss_h, run_pocs, run_trainer, step_precond_gd, Armijo, Method, StepRule, TrainConfig,
};
use cilp_core::{LinearModel, LpInstance, PreparedSet, Problem, Split};
use common::*;
use rand::Rng;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("1 POCS / preconditioned GD equivalence", c1_pocs_equivalence),
        ("2 linear convergence on feasible intersection", c2_linear_convergence),
        ("3 gradient vs finite differences", c3_gradient),
        ("4 convexity / 1-smoothness / PL", c4_convexity_smoothness_pl),
        ("5 sub-optimality bound", c5_subopt_bound),
        ("6 margin / reduced-cost equivalence", c6_margin_equivalence),
        ("7 margin robustness", c7_margin_robustness),
        ("8 shortest-path experiment shape", c8_sp_experiment),
        ("9 portfolio training", c9_portfolio),
        ("10 solver oracles", c10_solver_oracles),
    ];
    let strict = std::env::args().any(|a| a == "--strict");
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failures = 0;
    let mut ran = 0;
    for (k, (name, run)) in criteria.into_iter().enumerate() {
        if !only.is_empty() && !only.contains(&(k + 1)) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok((true, detail)) => println!("PASS  criterion {name} ({secs:.1}s): {detail}"),
            Ok((false, detail)) => {
                failures += 1;
                println!("FAIL  criterion {name} ({secs:.1}s): {detail}");
            }
            Err(e) => {
                failures += 1;
                println!("FAIL  criterion {name} ({secs:.1}s): error: {e}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", ran - failures);
    if failures == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn c1_pocs_equivalence() -> Outcome {
    let started = Instant::now();
    let mut worst = 0.0_f64;
    for seed in 0..5 {
        let mut rng = rng(100 + seed);
        let set = random_linear_set(&mut rng, 20, 6, 4, 10, 1.0);
        let m0 = LinearModel::zeros(6, 10);
        let pocs = run_pocs(&set, &m0, 10).map_err(err)?;
        let mut pgd = m0.clone();
        for _ in 0..10 {
            pgd = step_precond_gd(&pgd, &set, 1.0).map_err(err)?;
        }
        worst = worst.max(pocs.model.theta.max_abs_diff(&pgd.theta));
    }
    let secs = started.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-8 && secs < 10.0,
        format!("max |dtheta| = {worst:.2e}, {secs:.2}s"),
    ))
}

fn c2_linear_convergence() -> Outcome {
    let cfg = GeneratorConfig {
        degree: 1,
        noise: 0.0,
        ..GeneratorConfig::sp_synth(2)
    };
    let ds = generate(&cfg, 100).map_err(err)?;
    let set = PreparedSet::new(&ds, 1.0).map_err(err)?;
    let run = run_pocs(&set, &LinearModel::zeros(set.features(), set.dim()), 50).map_err(err)?;
    let reached = run.h.iter().position(|&h| h <= 1e-8);
    let floor = 1e-24;
    let above: Vec<f64> = run.h.iter().copied().take_while(|&h| h > floor).collect();
    let ratios: Vec<f64> = above.windows(2).map(|w| w[1] / w[0]).collect();
    let window = &ratios[ratios.len().saturating_sub(20)..];
    let mean = window.iter().sum::<f64>() / window.len().max(1) as f64;
    let var = window.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / window.len().max(1) as f64;
    let cv = var.sqrt() / mean;
    let linear = window.len() == 20 && mean < 1.0 && cv <= 0.2;
    Ok((
        reached.is_some() && linear,
        format!(
            "h <= 1e-8 at iteration {:?}, h_50 = {:.2e}, last-20 ratio mean {mean:.3}, rel. std {cv:.3} over {} ratios",
            reached,
            run.h.last().copied().unwrap_or(f64::NAN),
            window.len()
        ),
    ))
}

fn c3_gradient() -> Outcome {
    let mut worst = 0.0_f64;
    let step = 1e-5;
    for trial in 0..20 {
        let mut rng = rng(300 + trial);
        let set = random_linear_set(&mut rng, 5, 3, 2, 5, 1.0);
        let model = random_model(&mut rng, 3, 5, 1.0);
        let eval = loss_h(&model, &set).map_err(err)?;
        let g = grad_h(&model, &set, &eval.projections).map_err(err)?;
        let mut fd = Mat::zeros(3, 5);
        for a in 0..3 {
            for b in 0..5 {
                let mut plus = model.clone();
                plus.theta[(a, b)] += step;
                let mut minus = model.clone();
                minus.theta[(a, b)] -= step;
                let hp = loss_h(&plus, &set).map_err(err)?.value;
                let hm = loss_h(&minus, &set).map_err(err)?.value;
                fd[(a, b)] = (hp - hm) / (2.0 * step);
            }
        }
        let rel = g.sub(&fd).map_err(err)?.frobenius_norm() / g.frobenius_norm().max(1e-12);
        worst = worst.max(rel);
    }
    Ok((worst <= 1e-4, format!("max relative error {worst:.2e} over 20 pairs")))
}

fn c4_convexity_smoothness_pl() -> Outcome {
    let mut rng = rng(400);
    let set = random_linear_set(&mut rng, 30, 4, 3, 6, 1.0);
    let (d, m) = (4, 6);
    let h = |t: &LinearModel| loss_h(t, &set).map(|e| e.value);
    let grad = |t: &LinearModel| -> cilp_core::Result<Mat> {
        let e = loss_h(t, &set)?;
        grad_h(t, &set, &e.projections)
    };

    let mut convex_gap = f64::NEG_INFINITY;
    let mut smooth_gap = f64::NEG_INFINITY;
    for _ in 0..100 {
        let t1 = random_model(&mut rng, d, m, 3.0);
        let t2 = random_model(&mut rng, d, m, 3.0);
        let s: f64 = rng.random_range(0.01..0.99);
        let mix = LinearModel::new(t1.theta.scaled(s).add(&t2.theta.scaled(1.0 - s)).map_err(err)?).map_err(err)?;
        let lhs = h(&mix).map_err(err)?;
        let rhs = s * h(&t1).map_err(err)? + (1.0 - s) * h(&t2).map_err(err)?;
        convex_gap = convex_gap.max(lhs - rhs);
        let dg = grad(&t1)
            .map_err(err)?
            .sub(&grad(&t2).map_err(err)?)
            .map_err(err)?
            .frobenius_norm();
        let dt = t1.theta.sub(&t2.theta).map_err(err)?.frobenius_norm();
        smooth_gap = smooth_gap.max(dg - dt);
    }

    let mu = pl_constant(set.z()).map_err(err)?;
    let mut best = LinearModel::zeros(d, m);
    for _ in 0..2000 {
        best = step_precond_gd(&best, &set, 1.0).map_err(err)?;
    }
    let h_star = h(&best).map_err(err)?.max(0.0);
    let mut pl_gap = f64::NEG_INFINITY;
    for _ in 0..100 {
        let t = random_model(&mut rng, d, m, 3.0);
        let g = grad(&t).map_err(err)?.frobenius_norm();
        pl_gap = pl_gap.max(2.0 * mu * (h(&t).map_err(err)? - h_star) - g * g);
    }
    let ok = convex_gap <= 1e-7 && smooth_gap <= 1e-7 && pl_gap <= 1e-7;
    Ok((
        ok,
        format!(
            "worst convexity gap {convex_gap:.2e}, smoothness gap {smooth_gap:.2e}, PL gap {pl_gap:.2e} (mu {mu:.3e}, h* {h_star:.3e})"
        ),
    ))
}

fn c5_subopt_bound() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut checks = 0;
    for (k, chi) in [0.1, 1.0, 10.0].into_iter().enumerate() {
        let mut rng = rng(500 + k as u64);
        let mut done = 0;
        while done < 100 {
            let inst = random_bounded_lp(&mut rng, 3, 7);
            let c_true = gaussian_vec(&mut rng, 7);
            let problem = Problem::Lp(inst.clone());
            let x_star = problem.decide(&c_true).map_err(err)?;
            let Ok(delta) = delta_lower_bound(&inst, &x_star, chi) else {
                continue;
            };
            let proj = make_projector(&inst, &x_star, chi).map_err(err)?;
            let scale: f64 = rng.random_range(0.1..10.0);
            let c_theta: Vec<f64> = gaussian_vec(&mut rng, 7).iter().map(|v| v * scale).collect();
            let gamma = suboptimality(&problem, &proj, &c_theta).map_err(err)?;
            let h_i = 0.5 * proj.project(&c_theta).map_err(err)?.distance_sq;
            let bound = (2.0 * inst.m() as f64 * h_i).sqrt() / delta;
            worst = worst.max(gamma - bound);
            done += 1;
            checks += 1;
        }
    }
    Ok((
        worst <= 1e-6,
        format!("{checks} checks, max Gamma - bound = {worst:.3e}"),
    ))
}

fn c6_margin_equivalence() -> Outcome {
    let mut rng = rng(600);
    let (n, m) = (3, 6);
    let mut agree = 0;
    let mut members = 0;
    let mut trials = 0;
    let mut mismatches = Vec::new();
    while trials < 50 {
        let a = gaussian_mat(&mut rng, n, m);
        let basis: Vec<usize> = {
            let mut idx: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                idx.swap(i, rng.random_range(0..=i));
            }
            let mut b = idx[..n].to_vec();
            b.sort_unstable();
            b
        };
        let xb: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let mut x_star = vec![0.0; m];
        for (k, &j) in basis.iter().enumerate() {
            x_star[j] = xb[k];
        }
        let b = a.matvec(&x_star).map_err(err)?;
        let Ok(inst) = LpInstance::new(a.clone(), b) else {
            continue;
        };
        let chi: f64 = rng.random_range(0.1..2.0);
        // costs with reduced costs straddling chi
        let nu = gaussian_vec(&mut rng, n);
        let mut c = a.tr_matvec(&nu).map_err(err)?;
        for j in 0..m {
            if !basis.contains(&j) {
                c[j] += chi + rng.random_range(-1.0..1.0);
            }
        }
        let Ok((_, reduced)) = basis_reduced_costs(&a, &basis, &c) else {
            continue;
        };
        let min_r = (0..m)
            .filter(|j| !basis.contains(j))
            .map(|j| reduced[j])
            .fold(f64::INFINITY, f64::min);
        if (min_r - chi).abs() < 1e-5 {
            continue;
        }
        trials += 1;
        let proj = make_projector(&inst, &x_star, chi).map_err(err)?;
        let p = proj.project(&c).map_err(err)?;
        let in_set = p.distance_sq.sqrt() <= 1e-7;
        let by_reduced = min_r >= chi - 1e-7;
        if in_set {
            members += 1;
            let sol = solve_lp(&inst, &c).map_err(err)?;
            if sol.basis != basis {
                mismatches.push(format!("trial {trials}: simplex basis differs"));
                continue;
            }
        }
        if in_set == by_reduced {
            agree += 1;
        } else {
            mismatches.push(format!(
                "trial {trials}: distance {:.2e}, min reduced cost - chi {:.2e}",
                p.distance_sq.sqrt(),
                min_r - chi
            ));
        }
    }
    Ok((
        agree == 50 && mismatches.is_empty(),
        format!(
            "{agree}/50 agree ({members} members){}",
            if mismatches.is_empty() {
                String::new()
            } else {
                format!("; {}", mismatches.join("; "))
            }
        ),
    ))
}

fn sp_splits(seed: u64) -> Result<Vec<cilp_core::Dataset>, String> {
    generate_splits(&GeneratorConfig::sp_synth(seed), &[100, 100, 100]).map_err(err)
}

fn armijo_gd(epochs: usize, margin: f64) -> TrainConfig {
    TrainConfig {
        method: Method::Gd,
        step: StepRule::Armijo(Armijo::default()),
        epochs,
        margin,
        seed: 0,
        shuffle: true,
    }
}

fn c7_margin_robustness() -> Outcome {
    let splits = sp_splits(7)?;
    let mut losses = Vec::new();
    for chi in [0.01, 0.1, 1.0, 10.0] {
        let train = PreparedSet::new(&splits[0], chi).map_err(err)?;
        let test = PreparedSet::new(&splits[2], chi).map_err(err)?;
        let cfg = armijo_gd(30, chi);
        let out = run_trainer(&train, &[(Split::Test, &test)], &cfg).map_err(err)?;
        losses.push((chi, out.log.rows.last().unwrap().record.decision_loss));
    }
    let best = losses.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
    let ok = losses.iter().filter(|l| l.0 >= 0.1).all(|l| l.1 <= 2.0 * best);
    let detail = losses
        .iter()
        .map(|(c, l)| format!("chi {c}: {l:.2}"))
        .collect::<Vec<_>>()
        .join(", ");
    Ok((ok, format!("test decision loss {detail}")))
}

fn c8_sp_experiment() -> Outcome {
    let started = Instant::now();
    let splits = sp_splits(8)?;
    let sets: Vec<PreparedSet> = splits
        .iter()
        .map(|s| PreparedSet::new(s, 1.0))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let out = run_trainer(
        &sets[0],
        &[
            (Split::Train, &sets[0]),
            (Split::Val, &sets[1]),
            (Split::Test, &sets[2]),
        ],
        &armijo_gd(TrainConfig::default().epochs, 1.0),
    )
    .map_err(err)?;
    let train_rows: Vec<_> = out.log.rows.iter().filter(|r| r.record.split == Split::Train).collect();
    let est: Vec<f64> = train_rows
        .iter()
        .map(|r| r.record.estimate_loss.unwrap_or(f64::NAN))
        .collect();
    let increases = est[2..].windows(2).filter(|w| w[1] > w[0]).count();
    let monotone = increases == 0;
    let dec0 = out.log.initial[0].decision_loss;
    let dec_final = train_rows.last().unwrap().record.decision_loss;
    let secs = started.elapsed().as_secs_f64();
    let ok = monotone && dec_final < 0.25 * dec0 && secs < 120.0;
    Ok((
        ok,
        format!(
            "estimate loss {:.1} -> {:.1} (epochs 3.., {increases} increases), decision loss {dec0:.1} -> {dec_final:.1} ({:.1}%), {secs:.1}s",
            est[2],
            est.last().unwrap(),
            100.0 * dec_final / dec0
        ),
    ))
}

fn c9_portfolio() -> Outcome {
    let ds = generate(&GeneratorConfig::portfolio(9), 200).map_err(err)?;
    let set = PreparedSet::new(&ds, 0.0).map_err(err)?;
    let cfg = TrainConfig {
        method: Method::Pocs,
        step: StepRule::Constant { eta: 1.0 },
        epochs: 50,
        margin: 0.0,
        seed: 0,
        shuffle: true,
    };
    let out = run_trainer(&set, &[(Split::Train, &set)], &cfg).map_err(err)?;
    let first = &out.log.initial[0];
    let last = &out.log.rows.last().unwrap().record;
    let ok = last.decision_loss <= 0.5 * first.decision_loss && last.h <= 0.5 * first.h;
    Ok((
        ok,
        format!(
            "decision loss {:.3} -> {:.3}, h {:.3e} -> {:.3e}",
            first.decision_loss, last.decision_loss, first.h, last.h
        ),
    ))
}

fn c10_solver_oracles() -> Outcome {
    let mut rng = rng(1000);
    let mut lp_worst = 0.0_f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(n + 1..=n + 3);
        let inst = random_bounded_lp(&mut rng, n, m);
        let c = gaussian_vec(&mut rng, m);
        let sol = solve_lp(&inst, &c).map_err(err)?.into_optimal().map_err(err)?;
        let best = brute_force_lp(inst.a(), inst.b(), &c).ok_or("no vertex found")?;
        lp_worst = lp_worst.max((sol.objective - best).abs() / best.abs().max(1.0));
    }

    let cfg = QpConfig::default();
    let mut box_worst = 0.0_f64;
    let mut half_worst = 0.0_f64;
    let mut simplex_worst = 0.0_f64;
    for _ in 0..100 {
        let k = rng.random_range(1..=6);
        let y = gaussian_vec(&mut rng, k);
        let lo: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..0.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.1..2.0)).collect();
        let q: Vec<f64> = y.iter().map(|v| -v).collect();
        let x = solve_qp(
            &QpProblem {
                p: Mat::identity(k),
                q: q.clone(),
                g: Mat::identity(k),
                l: lo.clone(),
                u: hi.clone(),
            },
            &cfg,
        )
        .map_err(err)?
        .into_solved()
        .map_err(err)?
        .x;
        let expected: Vec<f64> = (0..k).map(|j| y[j].clamp(lo[j], hi[j])).collect();
        box_worst = box_worst.max(max_abs_diff(&x, &expected));

        let a = gaussian_vec(&mut rng, k);
        let beta: f64 = rng.random_range(-1.0..1.0);
        let x = solve_qp(
            &QpProblem {
                p: Mat::identity(k),
                q: q.clone(),
                g: Mat::from_vec(1, k, a.clone()).map_err(err)?,
                l: vec![beta],
                u: vec![f64::INFINITY],
            },
            &cfg,
        )
        .map_err(err)?
        .into_solved()
        .map_err(err)?
        .x;
        let viol = (beta - dot(&a, &y)).max(0.0) / dot(&a, &a);
        let expected: Vec<f64> = y.iter().zip(&a).map(|(v, w)| v + viol * w).collect();
        half_worst = half_worst.max(max_abs_diff(&x, &expected));

        let mut g = Mat::zeros(k + 1, k);
        for j in 0..k {
            g[(0, j)] = 1.0;
            g[(j + 1, j)] = 1.0;
        }
        let mut l = vec![0.0; k + 1];
        let mut u = vec![f64::INFINITY; k + 1];
        l[0] = 1.0;
        u[0] = 1.0;
        let x = solve_qp(
            &QpProblem {
                p: Mat::identity(k),
                q,
                g,
                l,
                u,
            },
            &cfg,
        )
        .map_err(err)?
        .into_solved()
        .map_err(err)?
        .x;
        simplex_worst = simplex_worst.max(max_abs_diff(&x, &project_simplex(&y)));
    }
    let ok = lp_worst <= 1e-9 && box_worst <= 1e-6 && half_worst <= 1e-6 && simplex_worst <= 1e-6;
    Ok((
        ok,
        format!(
            "LP objective gap {lp_worst:.1e} (200 LPs); QP box {box_worst:.1e}, halfspace {half_worst:.1e}, simplex {simplex_worst:.1e} (100 each)"
        ),
    ))
}
