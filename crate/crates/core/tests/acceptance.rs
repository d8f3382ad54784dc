//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.

use std::time::Instant;

use hp_core::companion::{build_companion, FrequencyPoint};
use hp_core::harness::*;
use hp_core::model::{ModelProblem, SectorSample};
use hp_core::poisson::boundary_reproduction_error;
use hp_core::rbound::NonRboundConfig;
use hp_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn problems() -> [(&'static str, ModelProblem); 3] {
    [
        ("dirichlet", ModelProblem::dirichlet_laplacian(2)),
        ("neumann", ModelProblem::neumann_laplacian(2)),
        ("bilaplacian", ModelProblem::clamped_bilaplacian(2)),
    ]
}

fn line(id: u32, pass: bool, detail: String) -> bool {
    println!("criterion {id}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

fn closed_form_kernels() -> bool {
    let start = Instant::now();
    let dir = ModelProblem::dirichlet_laplacian(2);
    let neu = ModelProblem::neumann_laplacian(2);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let xi = [rng.gen_range(-50.0..50.0)];
        let lambda = C64::from_polar(10f64.powf(rng.gen_range(-2.0..4.0)), rng.gen_range(-3.0..3.0));
        let kappa = (lambda + xi[0] * xi[0]).sqrt();
        let x = rng.gen_range(0.0..20.0) / kappa.re;
        let fp = FrequencyPoint::new(&xi, lambda, 1).unwrap();
        let d = build_companion(&dir, &fp).unwrap().kernel_row(0).eval(x)[0];
        let n = build_companion(&neu, &fp).unwrap().kernel_row(0).eval(x)[0];
        let ed = (-kappa * x).exp();
        let en = -ed / kappa;
        worst = worst.max((d - ed).norm() / ed.norm()).max((n - en).norm() / en.norm());
    }
    let secs = start.elapsed().as_secs_f64();
    line(1, worst <= 1e-8 && secs < 10.0, format!("max relative error {worst:.2e} over 1000 triples in {secs:.2} s"))
}

fn boundary_reproduction() -> bool {
    let mut worst = 0.0f64;
    for (_, p) in problems() {
        let sample = SectorSample::log_spaced(p.phi(), 5, 1e-2, 1e4, 12).unwrap();
        for lambda in sample.points() {
            for xi in [0.0, 0.5, 3.0, 40.0] {
                worst = worst.max(boundary_reproduction_error(&p, &[xi], lambda).unwrap());
            }
        }
    }
    line(2, worst <= 1e-8, format!("max reproduction error {worst:.2e}"))
}

fn decay_exponents() -> bool {
    let start = Instant::now();
    let [(_, dir), (_, neu), (_, bil)] = problems();
    // (problem, j, k, p, r, t, s)
    let queries: Vec<(&ModelProblem, usize, usize, f64, f64, f64, f64)> = vec![
        (&dir, 0, 0, 2.0, 0.0, 0.0, 0.0),
        (&dir, 0, 1, 2.0, 0.0, 0.0, 1.0),
        (&dir, 0, 0, 2.0, 0.0, 0.3, 0.0),
        (&dir, 0, 0, 2.0, 0.5, 0.5, 0.2),
        (&dir, 0, 0, 1.5, 0.2, 0.0, 0.0),
        (&dir, 0, 0, 2.0, 0.0, 0.0, 1.0),
        (&neu, 0, 1, 2.0, 0.0, 0.0, 0.0),
        (&neu, 0, 0, 2.0, 0.0, 0.0, 0.0),
        (&neu, 0, 0, 2.0, 0.0, 0.5, 0.0),
        (&bil, 0, 0, 2.0, 0.0, 0.0, 0.0),
        (&bil, 1, 1, 2.0, 0.0, 0.0, 0.0),
        (&bil, 1, 0, 2.0, 0.0, 0.0, 0.0),
        (&bil, 0, 1, 2.0, 0.0, 0.0, 1.0),
        (&bil, 0, 0, 2.0, 0.0, 0.4, 0.0),
    ];
    let mut worst = 0.0f64;
    let mut all = true;
    for (p, j, k, pp, r, t, s) in queries.iter().cloned() {
        let cfg = DecaySweepConfig { j, k, p: pp, r, t, s, ..Default::default() };
        let out = run_decay_sweep(p, &cfg).unwrap();
        let dev = out.summary["max_deviation"].as_f64().unwrap();
        println!(
            "  j={j} k={k} p={pp} r={r} t={t} s={s}: theta {:.4}, deviation {dev:.4}",
            out.summary["theta"].as_f64().unwrap()
        );
        worst = worst.max(dev);
        all &= out.pass;
    }
    let secs = start.elapsed().as_secs_f64();
    line(
        3,
        all && secs < 300.0,
        format!("{} queries, max slope deviation {worst:.4} in {secs:.1} s", queries.len()),
    )
}

fn singularity() -> bool {
    let [(_, dir), (_, neu), _] = problems();
    let mut all = true;
    let mut detail = Vec::new();
    for (p, t, s) in [(&dir, 2.0, 0.5), (&dir, 1.0, 0.5), (&neu, 1.5, 0.0)] {
        let out = run_singularity_sweep(p, &SingularityConfig { t, s, ..Default::default() }).unwrap();
        all &= out.pass;
        detail.push(format!(
            "t={t} s={s}: {:.3} vs {:.3}",
            out.summary["slope"].as_f64().unwrap(),
            out.summary["predicted"].as_f64().unwrap()
        ));
    }
    line(4, all, detail.join("; "))
}

fn resolvent() -> bool {
    let mut all = true;
    let mut detail = Vec::new();
    for (name, p) in problems() {
        let out = run_resolvent_test(&p, &ResolventTestConfig::default()).unwrap();
        all &= out.pass;
        let errs = out.summary["oracle_errors"].as_array().unwrap();
        detail.push(format!(
            "{name}: error {:.1e}, order {:.2}, spread {:.2}, domain growth {:.2}",
            errs.last().unwrap().as_f64().unwrap(),
            out.summary["observed_order"].as_f64().unwrap(),
            out.summary["median_spread"].as_f64().unwrap(),
            out.summary["domain_norm_growth"].as_f64().unwrap()
        ));
    }
    line(5, all, detail.join("; "))
}

fn hardy() -> bool {
    let out = run_hardy_norm(&HardyConfig::default()).unwrap();
    let est = &out.summary["estimates"][0];
    line(
        6,
        out.pass,
        format!(
            "r=0 extrapolated {:.5} (reference {:.5}), monotone {}",
            est["extrapolated"].as_f64().unwrap(),
            est["reference"].as_f64().unwrap(),
            out.summary["monotone_in_r"]
        ),
    )
}

fn norm_equivalence() -> bool {
    let out = run_norm_check(&NormCheckConfig::default()).unwrap();
    line(
        7,
        out.pass,
        format!("equivalence {} lifting {}", out.summary["equivalence_interval"], out.summary["lifting_interval"]),
    )
}

fn rbound() -> bool {
    let a = run_rbound_sim(&NonRboundConfig::new(1.2)).unwrap();
    let b = run_rbound_sim(&NonRboundConfig::new(2.0)).unwrap();
    line(
        8,
        a.pass && b.pass,
        format!(
            "p=1.2 growth {:.3}, p=2 spread {:.3}, max relative stderr {:.1e}",
            a.summary["growth"].as_f64().unwrap(),
            b.summary["spread"].as_f64().unwrap(),
            a.summary["max_relative_stderr"].as_f64().unwrap().max(b.summary["max_relative_stderr"].as_f64().unwrap())
        ),
    )
}

fn parabolic() -> bool {
    let mut all = true;
    let mut detail = Vec::new();
    for (name, p) in problems() {
        let out = run_parabolic_solve(&p, &ParabolicConfig::default()).unwrap();
        all &= out.pass;
        detail.push(format!("{name} closed form {:.1e}", out.summary["closed_form_error"].as_f64().unwrap()));
    }
    for (name, p) in problems().into_iter().take(2) {
        let out = run_ibvp_solve(&p, &IbvpConfig::default()).unwrap();
        all &= out.pass;
        detail.push(format!(
            "{name} images {:.1e} splitting {:.1e}",
            out.summary["images_error"].as_f64().unwrap(),
            out.summary["splitting_error"].as_f64().unwrap()
        ));
    }
    line(9, all, detail.join("; "))
}

fn main() {
    let results = [
        closed_form_kernels(),
        boundary_reproduction(),
        decay_exponents(),
        singularity(),
        resolvent(),
        hardy(),
        norm_equivalence(),
        rbound(),
        parabolic(),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, p)| !**p).map(|(i, _)| i + 1).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
