use riloss_core::bounds::{convergence_study, ConvergenceConfig, Dependence};

#[test]
fn independent_deviation_decays() {
    let cfg = ConvergenceConfig::default();
    let t = std::time::Instant::now();
    let study = convergence_study(&cfg).unwrap();
    for r in &study.rows {
        println!("{r:?}");
    }
    println!(
        "ref {} slope {} in {:?}",
        study.reference,
        study.loglog_slope,
        t.elapsed()
    );
    for w in study.rows.windows(2) {
        assert!(w[1].mean_abs_dev < w[0].mean_abs_dev);
    }
    assert!(
        (-1.1..=-0.35).contains(&study.loglog_slope),
        "slope {}",
        study.loglog_slope
    );
}

#[test]
fn dependent_laws_also_converge() {
    for dep in [Dependence::Linear, Dependence::Quadratic] {
        let cfg = ConvergenceConfig {
            dependence: dep,
            seed: 3,
            ..Default::default()
        };
        let study = convergence_study(&cfg).unwrap();
        println!("{dep:?} ref {} slope {}", study.reference, study.loglog_slope);
        for r in &study.rows {
            println!("  {} {:.3e} {:.3e}", r.n, r.mean_abs_dev, r.bound_total);
        }
        assert!(study.rows.last().unwrap().mean_abs_dev < study.rows[0].mean_abs_dev);
    }
}
