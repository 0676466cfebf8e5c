use zoprox::linalg::{dot, norm2};
use zoprox::phase_retrieval::{generate_instance, PhaseRetrievalInstance};
use zoprox::smoothing::sample_standard_normal;
use zoprox::{CompositeProblem, RngStream};

fn instance(seed: u64) -> PhaseRetrievalInstance {
    generate_instance(5, 15, &mut RngStream::from_seed(seed)).unwrap()
}

#[test]
fn subgradient_matches_directional_derivatives() {
    let inst = instance(1);
    let mut rng = RngStream::from_seed(2);
    let mut checked = 0;
    while checked < 1000 {
        let x = sample_standard_normal(&mut rng, inst.d());
        let v = sample_standard_normal(&mut rng, inst.d());
        let i = rng.index(inst.m());
        let q = dot(&inst.measurements[i], &x).powi(2) - inst.targets[i];
        if q.abs() < 1e-3 {
            continue;
        }
        let g = inst.subgradient(&x, i, 0.01).unwrap();
        let h = 1e-6;
        let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let fd = (inst.sample_f(&xp, i).unwrap() - inst.sample_f(&xm, i).unwrap()) / (2.0 * h);
        let exact = dot(&g, &v);
        assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "{fd} {exact}");
        checked += 1;
    }
}

#[test]
fn objective_vanishes_only_at_the_signal() {
    let inst = generate_instance(4, 12, &mut RngStream::from_seed(3)).unwrap();
    let neg: Vec<f64> = inst.signal.iter().map(|v| -v).collect();
    assert!(inst.objective(&inst.signal) < 1e-14);
    assert!(inst.objective(&neg) < 1e-14);
    let mut rng = RngStream::from_seed(4);
    for _ in 0..1000 {
        let x = sample_standard_normal(&mut rng, inst.d());
        assert!(inst.objective(&x) > 0.0);
    }
}

#[test]
fn terms_are_weakly_convex_along_lines() {
    let inst = instance(5);
    let rho = inst.weak_convexity_bound();
    assert_eq!(rho, 2.0 * inst.measurements.iter().map(|a| dot(a, a)).fold(0.0, f64::max));
    let mut rng = RngStream::from_seed(6);
    for _ in 0..500 {
        let x = sample_standard_normal(&mut rng, inst.d());
        let v = sample_standard_normal(&mut rng, inst.d());
        let i = rng.index(inst.m());
        let g = |t: f64| {
            let y: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + t * b).collect();
            inst.sample_f(&y, i).unwrap() + 0.5 * rho * dot(&y, &y)
        };
        // Midpoint convexity on a few segments.
        for (a, b) in [(-1.0, 1.0), (0.0, 0.3), (-2.0, 0.5)] {
            let mid = g(0.5 * (a + b));
            assert!(mid <= 0.5 * (g(a) + g(b)) + 1e-9);
        }
    }
}

#[test]
fn generated_instances_are_normalised_and_replayable() {
    for seed in 0..10 {
        let a = instance(seed);
        let b = instance(seed);
        assert_eq!(a, b);
        assert!((norm2(&a.signal) - 1.0).abs() <= 1e-12);
        assert!((norm2(&a.start) - 1.0).abs() <= 1e-12);
        for (row, t) in a.measurements.iter().zip(&a.targets) {
            assert_eq!(*t, dot(row, &a.signal).powi(2));
        }
    }
}

#[test]
fn oracle_average_is_the_objective() {
    let inst = instance(7);
    let x = vec![0.2; inst.d()];
    let mean: f64 = (0..inst.m()).map(|i| inst.eval(&x, &i)).sum::<f64>() / inst.m() as f64;
    assert!((mean - inst.objective(&x)).abs() < 1e-14);
    assert_eq!(CompositeProblem::objective(&inst, &x), Some(inst.objective(&x)));
}
