use nalgebra::{DMatrix, DVector};
use zoprox::pde::{assemble, state_operator, Equation, InstanceSampler, PdeSpec};
use zoprox::smoothing::sample_standard_normal;
use zoprox::sparse::CsrMatrix;
use zoprox::RngStream;

fn dense(m: &CsrMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.rows(), m.cols());
    for (r, c, v) in m.triplets() {
        d[(r, c)] = v;
    }
    d
}

#[test]
fn poisson_spectrum_matches_the_sine_basis() {
    for n in [3usize, 5] {
        let spec = PdeSpec::poisson(n, 0.0, 0.0);
        let h2 = spec.h() * spec.h();
        let l = dense(&state_operator(&spec).unwrap()) * h2;
        let mut eig: Vec<f64> = l.symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let s = |a: usize| 4.0 * (std::f64::consts::PI * a as f64 / (2.0 * (n as f64 + 1.0))).sin().powi(2);
        let mut exact: Vec<f64> = (1..=n).flat_map(|a| (1..=n).map(move |b| s(a) + s(b))).collect();
        exact.sort_by(f64::total_cmp);
        for (x, y) in eig.iter().zip(&exact) {
            assert!((x - y).abs() < 1e-12, "{x} {y}");
        }
    }
}

#[test]
fn quadratic_term_is_symmetric_psd() {
    let mut rng = RngStream::from_seed(1);
    for eq in [Equation::Poisson, Equation::ConvectionDiffusion] {
        for spec in InstanceSampler::training(eq).with_sizes(vec![9]).triples() {
            let inst = assemble(&spec).unwrap();
            assert_eq!(inst.q.asymmetry(), 0.0);
            for _ in 0..100 {
                let v = sample_standard_normal(&mut rng, inst.n());
                let qv = inst.q.mul_vec(&v);
                assert!(v.iter().zip(&qv).map(|(a, b)| a * b).sum::<f64>() >= -1e-12);
            }
            assert!(inst.d.iter().all(|d| *d >= 0.0));
        }
    }
}

#[test]
fn constraints_have_full_row_rank_and_are_consistent() {
    for eq in [Equation::Poisson, Equation::ConvectionDiffusion] {
        let inst = assemble(&PdeSpec::new(eq, 9, 1e-2, 1e-4)).unwrap();
        let a = dense(&inst.a);
        let svd = a.clone().svd(true, true);
        assert_eq!(svd.rank(1e-12 * svd.singular_values.max()), inst.m());
        let b = DVector::from_column_slice(&inst.b);
        let x = svd.solve(&b, 1e-14).unwrap();
        assert!((&a * &x - &b).norm() <= 1e-8 * b.norm().max(1e-300) + 1e-14);
    }
}

#[test]
fn convection_diffusion_is_an_m_matrix() {
    let spec = PdeSpec::convection_diffusion(9, 0.0, 0.0);
    let l = state_operator(&spec).unwrap();
    for r in 0..l.rows() {
        let mut sum = 0.0;
        for (c, v) in l.row(r) {
            if c != r {
                assert!(v <= 0.0);
            } else {
                assert!(v > 0.0);
            }
            sum += v;
        }
        assert!(sum >= -1e-9);
    }
}

#[test]
fn sampler_draws_cover_every_triple() {
    let s = InstanceSampler::training(Equation::Poisson);
    assert_eq!(s.len(), 80);
    assert_eq!(InstanceSampler::holdout(Equation::Poisson, false).len(), 80);
    assert_eq!(InstanceSampler::holdout(Equation::Poisson, true).len(), 96);
    let mut counts = vec![0usize; s.len()];
    let mut rng = RngStream::from_seed(2);
    for _ in 0..40_000 {
        counts[s.sample_index(&mut rng)] += 1;
    }
    // 500 expected per cell; 5 standard deviations is about 112.
    assert!(counts.iter().all(|c| (*c as f64 - 500.0).abs() < 112.0), "{counts:?}");
}
