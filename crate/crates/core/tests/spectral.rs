//! Per-mode eigenvalues against a dense eigensolve of the assembled
//! finite-difference linearization.

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use memopat_core::{Dispersion, EncodingFamily, Grid, GrowthModel, ModelSpec};

/// Node Laplacian with ghost-node Neumann rows.
fn laplacian(grid: &Grid) -> DMatrix<f64> {
    let m = grid.len();
    let h2 = grid.h() * grid.h();
    let mut l = DMatrix::zeros(m, m);
    for i in 0..m {
        l[(i, i)] = -2.0 / h2;
        if i == 0 {
            l[(0, 1)] = 2.0 / h2;
        } else if i == m - 1 {
            l[(i, i - 1)] = 2.0 / h2;
        } else {
            l[(i, i - 1)] = 1.0 / h2;
            l[(i, i + 1)] = 1.0 / h2;
        }
    }
    l
}

/// `[[d L + f_u, α u* L (I − R² L)⁻¹], [w_u, w_k]]`.
fn jacobian(spec: &ModelSpec, grid: &Grid) -> DMatrix<f64> {
    let lin = spec.linearize().unwrap();
    let m = grid.len();
    let l = laplacian(grid);
    let eye = DMatrix::<f64>::identity(m, m);
    let screen = (&eye - &l * (spec.radius * spec.radius))
        .try_inverse()
        .unwrap();
    let cross = &l * screen * (spec.alpha * lin.u_star);
    let mut j = DMatrix::zeros(2 * m, 2 * m);
    j.view_mut((0, 0), (m, m))
        .copy_from(&(&l * spec.d + &eye * lin.f_u));
    j.view_mut((0, m), (m, m)).copy_from(&cross);
    j.view_mut((m, 0), (m, m)).copy_from(&(&eye * lin.w_u));
    j.view_mut((m, m), (m, m)).copy_from(&(&eye * lin.w_k));
    j
}

fn random_spec(rng: &mut ChaCha8Rng) -> ModelSpec {
    let rho = rng.gen_range(0.5..2.0);
    let mu = rng.gen_range(0.05..1.0);
    let beta = rng.gen_range(0.05..1.0);
    let encoding = if rng.gen_bool(0.5) {
        EncodingFamily::ratio_quadratic(rho, mu, beta)
    } else {
        EncodingFamily::ratio_linear(rho, mu, beta)
    };
    ModelSpec::new(
        rng.gen_range(0.5..2.0),
        rng.gen_range(-6.0..6.0),
        rng.gen_range(0.1..2.5),
        GrowthModel::Logistic {
            rate: rng.gen_range(0.5..2.0),
            capacity: rng.gen_range(0.5..2.0),
        },
        encoding,
        None,
    )
    .unwrap()
}

fn distance_to_spectrum(spectrum: &[Complex64], target: Complex64) -> f64 {
    spectrum
        .iter()
        .map(|s| (s - target).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Largest distance between the two root pairs, matched as sets.
fn pair_gap(a: (Complex64, Complex64), b: (Complex64, Complex64)) -> f64 {
    let direct = (a.0 - b.0).norm().max((a.1 - b.1).norm());
    let swapped = (a.0 - b.1).norm().max((a.1 - b.0).norm());
    direct.min(swapped)
}

#[test]
fn discrete_symbol_reproduces_dense_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let grid = Grid::new(64).unwrap();
    for _ in 0..3 {
        let spec = random_spec(&mut rng);
        let disp = Dispersion::from_spec(&spec).unwrap();
        let spectrum: Vec<Complex64> = jacobian(&spec, &grid)
            .complex_eigenvalues()
            .iter()
            .copied()
            .collect();
        for n in 0..=8 {
            let (p, m) = disp.roots(spec.alpha, grid.laplacian_symbol(n));
            for lambda in [p, m] {
                let gap = distance_to_spectrum(&spectrum, lambda);
                assert!(
                    gap < 1e-8 * lambda.norm().max(1.0),
                    "{spec:?} n={n} λ={lambda} gap={gap:e}"
                );
            }
        }
    }
}

#[test]
fn continuous_symbol_error_is_second_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..3 {
        let spec = random_spec(&mut rng);
        let disp = Dispersion::from_spec(&spec).unwrap();
        let coarse = Grid::new(64).unwrap();
        let fine = Grid::new(128).unwrap();
        for n in 1..=8u32 {
            let exact = disp.eigenvalues(spec.alpha, n);
            let exact = (exact.0, exact.1);
            let e_coarse = pair_gap(disp.roots(spec.alpha, coarse.laplacian_symbol(n)), exact);
            let e_fine = pair_gap(disp.roots(spec.alpha, fine.laplacian_symbol(n)), exact);
            assert_relative_eq!(e_coarse / e_fine, 4.0, max_relative = 0.1);
        }
    }
}

#[test]
fn laplacian_cosines_are_eigenvectors() {
    let grid = Grid::new(32).unwrap();
    let l = laplacian(&grid);
    for n in 0..=8u32 {
        let c = nalgebra::DVector::from_vec(grid.sample(|x| (f64::from(n) * x).cos()));
        let lc = &l * &c;
        let z = grid.laplacian_symbol(n);
        for i in 0..grid.len() {
            assert!((lc[i] + z * c[i]).abs() < 1e-9 * z.max(1.0));
        }
    }
}
