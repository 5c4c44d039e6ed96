mod common;

use common::*;
use ndarray::{array, s, Array1, Array2};
use scomp::apps::{
    blur_matrix, dpngs_solve, dual_decrement_sq, hetlasso_solve, newton_graph_solve, phantom, poisson_fixed_point_residual,
    poisson_solve, proxgrad_graph_solve, synth_gmrf, synth_hetlasso, synth_poisson, Blur, GraphProblem, HetLassoProblem,
    PoissonConfig, PoissonProblem,
};
use scomp::io::{
    read_csv_table, read_matrix_market, read_pgm, write_csv_table, write_matrix_market, write_pgm, CsvTable, PgmImage,
};
use scomp::prox_grad::GradConfig;
use scomp::prox_newton::{newton_direction, LineSearch, NewtonConfig};
use scomp::prox_ops::{NoReg, ProxWorkspace, TvControl};
use scomp::sc_core::{local_norm, HetLassoOracle, LogDetOracle};
use scomp::subsolver::{recover_primal_direction, InnerConfig};
use scomp::Counters;

fn to_na(a: &Array2<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn dpngs_recovers_diagonal_solution() {
    let sigma_hat = array![[1.0, 0.1, -0.05], [0.1, 2.0, 0.08], [-0.05, 0.08, 0.5]];
    let rho = 0.2;
    let prob = GraphProblem::new(sigma_hat.clone(), rho).unwrap().with_theta0(Array2::eye(3)).unwrap();
    let cfg = NewtonConfig { eps: 1e-9, inner: InnerConfig::with_tol(1e-12), ..Default::default() };
    let sol = dpngs_solve(&prob, &cfg).unwrap();
    assert!(sol.trace.converged());
    let expected = Array2::from_diag(&sigma_hat.diag().mapv(|v| 1.0 / (v + rho)));
    assert!(max_abs_diff(&sol.theta, &expected) < 1e-7);
}

#[test]
fn scalar_graph_problem_by_gradient() {
    // min −log θ + 2θ + ½|θ| at θ = 1/(2 + ½)
    let prob = GraphProblem::<f64>::new(array![[2.0]], 0.5).unwrap().with_theta0(array![[1.0]]).unwrap();
    let sol = proxgrad_graph_solve(&prob, &GradConfig { eps: 1e-12, ..Default::default() }).unwrap();
    assert!(sol.trace.converged());
    assert!((sol.theta[[0, 0]] - 0.4).abs() < 1e-9);
}

#[test]
fn dual_and_gradient_paths_agree() {
    let gm = synth_gmrf::<f64>(10, 0.2, 100, 3).unwrap();
    let prob = gm.problem(0.01).unwrap();
    let newton = NewtonConfig { eps: 1e-8, inner: InnerConfig::with_tol(1e-12), ..Default::default() };
    let a = dpngs_solve(&prob, &newton).unwrap();
    let b = proxgrad_graph_solve(&prob, &GradConfig { eps: 1e-8, max_iter: 20000, ..Default::default() }).unwrap();
    let c = newton_graph_solve(&prob, &newton).unwrap();
    assert!(a.trace.converged() && b.trace.converged() && c.trace.converged());
    assert!(max_abs_diff(&a.theta, &b.theta) <= 1e-5, "{}", max_abs_diff(&a.theta, &b.theta));
    assert!(max_abs_diff(&a.theta, &c.theta) <= 1e-5);
    assert!(prob.kkt_residual(c.theta.view()).unwrap() <= 1e-6);
}

/// `tr((W − I)²)` with `W = Θ(Σ̂ + ρU)` equals `tr(Θ⁻¹ΔΘ⁻¹Δ)` for the
/// recovered `Δ` and any symmetric `U`.
#[test]
fn dual_decrement_matches_dense_local_norm() {
    let mut r = rng(29);
    for _ in 0..20 {
        let p = 6;
        let theta = random_spd(&mut r, p, 0.4);
        let sigma_hat = random_spd(&mut r, p, 0.1);
        let u0 = gauss_mat(&mut r, p, p);
        let u = ((&u0 + &u0.t()) * 0.5).mapv(|v: f64| v.clamp(-1.0, 1.0));
        let rho = 0.3;
        let ctr = Counters::new();
        let delta = recover_primal_direction(theta.view(), sigma_hat.view(), rho, u.view(), &ctr);
        let lam = dual_decrement_sq(theta.view(), sigma_hat.view(), rho, u.view(), &ctr).sqrt();
        let ti = to_na(&theta).try_inverse().unwrap();
        let dn = to_na(&delta);
        let dense = (&ti * &dn * &ti * &dn).trace().sqrt();
        assert!((lam - dense).abs() <= 1e-8 * (1.0 + dense), "{lam} vs {dense}");
        assert_eq!(ctr.snapshot().chol, 0);
    }
}

#[test]
fn factorization_counts() {
    let gm = synth_gmrf::<f64>(8, 0.25, 80, 4).unwrap();
    let prob = gm.problem(0.02).unwrap();
    let cfg = NewtonConfig { strategy: LineSearch::NoLS, eps: 1e-8, ..Default::default() };
    let sol = dpngs_solve(&prob, &cfg).unwrap();
    assert!(sol.trace.records.iter().all(|r| r.n_chol == 0 && r.n_chol_feval == 0));
    let sol = proxgrad_graph_solve(&prob, &GradConfig::default()).unwrap();
    assert_eq!(sol.trace.last().unwrap().n_chol as usize, sol.trace.records.len());
}

#[test]
fn hetlasso_zero_design_closed_form() {
    let n = 12;
    let y = Array1::from_iter((0..n).map(|i| (i as f64 * 0.7).sin() + 0.3));
    let x = Array2::zeros((n, 5));
    let prob = HetLassoProblem::new(x, y.clone(), 0.1).unwrap();
    let sol = hetlasso_solve(&prob, &GradConfig { eps: 1e-12, max_iter: 5000, ..Default::default() }).unwrap();
    assert!(sol.trace.converged());
    let sigma_star = (n as f64 / y.dot(&y)).sqrt();
    assert!((sol.sigma - sigma_star).abs() < 1e-8, "{} vs {sigma_star}", sol.sigma);
    assert!(sol.beta.iter().all(|v| *v == 0.0));
}

#[test]
fn hetlasso_decrement_closed_form() {
    let mut r = rng(8);
    let x = gauss_mat(&mut r, 9, 4);
    let y = gauss_vec(&mut r, 9);
    let o = HetLassoOracle::new(x, y).unwrap();
    for _ in 0..20 {
        let mut pt = gauss_vec(&mut r, 5);
        pt[4] = 0.5 + pt[4].abs();
        let d = gauss_vec(&mut r, 5);
        let dense = local_norm(&o, pt.view(), d.view()).unwrap();
        let closed = o.decrement_sq(pt[4], d.view()).sqrt();
        assert!((dense - closed).abs() <= 1e-10 * (1.0 + dense));
    }
}

#[test]
fn hetlasso_recovers_support() {
    let syn = synth_hetlasso::<f64>(100, 30, 3, 0.1, 5).unwrap();
    let sol = hetlasso_solve(&syn.problem(0.05).unwrap(), &GradConfig { eps: 1e-8, max_iter: 10000, ..Default::default() }).unwrap();
    assert!(sol.trace.converged());
    // the joint parametrization estimates σ·β
    for (b, t) in sol.beta.iter().map(|b| b / sol.sigma).zip(syn.beta_true.iter()) {
        if *t != 0.0 {
            assert!(b * t > 0.0 && (b - t).abs() < 0.3, "{b} vs {t}");
        } else {
            assert!(b.abs() < 0.1);
        }
    }
}

/// A constant image with noiseless counts minimizes both the likelihood and
/// the total variation, so it is a fixed point of the prox map.
#[test]
fn poisson_exact_constant_image_is_fixed_point() {
    let (h, w) = (6, 6);
    let x_true = Array1::from_elem(h * w, 0.5);
    let mut a = blur_matrix::<f64>(h, w, Blur::Box(1));
    a.scale(40.0);
    let y = a.mul_vec(x_true.view());
    let prob = PoissonProblem::new(a, y, 0.01, h, w).unwrap();
    let tv = TvControl { inner_tol: 1e-10, inner_max_iter: 2000 };
    let res = poisson_fixed_point_residual(&prob, tv, x_true.view(), 1.0).unwrap();
    assert!(res < 1e-8, "{res}");
    let cfg = PoissonConfig { grad: GradConfig { eps: 1e-8, max_iter: 3000, descent_slack: 1e-6, ..Default::default() }, tv };
    let sol = poisson_solve(&prob, &cfg).unwrap();
    assert!(max_abs_diff(&sol.x.clone().into_shape_with_order((h, w)).unwrap(), &Array2::from_elem((h, w), 0.5)) < 1e-3);
    assert!(prob.objective(sol.x.view()) <= prob.objective(prob.x0.view()));
}

#[test]
fn synthetic_generators_are_deterministic() {
    let a = synth_gmrf::<f64>(7, 0.3, 20, 9).unwrap();
    let b = synth_gmrf::<f64>(7, 0.3, 20, 9).unwrap();
    assert_eq!(a.sigma_hat, b.sigma_hat);
    assert_ne!(a.sigma_hat, synth_gmrf::<f64>(7, 0.3, 20, 10).unwrap().sigma_hat);
    let p = synth_poisson::<f64>(None, 8, 8, Blur::Identity, 50.0, 1).unwrap();
    assert_eq!(p.y, synth_poisson::<f64>(None, 8, 8, Blur::Identity, 50.0, 1).unwrap().y);
    let l = synth_hetlasso::<f64>(10, 6, 2, 0.1, 2).unwrap();
    assert_eq!(l.y, synth_hetlasso::<f64>(10, 6, 2, 0.1, 2).unwrap().y);
    assert_eq!(l.beta_true.iter().filter(|v| **v != 0.0).count(), 2);
}

#[test]
fn gmrf_properties() {
    let g = synth_gmrf::<f64>(9, 0.0, 0, 3).unwrap();
    let off = g.theta_true.iter().enumerate().filter(|(i, _)| i / 9 != i % 9).all(|(_, v)| *v == 0.0);
    assert!(off);
    let g = synth_gmrf::<f64>(12, 0.4, 0, 3).unwrap();
    let eig = to_na(&g.theta_true).symmetric_eigen().eigenvalues;
    assert!(eig.min() > 0.0 && eig.max() / eig.min() <= 1e3);
    assert_eq!(g.sigma, g.sigma_hat);
    // with exact covariance the unregularized Newton direction vanishes at the truth
    let o = LogDetOracle::new(g.sigma_hat.clone()).unwrap();
    let x = Array1::from_iter(g.theta_true.iter().copied());
    let dir = newton_direction(&o, &NoReg, x.view(), &InnerConfig::with_tol(1e-12), None, &mut ProxWorkspace::new(), &Counters::new())
        .unwrap();
    assert!(dir.lambda < 1e-8, "{}", dir.lambda);
    assert!(synth_gmrf::<f64>(1, 0.1, 0, 0).is_err());
}

#[test]
fn poisson_counts_track_intensity() {
    let img = phantom(16, 16);
    assert!(img.iter().all(|v| (0.1..=1.0).contains(v)));
    let p = synth_poisson::<f64>(Some(&img), 16, 16, Blur::Identity, 1e4, 2).unwrap();
    let est = &p.y / 1e4;
    let rel = (&est - &img).mapv(|v| v * v).sum().sqrt() / img.mapv(|v| v * v).sum().sqrt();
    assert!(rel < 0.1, "{rel}");
    let zero = Array1::zeros(16);
    let p = synth_poisson::<f64>(Some(&zero), 4, 4, Blur::Box(1), 100.0, 2).unwrap();
    assert!(p.y.iter().all(|v| *v == 0.0));
    assert!(synth_poisson::<f64>(Some(&zero), 5, 5, Blur::Identity, 1.0, 0).is_err());
}

#[test]
fn blur_rows_sum_to_one() {
    for blur in [Blur::Identity, Blur::Box(2), Blur::Gaussian { sigma: 1.2, radius: 3 }] {
        let a = blur_matrix::<f64>(7, 5, blur);
        let ones = a.mul_vec(Array1::from_elem(35, 1.0).view());
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }
}

#[test]
fn matrix_market_round_trip_through_file() {
    let mut r = rng(3);
    let a = random_spd(&mut r, 5, 0.1);
    let path = std::env::temp_dir().join(format!("scomp-mm-{}.mtx", std::process::id()));
    write_matrix_market(&a, true, std::fs::File::create(&path).unwrap()).unwrap();
    let b = read_matrix_market(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(a, b);
}

#[test]
fn matrix_market_coordinate_symmetric() {
    let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2.0\n2 1 -0.5\n2 2 1\n3 3 4e-1\n";
    let a = read_matrix_market(text.as_bytes()).unwrap();
    assert_eq!(a, array![[2.0, -0.5, 0.0], [-0.5, 1.0, 0.0], [0.0, 0.0, 0.4]]);
    assert!(read_matrix_market("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n".as_bytes()).is_err());
    assert!(read_matrix_market("3 3 1\n".as_bytes()).is_err());
}

#[test]
fn pgm_round_trips() {
    let img8 = PgmImage { width: 3, height: 2, maxval: 255, data: vec![0, 10, 20, 128, 254, 255] };
    let img16 = PgmImage { width: 2, height: 2, maxval: 1000, data: vec![0, 999, 1000, 256] };
    for img in [img8, img16] {
        let mut buf = Vec::new();
        write_pgm(&img, &mut buf).unwrap();
        assert_eq!(read_pgm(buf.as_slice()).unwrap(), img);
    }
    let ascii = "P2\n# tiny\n2 2\n4\n0 1\n2 4\n";
    let img = read_pgm(ascii.as_bytes()).unwrap();
    assert_eq!(img.normalized(), array![0.0, 0.25, 0.5, 1.0]);
    assert!(read_pgm("P5\n4 4\n255\nab".as_bytes()).is_err());
    assert!(read_pgm("P3\n1 1\n255\n0 0 0".as_bytes()).is_err());
}

#[test]
fn csv_table_round_trip() {
    let t = CsvTable { headers: vec!["a".into(), "y".into(), "b".into()], data: array![[1.0, 2.0, 3.0], [-4.5, 0.0, 1e-3]] };
    let mut buf = Vec::new();
    write_csv_table(&t, &mut buf).unwrap();
    let back = read_csv_table(buf.as_slice()).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.column("y").unwrap(), array![2.0, 0.0]);
    assert_eq!(back.without("y"), t.data.slice(s![.., ..;2]).to_owned());
    assert!(read_csv_table("a,b\n1,x\n".as_bytes()).is_err());
    assert!(read_csv_table("a,b\n1\n".as_bytes()).is_err());
}
