//! Synthetic measurements: restriction of a fine truth, noise statistics
//! and file round trips.

use chemotaxis_id::pde;
use chemotaxis_id::presets::{myerscough_c0, myerscough_u0};
use chemotaxis_id::synth::{add_noise, generate_truth_with, realized_noise, synthesize_with};
use chemotaxis_id::{AnalyticSensitivity, NoisyData, PhysicalParams, SimulationGrid, SolverOptions};

fn grids() -> (SimulationGrid, SimulationGrid) {
    (SimulationGrid::unit(81, 0.25, 400).unwrap(), SimulationGrid::unit(21, 0.25, 50).unwrap())
}

fn clean() -> pde::StateTrajectory {
    let (fine, meas) = grids();
    synthesize_with(
        &AnalyticSensitivity::Inverse(2.0),
        &PhysicalParams::myerscough(),
        &fine,
        &meas,
        myerscough_u0,
        myerscough_c0,
        &SolverOptions::default(),
    )
    .unwrap()
}

#[test]
fn measurements_sample_the_fine_truth_at_coincident_nodes() {
    let (fine, meas) = grids();
    let truth = generate_truth_with(
        &AnalyticSensitivity::Inverse(2.0),
        &PhysicalParams::myerscough(),
        &fine,
        &fine.sample(myerscough_u0),
        &fine.sample(myerscough_c0),
        &SolverOptions::default(),
    )
    .unwrap();
    let m = clean();
    assert_eq!(m.grid(), &meas);
    for j in 0..=meas.n_steps() {
        let f = truth.frame(8 * j);
        let g = m.frame(j);
        for i in 0..meas.n_nodes() {
            assert_eq!(g.u[i], f.u[4 * i], "u at frame {j} node {i}");
            assert_eq!(g.c[i], f.c[4 * i]);
        }
    }
}

#[test]
fn noise_hits_each_level_exactly() {
    let m = clean();
    for delta in [1e-3, 1e-2, 5e-2] {
        for seed in 0..3 {
            let d = add_noise(&m, delta, seed).unwrap();
            let (eu, ec) = realized_noise(&m, &d);
            assert!((eu - delta).abs() <= 1e-12 * delta, "{eu} vs {delta}");
            assert!((ec - delta).abs() <= 1e-12 * delta, "{ec} vs {delta}");
            assert!(d.trajectory().frames().iter().all(|f| f.c.iter().all(|&c| c > 0.0)));
        }
    }
}

/// Normalized noise entries should look standard normal: mean near 0,
/// variance near 1 and kurtosis near 3, with u and c uncorrelated.
#[test]
fn noise_is_centered_gaussian_and_uncorrelated() {
    let m = clean();
    let d = add_noise(&m, 1e-3, 42).unwrap();
    let (mut eu, mut ec) = (Vec::new(), Vec::new());
    for j in 1..=m.grid().n_steps() {
        for i in 0..m.grid().n_nodes() {
            eu.push(d.z_u(j)[i] - m.frame(j).u[i]);
            ec.push(d.z_c(j)[i] - m.frame(j).c[i]);
        }
    }
    let n = eu.len() as f64;
    let moments = |e: &[f64]| {
        let mean = e.iter().sum::<f64>() / n;
        let var = e.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let kurt = e.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n / (var * var);
        (mean / var.sqrt(), kurt)
    };
    for e in [&eu, &ec] {
        let (z, kurt) = moments(e);
        // standard error of the mean is 1/sqrt(n) ~ 0.03
        assert!(z.abs() < 0.15, "mean {z}");
        assert!((kurt - 3.0).abs() < 0.5, "kurtosis {kurt}");
    }
    let su = (eu.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let sc = (ec.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let corr = eu.iter().zip(&ec).map(|(a, b)| a * b).sum::<f64>() / (su * sc);
    assert!(corr.abs() < 0.15, "correlation {corr}");
}

#[test]
fn data_files_round_trip_bit_exactly() {
    let d = add_noise(&clean(), 0.01, 9).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("data.csv");
    d.write_csv(&p).unwrap();
    let back = NoisyData::read_csv(&p).unwrap();
    assert_eq!(back.delta(), d.delta());
    assert_eq!(back.seed(), d.seed());
    assert_eq!(back.trajectory(), d.trajectory());
    assert_eq!(back.to_csv_string(), d.to_csv_string());
}

#[test]
fn coarse_truth_grid_is_rejected() {
    let meas = SimulationGrid::unit(21, 0.25, 50).unwrap();
    let fine = SimulationGrid::unit(41, 0.25, 200).unwrap();
    let r = synthesize_with(
        &AnalyticSensitivity::Constant(2.0),
        &PhysicalParams::myerscough(),
        &fine,
        &meas,
        myerscough_u0,
        myerscough_c0,
        &SolverOptions::default(),
    );
    assert!(r.is_err());
}
