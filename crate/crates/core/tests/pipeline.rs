//! End-to-end use of the public API: initial data, semigroup, both schemes.

use mbe_core::currents::CurrentModel;
use mbe_core::harness::{make_initial_data, Family, InitialData};
use mbe_core::semigroup::apply_semigroup;
use mbe_core::solver::{solve, Scheme, SolverConfig};
use mbe_core::spectral::lp_norm;
use mbe_core::{Field, GridSpec};

fn data(amplitude: f64) -> Field {
    let g = GridSpec::new(2, 32, 16.0).unwrap();
    let spec = InitialData { family: Family::GaussianBump, amplitude, seed: 3, width: Some(1.5) };
    make_initial_data(&spec, g).unwrap()
}

fn rel(a: &Field, b: &Field) -> f64 {
    lp_norm(&a.sub(b).unwrap(), 2.0).unwrap() / lp_norm(b, 2.0).unwrap()
}

fn end(u0: &Field, horizon: f64, model: &CurrentModel, scheme: Scheme, step: f64) -> Field {
    let traj = solve(u0, horizon, model, &SolverConfig::new(scheme, step)).unwrap();
    assert!(traj.completed(), "{:?}", traj.termination);
    traj.snapshots.last().unwrap().field.clone()
}

#[test]
fn semigroup_composes() {
    let u = data(0.1);
    let two_step = apply_semigroup(&apply_semigroup(&u, 0.3).unwrap(), 0.2).unwrap();
    assert!(rel(&two_step, &apply_semigroup(&u, 0.5).unwrap()) < 1e-13);
}

#[test]
fn linear_runs_reproduce_the_semigroup() {
    let u = data(0.1);
    let exact = apply_semigroup(&u, 0.5).unwrap();
    for scheme in [Scheme::PicardDuhamel, Scheme::Etd2] {
        let e = rel(&end(&u, 0.5, &CurrentModel::linear(3.0), scheme, 0.05), &exact);
        assert!(e < 1e-12, "{scheme:?}: {e:e}");
    }
}

#[test]
fn schemes_agree_on_small_rost_krug_data() {
    let u = data(0.05);
    let gap = |h: f64| {
        let a = end(&u, 0.2, &CurrentModel::RostKrug, Scheme::PicardDuhamel, h);
        rel(&end(&u, 0.2, &CurrentModel::RostKrug, Scheme::Etd2, h), &a)
    };
    let (coarse, fine) = (gap(0.01), gap(0.005));
    // both schemes are second order, so their gap closes about fourfold per halving
    assert!(fine < 1e-5 && coarse / fine > 3.5, "{coarse:e} -> {fine:e}");
}
