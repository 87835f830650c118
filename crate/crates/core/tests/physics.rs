mod common;

use gl_vortex::geometry::LatticeShape;
use gl_vortex::grid::{build_approximate_solution, build_grid};
use gl_vortex::operator::energy;
use gl_vortex::profile::{first_critical_field, profile_energy, profile_flux, solve_profile};
use gl_vortex::solver::{newton_solve, solve_corrector, trig_gammas, verify_projected_equation};
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

#[test]
fn profile_matches_shooting_at_twenty_radii() {
    let p = solve_profile(1, 0.8, 25.0, 2000, 1e-10).unwrap();
    let s = common::Shooting::solve(1, 0.8, 25.0, 50, common::crude_guess(1));
    assert!(s.residual < 1e-9);
    let mut checked = 0;
    for (r, y) in s.nodes.iter().zip(&s.states).skip(1).step_by(2).take(20) {
        let e = p.eval(*r);
        assert!((e[0] - y[0]).abs() < 1e-6 && (e[2] - y[2]).abs() < 1e-6, "r={r}: {e:?} vs {y:?}");
        checked += 1;
    }
    assert_eq!(checked, 20);
}

#[test]
fn truncated_flux_is_below_the_quantum() {
    let p = solve_profile(1, 1.0, 25.0, 2000, 1e-10).unwrap();
    let s = common::Shooting::solve(1, 1.0, 25.0, 50, common::crude_guess(1));
    let k = s.nodes.iter().position(|r| (r - 5.0).abs() < 1e-12).unwrap();
    let a5 = s.states[k][2];
    assert!((p.a_at(5.0) - a5).abs() < 1e-6);
    assert!(2.0 * PI * a5 < 2.0 * PI && a5 > 0.9);
    assert!(p.a.windows(2).all(|w| w[1] >= w[0]));
    assert!((profile_flux(&p) - 2.0 * PI).abs() < 1e-10);
}

#[test]
fn first_critical_field_values() {
    let h = first_critical_field(FRAC_1_SQRT_2).unwrap();
    assert!((h - 0.5).abs() < 1e-6, "{h}");
    let (h1, h2) = (first_critical_field(1.0).unwrap(), first_critical_field(2.0).unwrap());
    assert!(h1 > 0.0 && h2 > 0.0 && h1 != h2);
}

#[test]
fn isolated_vortex_energy_on_a_large_cell() {
    let p = Arc::new(solve_profile(1, 1.5, 25.0, 2000, 1e-10).unwrap());
    let g = build_grid(&LatticeShape::square(14.0), 56, 56).unwrap();
    let v = build_approximate_solution(p.clone(), &g).unwrap();
    let (u, rep) = newton_solve(&v, 1.5, 1e-9).unwrap();
    assert!(rep.converged);
    let (e, e0) = (energy(&u, 1.5), profile_energy(&p));
    assert!((e - e0).abs() < 0.01 * e0, "{e} vs {e0}");
}

#[test]
fn gauge_pairing_separates_solved_from_unsolved() {
    let p = Arc::new(solve_profile(1, 1.5, 25.0, 2000, 1e-10).unwrap());
    let g = build_grid(&LatticeShape::square(8.0), 32, 32).unwrap();
    let v = build_approximate_solution(p, &g).unwrap();
    let gammas = trig_gammas(&v, 20);
    let (w, rep) = solve_corrector(&v, 1.5, 1e-8, 30).unwrap();
    assert!(rep.converged);
    let solved = verify_projected_equation(&v.plus(&w), &v, 1.5, &gammas).unwrap();
    assert!(solved < 1e-7, "{solved}");
    let mut bent = v.clone();
    let n1 = bent.grid().n1;
    for (k, z) in bent.psi.iter_mut().enumerate() {
        let (i, _) = v.grid().ij(k);
        *z *= 1.0 + 0.1 * (2.0 * PI * i as f64 / n1 as f64).cos();
    }
    let unsolved = verify_projected_equation(&bent, &v, 1.5, &gammas).unwrap();
    assert!(unsolved > 1e3 * solved, "{unsolved} vs {solved}");
}
