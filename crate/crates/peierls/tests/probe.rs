use peierls::solvers::*;
use peierls::energy::gradient_residual;
use std::time::Instant;

#[test]
fn probe_params_and_kink() {
    let mu = 1.0;
    for l in [10usize, 50, 100, 200, 400] {
        let p = solve_periodic_dimerized(l, mu).unwrap();
        println!("L={l}: W={:.10}, delta={:.10}", p.w, p.delta);
    }
    let t0 = Instant::now();
    let opts = SolverOptions { residual_tol: 1e-11, ..Default::default() };
    let sol = solve_kink(100, mu, &opts).unwrap();
    let cp = &sol.critical_point;
    println!("kink N=100: dim={} iters={} residual={:.3e} converged={} elapsed={:?}",
        sol.critical_point.config.topology.sites(), cp.iterations, cp.residual_norm, cp.converged, t0.elapsed());
    // full residual including clamped bonds, interior portion
    let r = gradient_residual(&cp.config, mu).unwrap();
    let first = cp.config.topology.first_index();
    let mut inner_max = 0.0f64;
    let mut outer_max = 0.0f64;
    for (k, &rv) in r.iter().enumerate() {
        let n = first + k as i64;
        if (-100..=100).contains(&n) { inner_max = inner_max.max(rv.abs()); }
        else { outer_max = outer_max.max(rv.abs()); }
    }
    println!("independent residual check: interior {:.3e}, clamped region {:.3e}", inner_max, outer_max);
    // deviation profile at a few sites
    let tail = sol.tail;
    for n in [0i64, 5, 10, 20, 40, 60, 80] {
        let k = (n - first) as usize;
        let u = cp.config.values[k] - (tail.w + peierls::lattice::parity(n) * tail.delta);
        println!("u_{n} = {:.6e}", u);
    }
}
