// temporary benchmark, not part of the crate
use peierls::lattice::{Configuration, DimerizedParams, Sign, build_operator};
use peierls::spectral::{eigendecompose, eigenvalues_only};
use std::time::Instant;

#[test]
fn bench_eigen_dims() {
    let p = DimerizedParams::new(1.0, 0.2).unwrap();
    for sites in [200usize, 400, 500, 600] {
        let c = Configuration::dimerized_window(p, Sign::Plus, 0, sites).unwrap();
        let op = build_operator(&c);
        let t0 = Instant::now();
        let spec = eigendecompose(&op).unwrap();
        let full = t0.elapsed();
        let t0 = Instant::now();
        let vals = eigenvalues_only(&op);
        let vonly = t0.elapsed();
        println!("dim {sites}: full {:?}, values-only {:?}, gap check {:.3}", full, vonly, spec.eigenvalues[sites/2].abs().min(vals[sites/2].abs()));
    }
}
