//! Peierls energy, energy difference, Euler–Lagrange gradient, Hessian
//! quadratic form / linearized operator, and Taylor-remainder diagnostics.
//!
//! The primary evaluation path is eigendecomposition (exact at machine
//! precision for finite matrices); contour quadrature of the same quantities
//! is kept as an independently coded oracle.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::contour::{self, Contour, QuadratureRule, ResolventFactor};
use crate::lattice::{build_operator, Configuration, HoppingOperator, Topology};
use crate::spectral::{
    eigendecompose, eigenvalues_only, spectral_gap, trace_negative_from_eigenvalues, SpectralData,
};
use crate::{Error, Result};

/// Energy split into its elastic and electronic parts,
/// `E = (mu/2) sum (t_n - 1)^2 - 2 Tr(T_-)`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EnergyReport {
    pub total: f64,
    pub elastic: f64,
    pub electronic: f64,
    pub mu: f64,
}

/// Which evaluation route an operation should take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalPath {
    Eigen,
    /// Contour quadrature with the given nodes per edge; guarded by the
    /// perturbation radius `eta`.
    Contour { nodes_per_edge: usize },
}

fn elastic_energy(values: &[f64], mu: f64) -> f64 {
    0.5 * mu * values.iter().map(|t| (t - 1.0) * (t - 1.0)).sum::<f64>()
}

/// Total energy from a precomputed eigenvalue list.
pub fn energy_from_eigenvalues(
    config: &Configuration,
    eigenvalues: &[f64],
    mu: f64,
) -> EnergyReport {
    let elastic = elastic_energy(&config.values, mu);
    let electronic = -2.0 * trace_negative_from_eigenvalues(eigenvalues);
    EnergyReport {
        total: elastic + electronic,
        elastic,
        electronic,
        mu,
    }
}

/// Total Peierls energy of a configuration.
pub fn energy_total(config: &Configuration, mu: f64) -> Result<EnergyReport> {
    if mu <= 0.0 {
        return Err(Error::InvalidParams(format!("mu must be > 0, got {mu}")));
    }
    let op = build_operator(config);
    let vals = eigenvalues_only(&op);
    Ok(energy_from_eigenvalues(config, &vals, mu))
}

/// `config` shifted by `scale * h` bondwise.
pub fn perturbed(config: &Configuration, h: &[f64], scale: f64) -> Result<Configuration> {
    if h.len() != config.values.len() {
        return Err(Error::DimensionMismatch {
            expected: config.values.len(),
            got: h.len(),
        });
    }
    let values = config
        .values
        .iter()
        .zip(h)
        .map(|(t, hh)| t + scale * hh)
        .collect();
    Configuration::new(config.topology, values)
}

/// Hopping operator built from a perturbation sequence on the same topology.
pub fn perturbation_operator(topology: &Topology, h: &[f64]) -> Result<HoppingOperator> {
    if h.len() != topology.bonds() {
        return Err(Error::DimensionMismatch {
            expected: topology.bonds(),
            got: h.len(),
        });
    }
    Ok(match topology {
        Topology::Closed { sites } => HoppingOperator {
            dimension: *sites,
            off_diag: h[..sites - 1].to_vec(),
            corner: Some(h[sites - 1]),
        },
        Topology::Window { sites, .. } => HoppingOperator {
            dimension: *sites,
            off_diag: h.to_vec(),
            corner: None,
        },
    })
}

/// Energy difference `F_t(h) = (mu/2) sum (h_n + 2 t_n - 2) h_n
/// - 2 Tr((T+H)_- - T_-)`.
///
/// The eigendecomposition path is exact on finite chains and equals
/// `energy_total(t+h) - energy_total(t)` to rounding. The contour path is
/// only admitted while `max |h_n| <= eta`, the guard radius inherited from
/// the resolvent bounds.
pub fn energy_difference(
    config: &Configuration,
    h: &[f64],
    mu: f64,
    path: EvalPath,
) -> Result<f64> {
    if mu <= 0.0 {
        return Err(Error::InvalidParams(format!("mu must be > 0, got {mu}")));
    }
    if h.len() != config.values.len() {
        return Err(Error::DimensionMismatch {
            expected: config.values.len(),
            got: h.len(),
        });
    }
    let elastic: f64 = 0.5
        * mu
        * config
            .values
            .iter()
            .zip(h)
            .map(|(t, hh)| (hh + 2.0 * t - 2.0) * hh)
            .sum::<f64>();
    match path {
        EvalPath::Eigen => {
            let op = build_operator(config);
            let tr0 = trace_negative_from_eigenvalues(&eigenvalues_only(&op));
            let op1 = build_operator(&perturbed(config, h, 1.0)?);
            let tr1 = trace_negative_from_eigenvalues(&eigenvalues_only(&op1));
            Ok(elastic - 2.0 * (tr1 - tr0))
        }
        EvalPath::Contour { nodes_per_edge } => {
            let op = build_operator(config);
            let spec = eigendecompose(&op)?;
            let gap = spectral_gap(&spec, spec.default_zero_tol())?;
            let delta = match config.topology {
                Topology::Window { right_tail, .. } => Some(right_tail.params.delta),
                Topology::Closed { .. } => None,
            };
            let eta = contour::eta(gap.g, config.min_value(), delta);
            let hnorm = h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if hnorm > eta {
                return Err(Error::PerturbationTooLarge { norm: hnorm, eta });
            }
            let c = contour::build_contour(
                spec.eigenvalues[0],
                gap.g,
                nodes_per_edge,
                QuadratureRule::GaussLegendre,
            )?;
            let op1 = build_operator(&perturbed(config, h, 1.0)?);
            // Tr((T+H)_- - T_-) = -(1/2 i pi) \oint z Tr(R_{T+H} - R_T) dz
            let mut acc = Complex64::new(0.0, 0.0);
            for &(z, w) in &c.nodes {
                let r0 = ResolventFactor::new(&op, z)?.dense_inverse();
                let r1 = ResolventFactor::new(&op1, z)?.dense_inverse();
                let tr: Complex64 = (0..op.dimension).map(|i| r1[(i, i)] - r0[(i, i)]).sum();
                acc += w * z * tr;
            }
            let diff = -(acc / Complex64::new(0.0, 2.0 * std::f64::consts::PI));
            Ok(elastic - 2.0 * diff.re)
        }
    }
}

/// Bond entries of the strict negative projector, straight from the
/// eigenbasis (no dense matrix).
pub fn projector_bond_entries(
    spec: &SpectralData,
    zero_tol: f64,
    op: &HoppingOperator,
) -> Result<Vec<f64>> {
    for &l in &spec.eigenvalues {
        let a = l.abs();
        if a > zero_tol && a < 10.0 * zero_tol {
            return Err(Error::AmbiguousKernel {
                eigenvalue: l,
                zero_tol,
            });
        }
    }
    let d = op.dimension;
    let occ = spec.occupied(zero_tol);
    let nb = d - 1 + usize::from(op.corner.is_some());
    let mut out = vec![0.0; nb];
    for &a in &occ {
        let v = spec.eigenvectors.column(a);
        for k in 0..d - 1 {
            out[k] += v[k] * v[k + 1];
        }
        if op.corner.is_some() {
            out[d - 1] += v[d - 1] * v[0];
        }
    }
    Ok(out)
}

/// Euler–Lagrange residual `r_n = mu (t_n - 1) + 4 Gamma_{n,n+1}`;
/// identically zero exactly at critical points.
pub fn gradient_residual(config: &Configuration, mu: f64) -> Result<Vec<f64>> {
    let op = build_operator(config);
    let spec = eigendecompose(&op)?;
    let tol = spec.default_zero_tol();
    gradient_residual_with(config, &spec, &op, mu, tol)
}

/// Same with caller-provided spectral data (reuse across solver iterations).
pub fn gradient_residual_with(
    config: &Configuration,
    spec: &SpectralData,
    op: &HoppingOperator,
    mu: f64,
    zero_tol: f64,
) -> Result<Vec<f64>> {
    if mu <= 0.0 {
        return Err(Error::InvalidParams(format!("mu must be > 0, got {mu}")));
    }
    let gamma = projector_bond_entries(spec, zero_tol, op)?;
    Ok(config
        .values
        .iter()
        .zip(&gamma)
        .map(|(t, g)| mu * (t - 1.0) + 4.0 * g)
        .collect())
}

fn occupied_split(spec: &SpectralData, zero_tol: f64) -> (Vec<usize>, Vec<usize>) {
    let occ = spec.occupied(zero_tol);
    let rest = (0..spec.eigenvalues.len())
        .filter(|k| spec.eigenvalues[*k] >= -zero_tol)
        .collect();
    (occ, rest)
}

/// `V_occ^T A V_unocc` for a sparse bond operator `A`.
fn cross_block(
    spec: &SpectralData,
    occ: &[usize],
    unocc: &[usize],
    a_op: &HoppingOperator,
) -> DMatrix<f64> {
    let n = spec.source_dimension;
    let mut av = DMatrix::zeros(n, unocc.len());
    for (j, &b) in unocc.iter().enumerate() {
        let col = spec.eigenvectors.column(b);
        let av_col = crate::lattice::apply(a_op, col.as_slice()).expect("dimension");
        for i in 0..n {
            av[(i, j)] = av_col[i];
        }
    }
    let mut vocc = DMatrix::zeros(n, occ.len());
    for (i, &a) in occ.iter().enumerate() {
        vocc.set_column(i, &spec.eigenvectors.column(a));
    }
    vocc.transpose() * av
}

/// Hessian quadratic form
/// `H_t(h,k) = mu <h,k> + 2 sum_{a occ, b unocc}
///   (Hhat_ab Khat_ba + Khat_ab Hhat_ba) / (lambda_a - lambda_b)`,
/// the residue reduction of the contour form; cross-validated against
/// [`hessian_quadratic_contour`].
pub fn hessian_quadratic(config: &Configuration, h: &[f64], k: &[f64], mu: f64) -> Result<f64> {
    let op = build_operator(config);
    let spec = eigendecompose(&op)?;
    let tol = spec.default_zero_tol();
    hessian_quadratic_with(config, &spec, h, k, mu, tol)
}

/// Same with caller-provided spectral data.
pub fn hessian_quadratic_with(
    config: &Configuration,
    spec: &SpectralData,
    h: &[f64],
    k: &[f64],
    mu: f64,
    zero_tol: f64,
) -> Result<f64> {
    spectral_gap(spec, zero_tol)?;
    let h_op = perturbation_operator(&config.topology, h)?;
    let k_op = perturbation_operator(&config.topology, k)?;
    let (occ, unocc) = occupied_split(spec, zero_tol);
    let hhat = cross_block(spec, &occ, &unocc, &h_op);
    let khat = cross_block(spec, &occ, &unocc, &k_op);
    let mut elec = 0.0;
    for (i, &a) in occ.iter().enumerate() {
        for (j, &b) in unocc.iter().enumerate() {
            // Hhat_ab Khat_ba + Khat_ab Hhat_ba, with H, K symmetric
            elec += 2.0 * hhat[(i, j)] * khat[(i, j)] / (spec.eigenvalues[a] - spec.eigenvalues[b]);
        }
    }
    let dot: f64 = h.iter().zip(k).map(|(a, b)| a * b).sum();
    Ok(mu * dot + 2.0 * elec)
}

/// Linearized Euler–Lagrange operator applied to a perturbation:
/// `(L v)_n = mu v_n + 4 [ (1/2 i pi) \oint (z-T)^{-1} V (z-T)^{-1} dz ]_{n,n+1}`,
/// realized through the occupied/unoccupied double sum. Satisfies
/// `<w, L v> = H_t(w, v)`.
pub fn hessian_apply(config: &Configuration, v: &[f64], mu: f64) -> Result<Vec<f64>> {
    let op = build_operator(config);
    let spec = eigendecompose(&op)?;
    let tol = spec.default_zero_tol();
    hessian_apply_with(config, &spec, &op, v, mu, tol)
}

/// Same with caller-provided spectral data.
pub fn hessian_apply_with(
    config: &Configuration,
    spec: &SpectralData,
    op: &HoppingOperator,
    v: &[f64],
    mu: f64,
    zero_tol: f64,
) -> Result<Vec<f64>> {
    spectral_gap(spec, zero_tol)?;
    let v_op = perturbation_operator(&config.topology, v)?;
    let (occ, unocc) = occupied_split(spec, zero_tol);
    let n = spec.source_dimension;
    // G_ab = Vhat_ab / (lambda_a - lambda_b)
    let mut g = cross_block(spec, &occ, &unocc, &v_op);
    for (i, &a) in occ.iter().enumerate() {
        for (j, &b) in unocc.iter().enumerate() {
            g[(i, j)] /= spec.eigenvalues[a] - spec.eigenvalues[b];
        }
    }
    // M = V_occ G V_un^T + transpose; only bond entries are needed:
    // M_{p,q} + M_{q,p} = sum_b P[p,b] V_un[q,b] + P[q,b] V_un[p,b]
    let mut vocc = DMatrix::zeros(n, occ.len());
    for (i, &a) in occ.iter().enumerate() {
        vocc.set_column(i, &spec.eigenvectors.column(a));
    }
    let p = vocc * g;
    let bond_sum = |row_a: usize, row_b: usize| -> f64 {
        let mut s = 0.0;
        for (j, &b) in unocc.iter().enumerate() {
            s += p[(row_a, j)] * spec.eigenvectors[(row_b, b)]
                + p[(row_b, j)] * spec.eigenvectors[(row_a, b)];
        }
        s
    };
    let mut out = Vec::with_capacity(v.len());
    for k in 0..n - 1 {
        out.push(mu * v[k] + 4.0 * bond_sum(k, k + 1));
    }
    if op.corner.is_some() {
        out.push(mu * v[n - 1] + 4.0 * bond_sum(n - 1, 0));
    }
    Ok(out)
}

/// Hessian by direct contour quadrature of
/// `mu <h,k> + 2 Tr( (1/2 i pi) \oint H (z-T)^{-1} K (z-T)^{-1} dz )`.
/// Independent oracle for [`hessian_quadratic`].
pub fn hessian_quadratic_contour(
    config: &Configuration,
    h: &[f64],
    k: &[f64],
    mu: f64,
    c: &Contour,
) -> Result<f64> {
    let op = build_operator(config);
    let h_dense = perturbation_operator(&config.topology, h)?
        .to_dense()
        .map(Complex64::from);
    let k_dense = perturbation_operator(&config.topology, k)?
        .to_dense()
        .map(Complex64::from);
    let n = op.dimension;
    let mut acc = Complex64::new(0.0, 0.0);
    for &(z, w) in &c.nodes {
        let r = ResolventFactor::new(&op, z)?.dense_inverse();
        let x = &h_dense * &r;
        let y = &k_dense * &r;
        let mut tr = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                tr += x[(i, j)] * y[(j, i)];
            }
        }
        acc += w * tr;
    }
    let elec = acc / Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    let dot: f64 = h.iter().zip(k).map(|(a, b)| a * b).sum();
    Ok(mu * dot + 2.0 * elec.re)
}

/// Both sides of the trace identity
/// `4 Tr((1/2 i pi) \oint R H R K R z dz) = 2 Tr((1/2 i pi) \oint R H R K dz)`.
pub fn hessian_trace_identity(
    config: &Configuration,
    h: &[f64],
    k: &[f64],
    c: &Contour,
) -> Result<(f64, f64)> {
    let op = build_operator(config);
    let h_dense = perturbation_operator(&config.topology, h)?
        .to_dense()
        .map(Complex64::from);
    let k_dense = perturbation_operator(&config.topology, k)?
        .to_dense()
        .map(Complex64::from);
    let mut acc_z = Complex64::new(0.0, 0.0);
    let mut acc_flat = Complex64::new(0.0, 0.0);
    for &(z, w) in &c.nodes {
        let r = ResolventFactor::new(&op, z)?.dense_inverse();
        let rhrk = &r * &h_dense * &r * &k_dense;
        let tr_flat: Complex64 = rhrk.trace();
        let tr_z: Complex64 = (&rhrk * &r).trace();
        acc_z += w * z * tr_z;
        acc_flat += w * tr_flat;
    }
    let denom = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
    Ok((4.0 * (acc_z / denom).re, 2.0 * (acc_flat / denom).re))
}

/// Both sides of the linear-form identity
/// `Tr((1/2 i pi) \oint R H R z dz) = Tr(Gamma H)`.
pub fn linear_trace_identity(config: &Configuration, h: &[f64], c: &Contour) -> Result<(f64, f64)> {
    let op = build_operator(config);
    let h_dense = perturbation_operator(&config.topology, h)?
        .to_dense()
        .map(Complex64::from);
    let mut acc = Complex64::new(0.0, 0.0);
    for &(z, w) in &c.nodes {
        let r = ResolventFactor::new(&op, z)?.dense_inverse();
        let tr: Complex64 = (&r * &h_dense * &r).trace();
        acc += w * z * tr;
    }
    let lhs = (acc / Complex64::new(0.0, 2.0 * std::f64::consts::PI)).re;
    // reference: Tr(Gamma H) = 2 sum_n h_n Gamma_{n,n+1}
    let spec = eigendecompose(&op)?;
    let gamma = projector_bond_entries(&spec, spec.default_zero_tol(), &op)?;
    let rhs = 2.0 * gamma.iter().zip(h).map(|(g, hh)| g * hh).sum::<f64>();
    Ok((lhs, rhs))
}

/// Result of the cubic-remainder scaling fit.
#[derive(Debug, Clone)]
pub struct TaylorCheck {
    /// Fitted log-log slope of the remainder versus scale.
    pub exponent: f64,
    /// Remainder values per requested scale.
    pub remainders: Vec<f64>,
    /// Linear term `L_t(h)` (vanishes at critical points).
    pub linear_term: f64,
}

/// Fit the scaling exponent of the Taylor remainder
/// `R(s) = |F_t(s h) - s L_t(h) - (s^2/2) H_t(h,h)|`; cubic smoothness
/// shows as an exponent near 3. Scales whose remainder sits below the 1e-14
/// noise floor are excluded from the fit.
pub fn taylor_check(
    config: &Configuration,
    h: &[f64],
    mu: f64,
    scales: &[f64],
) -> Result<TaylorCheck> {
    if scales.len() < 2 {
        return Err(Error::InvalidParams("need at least two scales".into()));
    }
    let op = build_operator(config);
    let spec = eigendecompose(&op)?;
    let tol = spec.default_zero_tol();
    let residual = gradient_residual_with(config, &spec, &op, mu, tol)?;
    let linear_term: f64 = residual.iter().zip(h).map(|(r, hh)| r * hh).sum();
    let quad = hessian_quadratic_with(config, &spec, h, h, mu, tol)?;

    let mut remainders = Vec::with_capacity(scales.len());
    for &s in scales {
        let f = energy_difference(
            config,
            &h.iter().map(|x| s * x).collect::<Vec<_>>(),
            mu,
            EvalPath::Eigen,
        )?;
        remainders.push((f - s * linear_term - 0.5 * s * s * quad).abs());
    }
    let usable: Vec<(f64, f64)> = scales
        .iter()
        .zip(&remainders)
        .filter(|(_, &r)| r > 1e-14)
        .map(|(&s, &r)| (s.ln(), r.ln()))
        .collect();
    if usable.len() < 2 {
        return Err(Error::DegenerateFit);
    }
    let n = usable.len() as f64;
    let sx: f64 = usable.iter().map(|p| p.0).sum();
    let sy: f64 = usable.iter().map(|p| p.1).sum();
    let sxx: f64 = usable.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = usable.iter().map(|p| p.0 * p.1).sum();
    let exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(TaylorCheck {
        exponent,
        remainders,
        linear_term,
    })
}

/// Dense matrix of the linearized operator on bond space, columnwise from
/// [`hessian_apply_with`]; symmetric up to rounding.
pub fn hessian_dense(config: &Configuration, mu: f64) -> Result<DMatrix<f64>> {
    let op = build_operator(config);
    let spec = eigendecompose(&op)?;
    let tol = spec.default_zero_tol();
    let nb = config.values.len();
    let mut m = DMatrix::zeros(nb, nb);
    let mut basis = vec![0.0; nb];
    for j in 0..nb {
        basis.iter_mut().for_each(|x| *x = 0.0);
        basis[j] = 1.0;
        let col = hessian_apply_with(config, &spec, &op, &basis, mu, tol)?;
        m.set_column(j, &DVector::from_vec(col));
    }
    Ok(m)
}
