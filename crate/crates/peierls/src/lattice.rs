//! Hopping-amplitude configurations on chains and rings, and their matrix
//! representation.
//!
//! Index conventions, fixed once for the whole crate:
//!
//! * Sites carry a global integer index `n`. Bond `n` couples sites `n` and
//!   `n + 1`; its amplitude is `t_n`. Parity `(-1)^n` always refers to the
//!   global bond index, so staggered patterns stay well defined on windows
//!   with a nonzero first index.
//! * A closed ring of `L` sites has sites `0..L-1` and `L` bond values; the
//!   last bond `t_{L-1}` couples site `L-1` back to site `0` (the matrix
//!   corner entry).
//! * A window of `L` sites starting at `first_index` has `L - 1` bond values
//!   and is represented by the open tridiagonal truncation. Amplitudes
//!   outside the window are understood to continue as the dimerized tail
//!   patterns stored in the topology.
//! * Matrix row `k` (0-based) corresponds to global site `first_index + k`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Positivity floor for solver-facing configurations.
pub const TAU_MIN: f64 = 1e-8;

/// Sign selecting one of the two dimerized patterns `t^+` / `t^-`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// The pattern obtained by shifting the chain by one site.
    pub fn flipped(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Mean amplitude `W` and distortion `delta` of a 2-periodic pattern
/// `t_n = W ± (-1)^n delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerizedParams {
    pub w: f64,
    pub delta: f64,
}

impl DimerizedParams {
    pub fn new(w: f64, delta: f64) -> Result<Self> {
        if !w.is_finite() || !delta.is_finite() {
            return Err(Error::InvalidParams("W and delta must be finite".into()));
        }
        if w <= 0.0 {
            return Err(Error::InvalidParams(format!("W must be > 0, got {w}")));
        }
        if delta < 0.0 || delta >= w {
            return Err(Error::InvalidParams(format!(
                "delta must satisfy 0 <= delta < W, got delta={delta}, W={w}"
            )));
        }
        Ok(Self { w, delta })
    }

    /// Amplitude of bond `n` in the pattern selected by `sign`.
    pub fn amplitude(&self, sign: Sign, n: i64) -> f64 {
        self.w + sign.factor() * parity(n) * self.delta
    }
}

/// Dimerized tail attached to one side of a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tail {
    pub params: DimerizedParams,
    pub sign: Sign,
}

impl Tail {
    pub fn new(params: DimerizedParams, sign: Sign) -> Self {
        Self { params, sign }
    }

    pub fn amplitude(&self, n: i64) -> f64 {
        self.params.amplitude(self.sign, n)
    }
}

/// Chain topology: a closed ring or a windowed segment of the infinite chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    Closed {
        sites: usize,
    },
    Window {
        first_index: i64,
        sites: usize,
        left_tail: Tail,
        right_tail: Tail,
    },
}

impl Topology {
    /// Closed ring with an even number of sites (the core API case).
    pub fn closed(sites: usize) -> Result<Self> {
        if sites < 4 || sites % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "closed chains require even L >= 4, got {sites}"
            )));
        }
        Ok(Topology::Closed { sites })
    }

    /// Closed ring of any size >= 3. Odd rings frustrate dimerization and are
    /// only meaningful for kink studies; most operations reject them.
    pub fn ring(sites: usize) -> Result<Self> {
        if sites < 3 {
            return Err(Error::InvalidParams(format!(
                "rings require L >= 3, got {sites}"
            )));
        }
        Ok(Topology::Closed { sites })
    }

    pub fn window(first_index: i64, sites: usize, left_tail: Tail, right_tail: Tail) -> Result<Self> {
        if sites < 4 {
            return Err(Error::InvalidParams(format!(
                "windows require L >= 4 sites, got {sites}"
            )));
        }
        Ok(Topology::Window {
            first_index,
            sites,
            left_tail,
            right_tail,
        })
    }

    /// Number of sites, i.e. the matrix dimension.
    pub fn sites(&self) -> usize {
        match *self {
            Topology::Closed { sites } => sites,
            Topology::Window { sites, .. } => sites,
        }
    }

    /// Number of bond values carried by a configuration on this topology.
    pub fn bonds(&self) -> usize {
        match *self {
            Topology::Closed { sites } => sites,
            Topology::Window { sites, .. } => sites - 1,
        }
    }

    /// Global site index of matrix row 0.
    pub fn first_index(&self) -> i64 {
        match *self {
            Topology::Closed { .. } => 0,
            Topology::Window { first_index, .. } => first_index,
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, Topology::Closed { .. })
    }

    /// Global bond index of the k-th stored bond value.
    pub fn bond_index(&self, k: usize) -> i64 {
        self.first_index() + k as i64
    }
}

/// `(-1)^n` for a global index `n`.
pub fn parity(n: i64) -> f64 {
    if n.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A finite family of hopping amplitudes on a given topology.
///
/// `values[k]` is the amplitude of global bond `topology.bond_index(k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub topology: Topology,
    pub values: Vec<f64>,
}

impl Configuration {
    pub fn new(topology: Topology, values: Vec<f64>) -> Result<Self> {
        if values.len() != topology.bonds() {
            return Err(Error::DimensionMismatch {
                expected: topology.bonds(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("bond values must be finite".into()));
        }
        Ok(Self { topology, values })
    }

    /// Dimerized ring `t_n = W + sign (-1)^n delta` on `sites` sites.
    pub fn dimerized_ring(params: DimerizedParams, sign: Sign, sites: usize) -> Result<Self> {
        dimerized_configuration(params, sign, Topology::closed(sites)?)
    }

    /// Dimerized window with both tails continuing the in-window pattern.
    pub fn dimerized_window(
        params: DimerizedParams,
        sign: Sign,
        first_index: i64,
        sites: usize,
    ) -> Result<Self> {
        let tail = Tail::new(params, sign);
        dimerized_configuration(params, sign, Topology::window(first_index, sites, tail, tail)?)
    }

    /// Sharp heteroclinic junction: bonds follow `t^-` for `n < 0` and `t^+`
    /// for `n >= 0`, on a window of `2*half_sites - 1` sites centered at the
    /// junction. `half_sites` must be even so that both terminal bonds are
    /// strong; this keeps the truncated spectrum free of spurious edge modes
    /// and makes the junction zero mode an exact eigenvector.
    pub fn sharp_junction(params: DimerizedParams, half_sites: usize) -> Result<Self> {
        if half_sites < 4 || half_sites % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "half_sites must be even and >= 4, got {half_sites}"
            )));
        }
        let h = half_sites as i64;
        let first_index = -(h - 1);
        let sites = 2 * half_sites - 1;
        let left = Tail::new(params, Sign::Minus);
        let right = Tail::new(params, Sign::Plus);
        let topology = Topology::window(first_index, sites, left, right)?;
        let values = (0..topology.bonds())
            .map(|k| {
                let n = topology.bond_index(k);
                if n < 0 {
                    left.amplitude(n)
                } else {
                    right.amplitude(n)
                }
            })
            .collect();
        Configuration::new(topology, values)
    }

    /// Smallest bond value.
    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest bond value in absolute value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Whether all bonds satisfy the solver positivity floor.
    pub fn is_solver_positive(&self) -> bool {
        self.min_value() >= TAU_MIN
    }

    /// Global bond index for each stored value.
    pub fn bond_indices(&self) -> impl Iterator<Item = i64> + '_ {
        let t = self.topology;
        (0..self.values.len()).map(move |k| t.bond_index(k))
    }
}

/// Real symmetric hopping matrix: zero diagonal, `off_diag[k]` on the
/// sub/super diagonal, and an optional ring corner entry coupling the first
/// and last sites.
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingOperator {
    pub dimension: usize,
    pub off_diag: Vec<f64>,
    pub corner: Option<f64>,
}

impl HoppingOperator {
    /// Dense symmetric matrix representation.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let d = self.dimension;
        let mut m = nalgebra::DMatrix::zeros(d, d);
        for (k, &t) in self.off_diag.iter().enumerate() {
            m[(k, k + 1)] = t;
            m[(k + 1, k)] = t;
        }
        if let Some(c) = self.corner {
            m[(0, d - 1)] = c;
            m[(d - 1, 0)] = c;
        }
        m
    }

    /// Upper bound on the operator norm (twice the largest amplitude).
    pub fn norm_bound(&self) -> f64 {
        let mut m = self.off_diag.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        if let Some(c) = self.corner {
            m = m.max(c.abs());
        }
        2.0 * m
    }

    /// Entries of a matrix at the bond positions of this operator:
    /// `(k, k+1)` for each chain bond, plus `(dim-1, 0)` for a ring corner.
    pub fn bond_entries(&self, m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
        let d = self.dimension;
        let mut out: Vec<f64> = (0..d - 1).map(|k| m[(k, k + 1)]).collect();
        if self.corner.is_some() {
            out.push(m[(d - 1, 0)]);
        }
        out
    }
}

/// Build the dimerized configuration `t_n = W + sign (-1)^n delta` on the
/// given topology, using global bond indices.
pub fn dimerized_configuration(
    params: DimerizedParams,
    sign: Sign,
    topology: Topology,
) -> Result<Configuration> {
    // Re-validate so stale params cannot sneak past the type invariant.
    let params = DimerizedParams::new(params.w, params.delta)?;
    let values = (0..topology.bonds())
        .map(|k| params.amplitude(sign, topology.bond_index(k)))
        .collect();
    Configuration::new(topology, values)
}

/// Assemble the hopping matrix of a configuration (tridiagonal, plus the
/// ring corner for closed topology).
pub fn build_operator(config: &Configuration) -> HoppingOperator {
    match config.topology {
        Topology::Closed { sites } => HoppingOperator {
            dimension: sites,
            off_diag: config.values[..sites - 1].to_vec(),
            corner: Some(config.values[sites - 1]),
        },
        Topology::Window { sites, .. } => HoppingOperator {
            dimension: sites,
            off_diag: config.values.clone(),
            corner: None,
        },
    }
}

/// Matrix-vector product `T v` in O(L) time.
pub fn apply(op: &HoppingOperator, v: &[f64]) -> Result<Vec<f64>> {
    let d = op.dimension;
    if v.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: v.len(),
        });
    }
    let mut out = vec![0.0; d];
    for (k, &t) in op.off_diag.iter().enumerate() {
        out[k] += t * v[k + 1];
        out[k + 1] += t * v[k];
    }
    if let Some(c) = op.corner {
        out[0] += c * v[d - 1];
        out[d - 1] += c * v[0];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimerized_zero_distortion_is_uniform() {
        let p = DimerizedParams::new(1.0, 0.0).unwrap();
        let c = Configuration::dimerized_ring(p, Sign::Plus, 6).unwrap();
        assert!(c.values.iter().all(|&t| t == 1.0));
    }

    #[test]
    fn dimerized_plus_pattern() {
        let p = DimerizedParams::new(1.0, 0.2).unwrap();
        let tail = Tail::new(p, Sign::Plus);
        let topo = Topology::window(0, 5, tail, tail).unwrap();
        let c = dimerized_configuration(p, Sign::Plus, topo).unwrap();
        let expect = [1.2, 0.8, 1.2, 0.8];
        for (a, b) in c.values.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dimerized_minus_pattern() {
        let p = DimerizedParams::new(1.0, 0.2).unwrap();
        let tail = Tail::new(p, Sign::Minus);
        let topo = Topology::window(0, 5, tail, tail).unwrap();
        let c = dimerized_configuration(p, Sign::Minus, topo).unwrap();
        let expect = [0.8, 1.2, 0.8, 1.2];
        for (a, b) in c.values.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(DimerizedParams::new(0.0, 0.0).is_err());
        assert!(DimerizedParams::new(1.0, 1.0).is_err());
        assert!(DimerizedParams::new(1.0, -0.1).is_err());
        assert!(DimerizedParams::new(1.0, 0.999).is_ok());
    }

    #[test]
    fn closed_topology_rejects_odd_and_tiny() {
        assert!(Topology::closed(2).is_err());
        assert!(Topology::closed(7).is_err());
        assert!(Topology::closed(4).is_ok());
        // odd rings only through the explicit ring constructor
        assert!(Topology::ring(101).is_ok());
    }

    #[test]
    fn build_two_site_open_chain() {
        let p = DimerizedParams::new(1.0, 0.0).unwrap();
        let tail = Tail::new(p, Sign::Plus);
        let topo = Topology::window(0, 4, tail, tail).unwrap();
        let c = Configuration::new(topo, vec![1.0, 1.0, 1.0]).unwrap();
        let op = build_operator(&c);
        let dense = op.to_dense();
        assert_eq!(dense[(0, 1)], 1.0);
        assert_eq!(dense[(1, 0)], 1.0);
        assert_eq!(dense[(0, 0)], 0.0);
        assert_eq!(dense[(0, 2)], 0.0);
    }

    #[test]
    fn closed_ring_corner_entries() {
        let topo = Topology::closed(4).unwrap();
        let c = Configuration::new(topo, vec![0.3, 0.7, 1.1, 1.9]).unwrap();
        let op = build_operator(&c);
        let dense = op.to_dense();
        assert_eq!(dense[(0, 3)], 1.9);
        assert_eq!(dense[(3, 0)], 1.9);
        assert_eq!(dense[(0, 1)], 0.3);
        // exact symmetry, bit for bit
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(dense[(i, j)].to_bits(), dense[(j, i)].to_bits());
            }
        }
    }

    #[test]
    fn window_build_uses_global_parity() {
        let p = DimerizedParams::new(1.0, 0.2).unwrap();
        let c = Configuration::dimerized_window(p, Sign::Plus, 0, 3 + 1).unwrap();
        let op = build_operator(&c);
        assert!((op.off_diag[0] - 1.2).abs() < 1e-15);
        assert!((op.off_diag[1] - 0.8).abs() < 1e-15);
        // shifted window sees the opposite parity
        let c2 = Configuration::dimerized_window(p, Sign::Plus, 1, 4).unwrap();
        let op2 = build_operator(&c2);
        assert!((op2.off_diag[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn apply_matches_hand_computation() {
        let p = DimerizedParams::new(1.0, 0.0).unwrap();
        let tail = Tail::new(p, Sign::Plus);
        let topo = Topology::window(0, 4, tail, tail).unwrap();
        let c = Configuration::new(topo, vec![1.0, 1.0, 1.0]).unwrap();
        let op = build_operator(&c);
        let out = apply(&op, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(out, vec![0.0, 1.0, 0.0, 0.0]);
        let zero = apply(&op, &[0.0; 4]).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn apply_ring_row_sums() {
        let topo = Topology::closed(4).unwrap();
        let c = Configuration::new(topo, vec![1.0; 4]).unwrap();
        let op = build_operator(&c);
        let out = apply(&op, &[1.0; 4]).unwrap();
        for x in out {
            assert!((x - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn apply_rejects_dimension_mismatch() {
        let topo = Topology::closed(4).unwrap();
        let c = Configuration::new(topo, vec![1.0; 4]).unwrap();
        let op = build_operator(&c);
        assert!(matches!(
            apply(&op, &[1.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn shift_by_one_swaps_sign() {
        let p = DimerizedParams::new(1.3, 0.4).unwrap();
        let minus = Configuration::dimerized_window(p, Sign::Minus, 1, 10).unwrap();
        // t^+ evaluated at n+1 equals t^- evaluated at n+1 shifted range
        for (k, v) in minus.values.iter().enumerate() {
            let n = 1 + k as i64;
            assert!((v - p.amplitude(Sign::Minus, n)).abs() < 1e-15);
            assert!((p.amplitude(Sign::Plus, n + 1) - p.amplitude(Sign::Minus, n)).abs() < 1e-15);
        }
    }

    #[test]
    fn sharp_junction_geometry() {
        let p = DimerizedParams::new(1.0, 0.2).unwrap();
        let c = Configuration::sharp_junction(p, 100).unwrap();
        assert_eq!(c.topology.sites(), 199);
        assert_eq!(c.topology.first_index(), -99);
        // strong bonds at both ends and at the junction
        assert!((c.values[0] - 1.2).abs() < 1e-15);
        assert!((c.values[c.values.len() - 1] - 1.2).abs() < 1e-15);
        let k_m1 = (-1i64 - c.topology.first_index()) as usize;
        let k_0 = (-c.topology.first_index()) as usize;
        assert!((c.values[k_m1] - 1.2).abs() < 1e-15);
        assert!((c.values[k_0] - 1.2).abs() < 1e-15);
    }
}
