//! Self-consistent reference eigenvalues: Aitken Δ² extrapolation of `P3`
//! values on three consecutive fine levels.

use serde::{Deserialize, Serialize};

use crate::dg_assembly::{MaterialParams, PenaltyParams};
use crate::mesh::{generate, Domain};
use crate::{Error, Result};

use super::{dg_spectrum, LevelRange};

/// Degree of the reference discretization.
pub const REFERENCE_DEGREE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub value: f64,
    pub uncertainty: f64,
    /// The sequence was not monotone and contracting; `value` is the finest
    /// entry.
    pub fallback: bool,
    /// A neighbouring reference lies closer than ten uncertainties.
    pub crossing: bool,
}

/// Extrapolated limit of `s[0], s[1], s[2]` (coarse to fine).
///
/// Falls back to `s[2]` with uncertainty `|s[2] − s[1]|` unless the
/// increments have equal sign and shrink.
pub fn aitken(s: [f64; 3]) -> ReferenceValue {
    let d1 = s[1] - s[0];
    let d2 = s[2] - s[1];
    let denom = d2 - d1;
    if d1 * d2 > 0.0 && d2.abs() < d1.abs() && denom != 0.0 {
        // same as (s0 s2 − s1²)/(s0 + s2 − 2 s1), without the cancellation
        let value = s[2] - d2 * d2 / denom;
        if value.is_finite() {
            return ReferenceValue {
                value,
                uncertainty: (value - s[2]).abs(),
                fallback: false,
                crossing: false,
            };
        }
    }
    ReferenceValue {
        value: s[2],
        uncertainty: d2.abs(),
        fallback: true,
        crossing: false,
    }
}

/// Reference `ω_1..ω_nev` from `P3` on the three finest levels of `levels`.
/// Rigid modes are removed before extrapolation; identity across levels is
/// positional.
pub fn reference_eigenvalues(
    domain: Domain,
    mat: &MaterialParams,
    pen: &PenaltyParams,
    nev: usize,
    levels: LevelRange,
    seed: u64,
) -> Result<Vec<ReferenceValue>> {
    if levels.len() < 3 {
        return Err(Error::Config(format!(
            "reference needs three levels, got {levels}"
        )));
    }
    let mut seqs: Vec<[f64; 3]> = vec![[0.0; 3]; nev];
    for (slot, level) in (levels.max - 2..=levels.max).enumerate() {
        let mesh = generate(domain, level);
        let spec = dg_spectrum(&mesh, REFERENCE_DEGREE, mat, pen, nev, seed)?;
        let expected = crate::eigensolve::rigid_mode_count(domain.dim());
        if spec.rigid != expected {
            return Err(Error::RigidModeCount {
                expected,
                found: spec.rigid,
            });
        }
        if spec.omegas.len() < nev {
            return Err(Error::NotConverged {
                iterations: 0,
                converged: spec.omegas.len(),
                wanted: nev,
            });
        }
        for (j, seq) in seqs.iter_mut().enumerate() {
            seq[slot] = spec.omegas[j];
        }
    }
    let mut refs: Vec<ReferenceValue> = seqs.into_iter().map(aitken).collect();
    mark_crossings(&mut refs);
    Ok(refs)
}

/// Flags entries whose gap to a neighbour is below ten times the larger
/// uncertainty of the two.
pub fn mark_crossings(refs: &mut [ReferenceValue]) {
    for j in 1..refs.len() {
        let gap = (refs[j].value - refs[j - 1].value).abs();
        if gap < 10.0 * refs[j].uncertainty.max(refs[j - 1].uncertainty) {
            refs[j].crossing = true;
            refs[j - 1].crossing = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aitken_example() {
        let r = aitken([2.0, 1.9, 1.875]);
        let direct = (2.0 * 1.875 - 1.9f64.powi(2)) / (2.0 + 1.875 - 2.0 * 1.9);
        assert!((r.value - direct).abs() < 1e-12);
        assert!((r.value - 1.866_666_666_666_7).abs() < 1e-9);
        assert!((r.uncertainty - (1.875 - direct).abs()).abs() < 1e-12);
        assert!(!r.fallback);
    }

    #[test]
    fn constant_sequence_falls_back() {
        let r = aitken([1.5, 1.5, 1.5]);
        assert_eq!(r.value, 1.5);
        assert_eq!(r.uncertainty, 0.0);
        assert!(r.fallback);
    }

    #[test]
    fn non_monotone_and_expanding_sequences_fall_back() {
        let r = aitken([1.0, 1.2, 1.1]);
        assert!(r.fallback);
        assert_eq!(r.value, 1.1);
        assert!((r.uncertainty - 0.1).abs() < 1e-12);
        let r = aitken([1.0, 1.1, 1.3]);
        assert!(r.fallback);
        assert_eq!(r.value, 1.3);
    }

    #[test]
    fn geometric_sequence_is_extrapolated_exactly() {
        // s_l = 3 + 0.5 * 4^-l
        let s = [3.0 + 0.5, 3.0 + 0.125, 3.0 + 0.031_25];
        let r = aitken(s);
        assert!((r.value - 3.0).abs() < 1e-14);
    }

    #[test]
    fn close_neighbours_are_marked() {
        let mk = |value, uncertainty| ReferenceValue {
            value,
            uncertainty,
            fallback: false,
            crossing: false,
        };
        let mut refs = vec![mk(1.0, 1e-6), mk(1.000_001, 1e-6), mk(2.0, 1e-6)];
        mark_crossings(&mut refs);
        assert!(refs[0].crossing && refs[1].crossing);
        assert!(!refs[2].crossing);
    }

    #[test]
    fn too_few_levels_is_a_config_error() {
        let mat = MaterialParams::new(1.0, 1.0).unwrap();
        let pen = PenaltyParams::default();
        let err = reference_eigenvalues(Domain::Square, &mat, &pen, 2, LevelRange::new(1, 2).unwrap(), 0);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn square_reference_matches_finest_value() {
        let mat = MaterialParams::new(1.0, 1.0).unwrap();
        let pen = PenaltyParams::default();
        let refs = reference_eigenvalues(Domain::Square, &mat, &pen, 2, LevelRange::new(0, 2).unwrap(), 0).unwrap();
        assert_eq!(refs.len(), 2);
        for r in &refs {
            assert!(r.value > 0.0);
            assert!(r.uncertainty < 1e-2 * r.value, "{r:?}");
        }
    }
}
