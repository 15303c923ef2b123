//! Combining a syllable vector `s` with its word vector `w` into the single
//! vector the sequence models consume.

use crate::error::{Error, Result};
use crate::nn::dot;

/// The four ways to combine syllable and word embeddings.
///
/// * `Se`: syllable vector alone.
/// * `Swc`: syllable and word concatenated.
/// * `Asw`: elementwise sum.
/// * `Cswp`: syllable, word, and the projection of the syllable onto the
///   word direction, concatenated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompositionScheme {
    Se,
    Swc,
    Asw,
    Cswp,
}

impl CompositionScheme {
    pub const ALL: [CompositionScheme; 4] = [
        CompositionScheme::Se,
        CompositionScheme::Swc,
        CompositionScheme::Asw,
        CompositionScheme::Cswp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CompositionScheme::Se => "se",
            CompositionScheme::Swc => "swc",
            CompositionScheme::Asw => "asw",
            CompositionScheme::Cswp => "cswp",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name.to_lowercase().as_str() {
            "se" => Ok(CompositionScheme::Se),
            "swc" => Ok(CompositionScheme::Swc),
            "asw" => Ok(CompositionScheme::Asw),
            "cswp" => Ok(CompositionScheme::Cswp),
            other => Err(Error::invalid(format!(
                "unknown composition scheme {other:?}, expected se|swc|asw|cswp"
            ))),
        }
    }
}

/// Output width of a scheme when both embedding levels have width `v`.
pub fn composed_dim(scheme: CompositionScheme, v: usize) -> usize {
    match scheme {
        CompositionScheme::Se => v,
        CompositionScheme::Swc => 2 * v,
        CompositionScheme::Asw => v,
        CompositionScheme::Cswp => 3 * v,
    }
}

/// Orthogonal projection of `s` onto the line spanned by `w`:
/// `(s . w / |w|^2) w`. Errors if `w` has zero norm.
pub fn project(s: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if s.len() != w.len() || s.is_empty() {
        return Err(Error::shape(format!(
            "projection needs equal non-empty dims, got {} and {}",
            s.len(),
            w.len()
        )));
    }
    let ww = dot(w, w);
    if ww == 0.0 {
        return Err(Error::invalid("cannot project onto a zero-norm vector"));
    }
    let scale = dot(s, w) / ww;
    Ok(w.iter().map(|x| scale * x).collect())
}

/// Applies a composition scheme. For `Cswp` a zero-norm word vector yields a
/// zero projection block instead of an error.
pub fn compose(scheme: CompositionScheme, s: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    if s.len() != w.len() || s.is_empty() {
        return Err(Error::shape(format!(
            "composition needs equal non-empty dims, got {} and {}",
            s.len(),
            w.len()
        )));
    }
    Ok(match scheme {
        CompositionScheme::Se => s.to_vec(),
        CompositionScheme::Swc => {
            let mut out = Vec::with_capacity(2 * s.len());
            out.extend_from_slice(s);
            out.extend_from_slice(w);
            out
        }
        CompositionScheme::Asw => s.iter().zip(w).map(|(a, b)| a + b).collect(),
        CompositionScheme::Cswp => {
            let proj = if dot(w, w) == 0.0 {
                vec![0.0; s.len()]
            } else {
                project(s, w)?
            };
            let mut out = Vec::with_capacity(3 * s.len());
            out.extend_from_slice(s);
            out.extend_from_slice(w);
            out.extend_from_slice(&proj);
            out
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn norm(v: &[f64]) -> f64 {
        dot(v, v).sqrt()
    }

    #[test]
    fn cswp_worked_example() {
        let s = [1.0, 0.0];
        let w = [0.0, 2.0];
        let out = compose(CompositionScheme::Cswp, &s, &w).unwrap();
        assert_eq!(out, vec![1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn scheme_widths() {
        let s = [0.5; 4];
        let w = [0.25; 4];
        for scheme in CompositionScheme::ALL {
            let out = compose(scheme, &s, &w).unwrap();
            assert_eq!(out.len(), composed_dim(scheme, 4));
        }
        assert_eq!(compose(CompositionScheme::Asw, &s, &w).unwrap(), vec![0.75; 4]);
    }

    #[test]
    fn zero_word_vector_behavior() {
        let s = [1.0, 2.0];
        let zero = [0.0, 0.0];
        assert!(project(&s, &zero).is_err());
        let out = compose(CompositionScheme::Cswp, &s, &zero).unwrap();
        assert_eq!(&out[4..], &[0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(project(&[1.0], &[1.0, 2.0]).is_err());
        assert!(compose(CompositionScheme::Se, &[], &[]).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_contracting(
            s in proptest::collection::vec(-10.0f64..10.0, 2..8),
            w_seed in proptest::collection::vec(-10.0f64..10.0, 2..8),
        ) {
            let n = s.len().min(w_seed.len());
            let s = &s[..n];
            let mut w = w_seed[..n].to_vec();
            if norm(&w) < 1e-6 {
                w[0] += 1.0;
            }
            let p = project(s, &w).unwrap();
            let pp = project(&p, &w).unwrap();
            for (a, b) in p.iter().zip(&pp) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
            prop_assert!(norm(&p) <= norm(s) * (1.0 + 1e-12) + 1e-12);
        }
    }
}
