//! Latent spaces and boundary handling for proposed states.
//!
//! Bounded spaces are hypercubes `[-h, h]^dim`. Two boundary transforms are
//! provided: the literal piecewise rule ([`wrap_eq2`]) and a true torus
//! ([`wrap_torus`]). The two agree on `[-1, 1]` and `(1, 2)` but not on
//! `(-2, -1)`, where the literal rule is not the mirror image of the positive
//! side. The torus keeps additive symmetric proposals symmetric and is the
//! default.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A point in a latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVector(pub Vec<f64>);

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Self {
        LatentVector(values)
    }

    pub fn zeros(dim: usize) -> Self {
        LatentVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn squared_distance(&self, other: &LatentVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

impl From<Vec<f64>> for LatentVector {
    fn from(values: Vec<f64>) -> Self {
        LatentVector(values)
    }
}

impl AsRef<[f64]> for LatentVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bounds {
    Unbounded,
    /// `[-half_width, half_width]^dim`; `half_width = 1` is the unit hypercube.
    Hypercube { half_width: f64 },
}

impl Bounds {
    pub const UNIT: Bounds = Bounds::Hypercube { half_width: 1.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrapMode {
    /// The piecewise rule applied literally, per coordinate.
    Eq2Literal,
    Torus,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentSpace {
    pub space_id: String,
    pub dim: usize,
    pub bounds: Bounds,
    pub wrap_mode: WrapMode,
}

impl LatentSpace {
    pub fn new(
        space_id: impl Into<String>,
        dim: usize,
        bounds: Bounds,
        wrap_mode: WrapMode,
    ) -> Result<Self> {
        let space = LatentSpace {
            space_id: space_id.into(),
            dim,
            bounds,
            wrap_mode,
        };
        space.validate()?;
        Ok(space)
    }

    /// Unit hypercube with torus wrapping.
    pub fn unit_hypercube(space_id: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new(space_id, dim, Bounds::UNIT, WrapMode::Torus)
    }

    pub fn unbounded(space_id: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new(space_id, dim, Bounds::Unbounded, WrapMode::None)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("space.dim", "must be at least 1"));
        }
        match self.bounds {
            Bounds::Unbounded if self.wrap_mode != WrapMode::None => Err(Error::config(
                "space.wrap_mode",
                "wrapping requires a bounded space",
            )),
            Bounds::Hypercube { half_width } if !(half_width.is_finite() && half_width > 0.0) => {
                Err(Error::config(
                    "space.bounds.half_width",
                    "must be positive and finite",
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn half_width(&self) -> Option<f64> {
        match self.bounds {
            Bounds::Unbounded => None,
            Bounds::Hypercube { half_width } => Some(half_width),
        }
    }

    /// Checks dimension and finiteness, and for bounded spaces that every
    /// coordinate lies inside the box.
    pub fn check_state(&self, z: &LatentVector) -> Result<()> {
        check_dim(self.dim, z.dim())?;
        if !z.is_finite() {
            return Err(Error::InvalidState("non-finite coordinate".into()));
        }
        if let Some(h) = self.half_width() {
            if z.0.iter().any(|v| v.abs() > h) {
                return Err(Error::InvalidState(format!(
                    "coordinate outside [-{h}, {h}]"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, z: &LatentVector) -> bool {
        self.check_state(z).is_ok()
    }

    /// Applies this space's boundary transform to a raw (possibly out of
    /// bounds) point.
    pub fn apply_boundary(&self, z: LatentVector) -> Result<LatentVector> {
        check_dim(self.dim, z.dim())?;
        let h = match (self.half_width(), self.wrap_mode) {
            (_, WrapMode::None) | (None, _) => {
                if !z.is_finite() {
                    return Err(Error::InvalidState("non-finite coordinate".into()));
                }
                return Ok(z);
            }
            (Some(h), _) => h,
        };
        let coord = match self.wrap_mode {
            WrapMode::Torus => wrap_torus_coord,
            WrapMode::Eq2Literal => wrap_eq2_coord,
            WrapMode::None => unreachable!(),
        };
        let values = z
            .0
            .iter()
            .map(|&v| coord(v / h).map(|w| w * h))
            .collect::<Result<Vec<_>>>()?;
        Ok(LatentVector(values))
    }

    /// Draws from the space's base distribution: uniform on the box, or
    /// standard normal when unbounded.
    pub fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R) -> LatentVector {
        let values = match self.half_width() {
            Some(h) => (0..self.dim).map(|_| rng.random_range(-h..=h)).collect(),
            None => (0..self.dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
        };
        LatentVector(values)
    }
}

fn non_finite(z: f64) -> Error {
    Error::InvalidState(format!("non-finite coordinate {z}"))
}

/// The literal piecewise rule on one unit-scale coordinate, re-applied until
/// the value lands in `[-1, 1]`.
pub fn wrap_eq2_coord(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(non_finite(z));
    }
    let mut v = z;
    while v.abs() > 1.0 {
        v = -v.signum() * (1.0 - (v - v.floor()));
    }
    Ok(v)
}

/// Torus wrap on one unit-scale coordinate: `((z + 1) mod 2) - 1` for
/// `|z| > 1`, identity otherwise.
pub fn wrap_torus_coord(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(non_finite(z));
    }
    if z.abs() <= 1.0 {
        return Ok(z);
    }
    Ok((z + 1.0).rem_euclid(2.0) - 1.0)
}

/// Literal piecewise wrap of a point in the unit hypercube.
pub fn wrap_eq2(z: &LatentVector) -> Result<LatentVector> {
    z.0.iter()
        .map(|&v| wrap_eq2_coord(v))
        .collect::<Result<Vec<_>>>()
        .map(LatentVector)
}

/// Torus wrap of a point in the unit hypercube.
pub fn wrap_torus(z: &LatentVector) -> Result<LatentVector> {
    z.0.iter()
        .map(|&v| wrap_torus_coord(v))
        .collect::<Result<Vec<_>>>()
        .map(LatentVector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn eq2_hand_evaluated() {
        assert!(close(wrap_eq2_coord(1.2).unwrap(), -0.8));
        assert_eq!(wrap_eq2_coord(0.3).unwrap(), 0.3);
        assert!(close(wrap_eq2_coord(-1.2).unwrap(), 0.2));
        assert!(close(wrap_eq2_coord(3.4).unwrap(), -0.6));
    }

    #[test]
    fn torus_examples() {
        assert!(close(wrap_torus_coord(1.2).unwrap(), -0.8));
        assert!(close(wrap_torus_coord(-1.2).unwrap(), 0.8));
        assert!(close(wrap_torus_coord(3.4).unwrap(), -0.6));
        assert_eq!(wrap_torus_coord(1.0).unwrap(), 1.0);
        assert_eq!(wrap_torus_coord(-1.0).unwrap(), -1.0);
    }

    #[test]
    fn non_finite_is_invalid_state() {
        for v in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            assert!(matches!(wrap_eq2_coord(v), Err(Error::InvalidState(_))));
            assert!(matches!(wrap_torus_coord(v), Err(Error::InvalidState(_))));
        }
    }

    #[test]
    fn space_invariants() {
        assert!(LatentSpace::new("s", 0, Bounds::Unbounded, WrapMode::None).is_err());
        assert!(LatentSpace::new("s", 2, Bounds::Unbounded, WrapMode::Torus).is_err());
        assert!(LatentSpace::new("s", 2, Bounds::UNIT, WrapMode::Eq2Literal).is_ok());
        assert!(LatentSpace::new("s", 2, Bounds::UNIT, WrapMode::None).is_ok());
    }

    #[test]
    fn scaled_box_wraps_in_its_own_units() {
        let space =
            LatentSpace::new("s", 1, Bounds::Hypercube { half_width: 4.0 }, WrapMode::Torus)
                .unwrap();
        let out = space.apply_boundary(LatentVector(vec![4.8])).unwrap();
        assert!(close(out.0[0], -3.2));
    }

    #[test]
    fn unbounded_space_is_untouched() {
        let space = LatentSpace::unbounded("s", 2).unwrap();
        let z = LatentVector(vec![10.0, -7.5]);
        assert_eq!(space.apply_boundary(z.clone()).unwrap(), z);
    }

    proptest! {
        #[test]
        fn wraps_land_in_unit_box(z in -1e6f64..1e6) {
            let t = wrap_torus_coord(z).unwrap();
            let e = wrap_eq2_coord(z).unwrap();
            prop_assert!((-1.0..=1.0).contains(&t));
            prop_assert!((-1.0..=1.0).contains(&e));
        }

        #[test]
        fn torus_idempotent(z in -50.0f64..50.0) {
            let once = wrap_torus_coord(z).unwrap();
            prop_assert_eq!(wrap_torus_coord(once).unwrap(), once);
        }

        #[test]
        fn wraps_agree_inside_and_on_one_to_two(z in -1.0f64..=1.0, w in 1.0001f64..1.9999) {
            prop_assert_eq!(wrap_torus_coord(z).unwrap(), z);
            prop_assert_eq!(wrap_eq2_coord(z).unwrap(), z);
            prop_assert!((wrap_torus_coord(w).unwrap() - wrap_eq2_coord(w).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn wraps_differ_on_minus_two_to_minus_one(w in -1.9999f64..-1.0001) {
            // literal rule gives -w - 1, torus gives w + 2
            let gap = (wrap_torus_coord(w).unwrap() - wrap_eq2_coord(w).unwrap()).abs();
            prop_assert!(gap > 1e-9 || (w + 1.5).abs() < 1e-9);
        }
    }

    #[test]
    fn torus_preserves_proposal_symmetry_on_grid() {
        use rand::SeedableRng;
        // Histogram of transitions between grid cells under additive N(0, 0.7)
        // noise followed by the torus wrap: the count matrix is symmetric.
        let bins = 8usize;
        let mut counts = vec![vec![0u32; bins]; bins];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let cell = |v: f64| (((v + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
        for _ in 0..400_000 {
            let a: f64 = rng.random_range(-1.0..1.0);
            let step: f64 = 0.7 * rng.sample::<f64, _>(StandardNormal);
            let b = wrap_torus_coord(a + step).unwrap();
            counts[cell(a)][cell(b)] += 1;
        }
        for i in 0..bins {
            for j in 0..bins {
                let (x, y) = (counts[i][j] as f64, counts[j][i] as f64);
                let se = (x + y).sqrt().max(1.0);
                assert!((x - y).abs() < 4.0 * se, "asymmetric {i}->{j}: {x} vs {y}");
            }
        }
    }
}
