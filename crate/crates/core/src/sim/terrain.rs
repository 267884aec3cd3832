//! Ground height profiles.

use thiserror::Error;

#[derive(Debug, Error)]
#[error("terrain height ratio must be non-negative, got {0}")]
pub struct TerrainError(pub f64);

/// Ground profile under the robot. `Flat` is ground level zero everywhere;
/// `Sinusoidal` is z = h·sin(x) with h the center-to-peak height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Terrain {
    Flat,
    Sinusoidal { h: f64 },
}

impl Terrain {
    pub fn sinusoidal(h: f64) -> Result<Self, TerrainError> {
        if !(h >= 0.0) {
            return Err(TerrainError(h));
        }
        Ok(if h == 0.0 { Terrain::Flat } else { Terrain::Sinusoidal { h } })
    }

    /// Ground height at horizontal position x.
    #[inline]
    pub fn height(&self, x: f64) -> f64 {
        match self {
            Terrain::Flat => 0.0,
            Terrain::Sinusoidal { h } => h * x.sin(),
        }
    }

    /// Ground slope dz/dx at x.
    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        match self {
            Terrain::Flat => 0.0,
            Terrain::Sinusoidal { h } => h * x.cos(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn sinusoidal_heights() {
        let t = Terrain::sinusoidal(0.15).unwrap();
        assert_relative_eq!(t.height(PI / 2.0), 0.15, max_relative = 1e-12);
        assert_eq!(t.height(0.0), 0.0);
        let t = Terrain::sinusoidal(0.07).unwrap();
        assert_relative_eq!(t.height(3.0 * PI / 2.0), -0.07, max_relative = 1e-12);
    }

    #[test]
    fn flat_is_zero_everywhere() {
        for x in [-10.0, 0.0, 3.7, 1e6] {
            assert_eq!(Terrain::Flat.height(x), 0.0);
        }
        // h = 0 collapses to the flat case.
        assert_eq!(Terrain::sinusoidal(0.0).unwrap(), Terrain::Flat);
    }

    #[test]
    fn negative_h_rejected() {
        assert!(Terrain::sinusoidal(-0.1).is_err());
    }
}
