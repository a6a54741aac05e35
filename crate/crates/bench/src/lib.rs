//! Shared fixtures for the benchmarks.

use num_complex::Complex64;
use rpf_core::{Configuration, EnsembleSpec, SamplerMethod, ScalingKind};

pub fn soft_edge_spec(n: usize, method: SamplerMethod) -> EnsembleSpec {
    EnsembleSpec::new(2.0, n, ScalingKind::SoftEdge, method, 7).expect("valid spec")
}

/// `k` points spread over the annulus `1 < |y| < 4`, alternating between
/// the real axis and the upper half plane.
pub fn outer_points(k: usize, complex: bool) -> Configuration {
    Configuration::from_points(
        (0..k)
            .map(|i| {
                let m = 1.05 + 2.9 * i as f64 / k.max(1) as f64;
                if complex {
                    Complex64::from_polar(m, 0.7 + 1.3 * i as f64)
                } else if i % 2 == 0 {
                    Complex64::new(m, 0.0)
                } else {
                    Complex64::new(-m, 0.0)
                }
            })
            .collect(),
    )
}
