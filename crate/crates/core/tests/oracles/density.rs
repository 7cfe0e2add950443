//! Brute-force density: one fused sum over atoms and Miller indices with its
//! own index enumeration, evaluated at arbitrary fractional positions.
#![allow(dead_code)]

use std::f64::consts::PI;

/// ρ at fractional `x` for atoms `(Z, fractional position)` in a cell with
/// `edges`, truncated at `d_min`, constant form factors.
pub fn density_at(atoms: &[(f64, [f64; 3])], edges: [f64; 3], d_min: f64, x: [f64; 3]) -> f64 {
    let volume = edges[0] * edges[1] * edges[2];
    let reach: Vec<i32> = edges.iter().map(|e| (e / d_min).ceil() as i32 + 1).collect();
    let mut re = 0.0;
    for h in -reach[0]..=reach[0] {
        for k in -reach[1]..=reach[1] {
            for l in -reach[2]..=reach[2] {
                let s2 = (h as f64 / edges[0]).powi(2) + (k as f64 / edges[1]).powi(2) + (l as f64 / edges[2]).powi(2);
                if s2 > 1.0 / (d_min * d_min) * (1.0 + 1e-12) {
                    continue;
                }
                for (z, a) in atoms {
                    let arg = 2.0 * PI * (h as f64 * (a[0] - x[0]) + k as f64 * (a[1] - x[1]) + l as f64 * (a[2] - x[2]));
                    re += z * arg.cos();
                }
            }
        }
    }
    re / volume
}
