//! Local geometric features per bonded atom pair: radial distance, polar
//! angle, azimuthal angle and rotation (dihedral) angle, computed in a
//! per-atom frame built from bonded neighbors ranked by distance.
//!
//! All angles use atan2 formulations. Distances and polar angles are
//! invariant under rigid transforms; azimuth and rotation angles flip sign
//! under reflection. Degenerate (collinear) frames yield 0 with a flag
//! rather than NaN.

use rand::Rng;

use crate::conformer::Conformer;
use crate::graph::MolGraph;
use crate::{ChemError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeo {
    /// Source atom of the message (the frame owner).
    pub i: usize,
    /// Bonded neighbor the features describe.
    pub j: usize,
    pub d: f64,
    /// Polar angle in [0, pi].
    pub theta: f64,
    /// Azimuth in (-pi, pi]; 0 when the frame is degenerate.
    pub phi: f64,
    /// Rotation (dihedral) angle in (-pi, pi]; 0 when degenerate.
    pub tau: f64,
    pub phi_degenerate: bool,
    pub tau_degenerate: bool,
}

#[derive(Debug, Clone, Default)]
pub struct GeoFeatures {
    pub pairs: Vec<PairGeo>,
}

impl GeoFeatures {
    pub fn get(&self, i: usize, j: usize) -> Option<&PairGeo> {
        self.pairs.iter().find(|p| p.i == i && p.j == j)
    }
}

type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

const DEGENERATE_EPS: f64 = 1e-9;

/// atan2 yields [-pi, pi]; the feature contract wants (-pi, pi]. Also used
/// by reflection tests: the sign-flipped image of an angle in that range is
/// `normalize_signed(-angle)`.
pub fn normalize_signed(angle: f64) -> f64 {
    if angle == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        angle
    }
}

/// Reference atoms for atom `i`: nearest and second-nearest bonded
/// neighbors (ties broken by index). Degree-1 atoms fall back to the
/// nearest non-bonded atom for the secondary reference.
fn frame_refs(graph: &MolGraph, conf: &Conformer, i: usize) -> (Option<usize>, Option<usize>) {
    let mut bonded: Vec<usize> = graph.neighbors(i).into_iter().map(|(u, _)| u).collect();
    bonded.sort_by(|&a, &b| {
        conf.distance(i, a)
            .partial_cmp(&conf.distance(i, b))
            .unwrap()
            .then(a.cmp(&b))
    });
    let f = bonded.first().copied();
    let s = if bonded.len() >= 2 {
        Some(bonded[1])
    } else {
        // Nearest non-bonded atom, if the molecule has one.
        let mut others: Vec<usize> = (0..graph.atom_count())
            .filter(|&u| u != i && !bonded.contains(&u))
            .collect();
        others.sort_by(|&a, &b| {
            conf.distance(i, a)
                .partial_cmp(&conf.distance(i, b))
                .unwrap()
                .then(a.cmp(&b))
        });
        others.first().copied()
    };
    (f, s)
}

/// Signed azimuth of `target` around `axis` measured from `reference`,
/// all relative to a common origin. Returns (angle, degenerate).
fn azimuth(axis: Vec3, reference: Vec3, target: Vec3) -> (f64, bool) {
    let axis_len = norm(axis);
    if axis_len < DEGENERATE_EPS {
        return (0.0, true);
    }
    let u = scale(axis, 1.0 / axis_len);
    let r_perp = sub(reference, scale(u, dot(reference, u)));
    let t_perp = sub(target, scale(u, dot(target, u)));
    if norm(r_perp) < DEGENERATE_EPS || norm(t_perp) < DEGENERATE_EPS {
        return (0.0, true);
    }
    let y = dot(u, cross(r_perp, t_perp));
    let x = dot(r_perp, t_perp);
    (normalize_signed(y.atan2(x)), false)
}

/// Standard signed dihedral over four points p0-p1-p2-p3.
fn dihedral(p0: Vec3, p1: Vec3, p2: Vec3, p3: Vec3) -> (f64, bool) {
    let b0 = sub(p1, p0);
    let b1 = sub(p2, p1);
    let b2 = sub(p3, p2);
    let b1_len = norm(b1);
    if b1_len < DEGENERATE_EPS {
        return (0.0, true);
    }
    let b1n = scale(b1, 1.0 / b1_len);
    let v = sub(b0, scale(b1n, dot(b0, b1n)));
    let w = sub(b2, scale(b1n, dot(b2, b1n)));
    if norm(v) < DEGENERATE_EPS || norm(w) < DEGENERATE_EPS {
        return (0.0, true);
    }
    let y = dot(cross(b1n, v), w);
    let x = dot(v, w);
    (normalize_signed(y.atan2(x)), false)
}

pub fn geo_features(graph: &MolGraph, conf: &Conformer) -> Result<GeoFeatures> {
    if conf.len() != graph.atom_count() {
        return Err(ChemError::Geometry(format!(
            "conformer has {} atoms, graph has {}",
            conf.len(),
            graph.atom_count()
        )));
    }
    let mut out = GeoFeatures::default();
    for i in 0..graph.atom_count() {
        let neighbors = graph.neighbors(i);
        if neighbors.is_empty() {
            continue; // single-atom component: no features
        }
        let (f_i, s_i) = frame_refs(graph, conf, i);
        let f_i = f_i.expect("bonded neighbor exists");
        let ci = conf.coords[i];
        let axis = sub(conf.coords[f_i], ci);

        for (j, _) in neighbors {
            let v = sub(conf.coords[j], ci);
            let d = norm(v);
            if d < DEGENERATE_EPS {
                return Err(ChemError::Geometry(format!(
                    "coincident bonded atoms {} and {}",
                    i, j
                )));
            }
            let theta = {
                let c = cross(axis, v);
                norm(c).atan2(dot(axis, v))
            };
            let (phi, phi_degenerate) = match s_i {
                Some(s) => azimuth(axis, sub(conf.coords[s], ci), v),
                None => (0.0, true),
            };
            // Rotation angle: dihedral (f_j, j, i, f_i) where f_j is j's
            // nearest reference excluding i.
            let f_j = nearest_excluding(graph, conf, j, i);
            let (tau, tau_degenerate) = match f_j {
                Some(fj) => dihedral(conf.coords[fj], conf.coords[j], ci, conf.coords[f_i]),
                None => (0.0, true),
            };
            out.pairs.push(PairGeo { i, j, d, theta, phi, tau, phi_degenerate, tau_degenerate });
        }
    }
    Ok(out)
}

/// Nearest bonded neighbor of `j` other than `exclude`; falls back to the
/// nearest non-bonded atom other than `exclude`.
fn nearest_excluding(graph: &MolGraph, conf: &Conformer, j: usize, exclude: usize) -> Option<usize> {
    let mut bonded: Vec<usize> = graph
        .neighbors(j)
        .into_iter()
        .map(|(u, _)| u)
        .filter(|&u| u != exclude)
        .collect();
    bonded.sort_by(|&a, &b| {
        conf.distance(j, a)
            .partial_cmp(&conf.distance(j, b))
            .unwrap()
            .then(a.cmp(&b))
    });
    if let Some(&f) = bonded.first() {
        return Some(f);
    }
    let mut others: Vec<usize> = (0..graph.atom_count())
        .filter(|&u| u != j && u != exclude && graph.bond_between(j, u).is_none())
        .collect();
    others.sort_by(|&a, &b| {
        conf.distance(j, a)
            .partial_cmp(&conf.distance(j, b))
            .unwrap()
            .then(a.cmp(&b))
    });
    others.first().copied()
}

// ---------------------------------------------------------------------------
// Rigid-transform helpers (shared by invariance tests and demos)
// ---------------------------------------------------------------------------

/// Uniformly random rotation matrix from a seeded RNG (quaternion method).
pub fn random_rotation(rng: &mut impl Rng) -> [[f64; 3]; 3] {
    let u1: f64 = rng.random_range(0.0..1.0);
    let u2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let u3: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let (w, x, y, z) = (a * u2.sin(), a * u2.cos(), b * u3.sin(), b * u3.cos());
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

pub fn apply_rigid(conf: &Conformer, rot: &[[f64; 3]; 3], translation: Vec3) -> Conformer {
    let coords = conf
        .coords
        .iter()
        .map(|c| {
            [
                rot[0][0] * c[0] + rot[0][1] * c[1] + rot[0][2] * c[2] + translation[0],
                rot[1][0] * c[0] + rot[1][1] * c[1] + rot[1][2] * c[2] + translation[1],
                rot[2][0] * c[0] + rot[2][1] * c[1] + rot[2][2] * c[2] + translation[2],
            ]
        })
        .collect();
    Conformer { coords }
}

/// Mirror through the yz-plane (negate x).
pub fn reflect_x(conf: &Conformer) -> Conformer {
    let coords = conf.coords.iter().map(|c| [-c[0], c[1], c[2]]).collect();
    Conformer { coords }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse_smiles;
    use crate::synthetic_conformer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn right_angle_case() {
        // i at origin bonded to f_i at (1,0,0) and j at (0,1,0).
        let g = parse_smiles("C(O)N").unwrap(); // atom 0 bonded to 1 and 2
        let conf = Conformer {
            coords: vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        };
        let geo = geo_features(&g, &conf).unwrap();
        // Distances equal, so the index tie-break makes atom 1 the primary
        // reference; features for j = 2 should show d = 1, theta = pi/2.
        let p = geo.get(0, 2).unwrap();
        assert!((p.d - 1.0).abs() < 1e-12);
        assert!((p.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        // And for the reference itself theta = 0.
        let p = geo.get(0, 1).unwrap();
        assert!(p.theta.abs() < 1e-12);
    }

    #[test]
    fn rigid_invariance() {
        let g = parse_smiles("CC(=O)OC1CCCC1").unwrap();
        let conf = synthetic_conformer(&g, 11);
        let base = geo_features(&g, &conf).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let rot = random_rotation(&mut rng);
            let trans = [
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            ];
            let moved = apply_rigid(&conf, &rot, trans);
            let geo = geo_features(&g, &moved).unwrap();
            for (a, b) in base.pairs.iter().zip(&geo.pairs) {
                assert_eq!((a.i, a.j), (b.i, b.j));
                assert!((a.d - b.d).abs() <= 1e-9, "d drift {}", (a.d - b.d).abs());
                assert!((a.theta - b.theta).abs() <= 1e-9);
                assert!((a.phi - b.phi).abs() <= 1e-9);
                assert!((a.tau - b.tau).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn reflection_flips_phi_and_tau() {
        let g = parse_smiles("CC(=O)OC1CCCC1").unwrap();
        let conf = synthetic_conformer(&g, 13);
        let base = geo_features(&g, &conf).unwrap();
        let mirrored = geo_features(&g, &reflect_x(&conf)).unwrap();
        for (a, b) in base.pairs.iter().zip(&mirrored.pairs) {
            assert_eq!(a.d, b.d, "d must be exactly preserved");
            assert_eq!(a.theta, b.theta, "theta must be exactly preserved");
            if !a.phi_degenerate {
                assert_eq!(a.phi, normalize_signed(-b.phi), "phi must flip sign exactly");
            }
            if !a.tau_degenerate {
                assert_eq!(a.tau, normalize_signed(-b.tau), "tau must flip sign exactly");
            }
        }
    }

    #[test]
    fn two_atom_molecule_flags_degenerate() {
        let g = parse_smiles("CO").unwrap();
        let conf = Conformer { coords: vec![[0.0; 3], [1.4, 0.0, 0.0]] };
        let geo = geo_features(&g, &conf).unwrap();
        assert_eq!(geo.pairs.len(), 2);
        for p in &geo.pairs {
            assert!(p.phi_degenerate);
            assert_eq!(p.phi, 0.0);
            assert!(p.tau_degenerate);
            assert_eq!(p.tau, 0.0);
        }
    }

    #[test]
    fn angle_ranges() {
        let g = parse_smiles("CC(N)C(O)CC").unwrap();
        let conf = synthetic_conformer(&g, 3);
        let geo = geo_features(&g, &conf).unwrap();
        for p in &geo.pairs {
            assert!(p.d > 0.0);
            assert!((0.0..=std::f64::consts::PI).contains(&p.theta));
            assert!(p.phi > -std::f64::consts::PI && p.phi <= std::f64::consts::PI);
            assert!(p.tau > -std::f64::consts::PI && p.tau <= std::f64::consts::PI);
        }
    }
}
