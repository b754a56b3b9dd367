use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use crate::{Error, Result};

/// Control points per lattice axis.
pub const LATTICE_DIM: usize = 4;
/// Control points in the lattice.
pub const LATTICE_POINTS: usize = LATTICE_DIM * LATTICE_DIM * LATTICE_DIM;
/// Scalar coefficients in the lattice (`4 × 4 × 4 × 3`).
pub const LATTICE_SCALARS: usize = LATTICE_POINTS * 3;

/// Tolerance for vertices that sit marginally outside the rest box.
const BOX_TOLERANCE: f64 = 1e-9;

/// Free-form deformation lattice stored as displacements from the regular
/// rest grid spanning the mesh's rest bounding box. Control point `(i, j, k)`
/// lives at `i + 4 j + 16 k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FfdLattice {
    offsets: [Vector3<f64>; LATTICE_POINTS],
}

impl Default for FfdLattice {
    fn default() -> Self {
        Self::zero()
    }
}

impl FfdLattice {
    pub fn zero() -> Self {
        Self {
            offsets: [Vector3::zeros(); LATTICE_POINTS],
        }
    }

    pub fn uniform(delta: Vector3<f64>) -> Self {
        Self {
            offsets: [delta; LATTICE_POINTS],
        }
    }

    pub fn index(i: usize, j: usize, k: usize) -> usize {
        i + LATTICE_DIM * (j + LATTICE_DIM * k)
    }

    pub fn offsets(&self) -> &[Vector3<f64>; LATTICE_POINTS] {
        &self.offsets
    }

    pub fn offsets_mut(&mut self) -> &mut [Vector3<f64>; LATTICE_POINTS] {
        &mut self.offsets
    }

    pub fn is_zero(&self) -> bool {
        self.offsets.iter().all(|o| *o == Vector3::zeros())
    }

    pub fn is_finite(&self) -> bool {
        self.offsets.iter().all(|o| o.iter().all(|c| c.is_finite()))
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != LATTICE_SCALARS {
            return Err(Error::InvalidArgument(format!(
                "lattice needs {LATTICE_SCALARS} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("lattice offsets must be finite".into()));
        }
        let mut lattice = Self::zero();
        for (o, c) in lattice.offsets.iter_mut().zip(values.chunks_exact(3)) {
            *o = Vector3::new(c[0], c[1], c[2]);
        }
        Ok(lattice)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.offsets.iter().flat_map(|o| [o.x, o.y, o.z]).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.offsets.iter_mut().zip(&other.offsets) {
            *a += b;
        }
        out
    }
}

impl TryFrom<Vec<f64>> for FfdLattice {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_flat(&v)
    }
}

impl From<FfdLattice> for Vec<f64> {
    fn from(l: FfdLattice) -> Self {
        l.to_flat()
    }
}

/// Cubic Bernstein basis `C(3, i) t^i (1 - t)^(3 - i)` for `i = 0..4`.
#[inline]
pub fn bernstein3(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [s * s * s, 3.0 * t * s * s, 3.0 * t * t * s, t * t * t]
}

/// Per-vertex trivariate Bernstein weights over the lattice. The weights
/// depend only on the rest mesh, so fitting loops compute them once.
#[derive(Debug, Clone)]
pub struct FfdWeights {
    weights: Vec<[f64; LATTICE_POINTS]>,
}

impl FfdWeights {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let bbox = mesh.bbox_rest;
        let extent = bbox.extent();
        let weights = mesh
            .vertices
            .iter()
            .enumerate()
            .map(|(index, v)| {
                let mut uvw = [0.0; 3];
                for a in 0..3 {
                    let u = (v[a] - bbox.min[a]) / extent[a];
                    let slack = BOX_TOLERANCE / extent[a];
                    if !(u >= -slack && u <= 1.0 + slack) {
                        return Err(Error::OutsideLattice { index });
                    }
                    uvw[a] = u.clamp(0.0, 1.0);
                }
                let (bu, bv, bw) = (bernstein3(uvw[0]), bernstein3(uvw[1]), bernstein3(uvw[2]));
                let mut w = [0.0; LATTICE_POINTS];
                for k in 0..LATTICE_DIM {
                    for j in 0..LATTICE_DIM {
                        for i in 0..LATTICE_DIM {
                            w[FfdLattice::index(i, j, k)] = bu[i] * bv[j] * bw[k];
                        }
                    }
                }
                Ok(w)
            })
            .collect::<Result<_>>()?;
        Ok(Self { weights })
    }

    pub fn vertex(&self, v: usize) -> &[f64; LATTICE_POINTS] {
        &self.weights[v]
    }

    /// Deformed vertices: the Bernstein blend of rest grid points plus
    /// offsets.
    pub fn deform(&self, mesh: &Mesh, ffd: &FfdLattice) -> Vec<Vector3<f64>> {
        let grid = rest_grid(mesh);
        self.weights
            .iter()
            .map(|w| {
                w.iter()
                    .zip(grid.iter().zip(ffd.offsets.iter()))
                    .fold(Vector3::zeros(), |acc, (&b, (p, o))| acc + b * (p + o))
            })
            .collect()
    }
}

/// Regular rest grid spanning the mesh's rest bounding box.
pub fn rest_grid(mesh: &Mesh) -> [Vector3<f64>; LATTICE_POINTS] {
    let bbox = mesh.bbox_rest;
    let extent = bbox.extent();
    let step = (LATTICE_DIM - 1) as f64;
    let mut grid = [Vector3::zeros(); LATTICE_POINTS];
    for k in 0..LATTICE_DIM {
        for j in 0..LATTICE_DIM {
            for i in 0..LATTICE_DIM {
                let frac = Vector3::new(i as f64, j as f64, k as f64) / step;
                grid[FfdLattice::index(i, j, k)] = bbox.min + frac.component_mul(&extent);
            }
        }
    }
    grid
}

/// Applies the free-form deformation to every vertex; topology is kept.
pub fn ffd_apply(mesh: &Mesh, ffd: &FfdLattice) -> Result<Mesh> {
    let weights = FfdWeights::new(mesh)?;
    Ok(mesh.with_vertices(weights.deform(mesh, ffd)))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geom::mesh::MeshLibrary;

    fn random_lattice(rng: &mut ChaCha8Rng, amp: f64) -> FfdLattice {
        let v: Vec<f64> = (0..LATTICE_SCALARS).map(|_| rng.random_range(-amp..amp)).collect();
        FfdLattice::from_flat(&v).unwrap()
    }

    fn binomial(n: u32, k: u32) -> f64 {
        (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
    }

    /// Direct triple sum over control points with explicit binomials.
    fn oracle_point(mesh: &Mesh, ffd: &FfdLattice, v: &Vector3<f64>) -> Vector3<f64> {
        let lo = mesh.bbox_rest.min;
        let hi = mesh.bbox_rest.max;
        let u: Vec<f64> = (0..3).map(|a| (v[a] - lo[a]) / (hi[a] - lo[a])).collect();
        let mut out = Vector3::zeros();
        for i in 0..4u32 {
            for j in 0..4u32 {
                for k in 0..4u32 {
                    let b = |t: f64, n: u32| binomial(3, n) * t.powi(n as i32) * (1.0 - t).powi(3 - n as i32);
                    let weight = b(u[0], i) * b(u[1], j) * b(u[2], k);
                    let rest = Vector3::new(
                        lo.x + (hi.x - lo.x) * i as f64 / 3.0,
                        lo.y + (hi.y - lo.y) * j as f64 / 3.0,
                        lo.z + (hi.z - lo.z) * k as f64 / 3.0,
                    );
                    let off = ffd.offsets()[(i + 4 * j + 16 * k) as usize];
                    out += weight * (rest + off);
                }
            }
        }
        out
    }

    #[test]
    fn zero_offsets_are_identity() {
        for mesh in MeshLibrary::builtin_vehicles().iter() {
            let out = ffd_apply(mesh, &FfdLattice::zero()).unwrap();
            for (a, b) in out.vertices.iter().zip(&mesh.vertices) {
                assert!((a - b).amax() < 1e-12);
            }
            assert_eq!(out.triangles, mesh.triangles);
        }
    }

    #[test]
    fn uniform_offset_translates() {
        let delta = Vector3::new(0.3, -1.25, 2.0);
        let mesh = MeshLibrary::builtin_vehicles().get(2).unwrap().clone();
        let out = ffd_apply(&mesh, &FfdLattice::uniform(delta)).unwrap();
        for (a, b) in out.vertices.iter().zip(&mesh.vertices) {
            assert!((a - b - delta).amax() < 1e-9);
        }
    }

    #[test]
    fn matches_direct_bernstein_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mesh = MeshLibrary::builtin_vehicles().get(6).unwrap().clone();
        for _ in 0..50 {
            let ffd = random_lattice(&mut rng, 0.3);
            let out = ffd_apply(&mesh, &ffd).unwrap();
            for (v, got) in mesh.vertices.iter().zip(&out.vertices) {
                assert!((oracle_point(&mesh, &ffd, v) - got).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn affine_in_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mesh = MeshLibrary::builtin_vehicles().get(0).unwrap().clone();
        let (a, b) = (random_lattice(&mut rng, 0.2), random_lattice(&mut rng, 0.2));
        let both = ffd_apply(&mesh, &a.add(&b)).unwrap();
        let only_a = ffd_apply(&mesh, &a).unwrap();
        let only_b = ffd_apply(&mesh, &b).unwrap();
        for i in 0..mesh.vertices.len() {
            let disp_b = only_b.vertices[i] - mesh.vertices[i];
            assert!((both.vertices[i] - (only_a.vertices[i] + disp_b)).amax() < 1e-9);
        }
    }

    #[test]
    fn vertex_outside_rest_box_rejected() {
        let mesh = MeshLibrary::builtin_vehicles().get(0).unwrap().clone();
        let mut moved = mesh.clone();
        moved.vertices[0].x -= 1e-6;
        assert!(matches!(
            ffd_apply(&moved, &FfdLattice::zero()),
            Err(Error::OutsideLattice { index: 0 })
        ));
    }

    #[test]
    fn flat_layout_is_row_major() {
        let mut v = vec![0.0; LATTICE_SCALARS];
        v[3 * FfdLattice::index(1, 2, 3) + 2] = 7.0;
        let l = FfdLattice::from_flat(&v).unwrap();
        assert_eq!(l.offsets()[1 + 8 + 48].z, 7.0);
        assert_eq!(l.to_flat(), v);
        assert!(FfdLattice::from_flat(&v[..10]).is_err());
    }
}
