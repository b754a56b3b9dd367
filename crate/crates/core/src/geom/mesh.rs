use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use nalgebra::Vector3;

use crate::{Error, Result};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn from_points(points: &[Vector3<f64>]) -> Option<Self> {
        let first = points.first()?;
        let mut min = *first;
        let mut max = *first;
        for p in &points[1..] {
            min = min.inf(p);
            max = max.sup(p);
        }
        Some(Self { min, max })
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Vector3<f64> {
        (self.min + self.max) * 0.5
    }
}

/// Triangle mesh in a canonical object frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub bbox_rest: Aabb,
}

impl Mesh {
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("triangle list is empty".into()));
        }
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::InvalidMesh(format!(
                "triangle {t:?} indexes past {} vertices",
                vertices.len()
            )));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh("non-finite vertex".into()));
        }
        let bbox_rest = Aabb::from_points(&vertices)
            .ok_or_else(|| Error::InvalidMesh("no vertices".into()))?;
        if bbox_rest.extent().iter().any(|&e| !(e > 0.0)) {
            return Err(Error::InvalidMesh(
                "bounding box must have positive extent on every axis".into(),
            ));
        }
        Ok(Self {
            vertices,
            triangles,
            bbox_rest,
        })
    }

    /// Same topology and rest box, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Vector3<f64>>) -> Self {
        debug_assert_eq!(vertices.len(), self.vertices.len());
        Self {
            vertices,
            triangles: self.triangles.clone(),
            bbox_rest: self.bbox_rest,
        }
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.vertices.iter().sum::<Vector3<f64>>() / self.vertices.len() as f64
    }

    /// Recenters on the bounding-box center and rescales every axis to unit
    /// extent, giving the canonical `[-0.5, 0.5]³` frame.
    pub fn normalized_to_unit_box(&self) -> Result<Self> {
        let c = self.bbox_rest.center();
        let e = self.bbox_rest.extent();
        let verts = self
            .vertices
            .iter()
            .map(|v| (v - c).component_div(&e))
            .collect();
        Self::new(verts, self.triangles.clone())
    }

    /// Parses the `v x y z` / `f i j k` subset of Wavefront OBJ.
    pub fn parse_obj(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let tag = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            let bad = |what: &str| Error::Parse(format!("line {}: {what}", lineno + 1));
            match tag {
                "v" => {
                    if rest.len() < 3 {
                        return Err(bad("vertex needs three coordinates"));
                    }
                    let mut c = [0.0; 3];
                    for (slot, s) in c.iter_mut().zip(&rest) {
                        *slot = s.parse().map_err(|_| bad("bad coordinate"))?;
                    }
                    vertices.push(Vector3::from(c));
                }
                "f" => {
                    if rest.len() != 3 {
                        return Err(bad("only triangular faces are supported"));
                    }
                    let mut t = [0usize; 3];
                    for (slot, s) in t.iter_mut().zip(&rest) {
                        // accept `i`, `i/t`, `i//n` and `i/t/n`
                        let idx: usize = s
                            .split('/')
                            .next()
                            .unwrap_or_default()
                            .parse()
                            .map_err(|_| bad("bad face index"))?;
                        if idx == 0 {
                            return Err(bad("face indices are 1-based"));
                        }
                        *slot = idx - 1;
                    }
                    triangles.push(t);
                }
                other => warn!("obj line {}: ignoring `{other}` directive", lineno + 1),
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn load_obj(path: &Path) -> Result<Self> {
        Self::parse_obj(&fs::read_to_string(path)?)
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }
}

/// Ordered collection of candidate meshes; the index is the mesh id used by
/// object states.
#[derive(Debug, Clone)]
pub struct MeshLibrary {
    entries: Vec<(String, Mesh)>,
}

pub const MANIFEST_FILE: &str = "manifest.txt";

impl MeshLibrary {
    pub fn new(entries: Vec<(String, Mesh)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("mesh library is empty".into()));
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Mesh> {
        self.entries.get(index).map(|(_, m)| m)
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.entries.get(index).map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Mesh> {
        self.entries.iter().map(|(_, m)| m)
    }

    /// Library restricted to a single entry, keeping its name.
    pub fn single(&self, index: usize) -> Option<Self> {
        self.entries.get(index).map(|e| Self {
            entries: vec![e.clone()],
        })
    }

    /// Loads `manifest.txt` (one mesh name per line, in index order) and the
    /// matching `<name>.obj` files from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let manifest = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let mut entries = Vec::new();
        for name in manifest.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let mesh = Mesh::load_obj(&dir.join(format!("{name}.obj")))?;
            entries.push((name.to_string(), mesh));
        }
        Self::new(entries)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut manifest = String::new();
        for (name, mesh) in &self.entries {
            fs::write(dir.join(format!("{name}.obj")), mesh.to_obj())?;
            manifest.push_str(name);
            manifest.push('\n');
        }
        fs::write(dir.join(MANIFEST_FILE), manifest)?;
        Ok(())
    }

    /// Eight procedurally built vehicle shapes (sedan through box truck),
    /// each normalized to the canonical unit box with its front facing +z
    /// and its roof towards -y.
    pub fn builtin_vehicles() -> Self {
        let entries = VEHICLES
            .iter()
            .map(|spec| (spec.name.to_string(), spec.build()))
            .collect();
        Self { entries }
    }
}

/// Convex side profile `(distance from front, height above ground)`,
/// extruded across the vehicle width with the top optionally inset.
struct Part {
    profile: &'static [(f64, f64)],
    width: f64,
}

struct VehicleSpec {
    name: &'static str,
    parts: &'static [Part],
}

const VEHICLES: [VehicleSpec; 8] = [
    VehicleSpec {
        name: "sedan",
        parts: &[
            Part { profile: &[(0.0, 0.3), (4.5, 0.3), (4.5, 0.95), (0.0, 0.85)], width: 1.8 },
            Part { profile: &[(1.3, 0.85), (3.9, 0.9), (3.3, 1.45), (2.0, 1.45)], width: 1.6 },
        ],
    },
    VehicleSpec {
        name: "hatchback",
        parts: &[
            Part { profile: &[(0.0, 0.3), (3.9, 0.3), (3.9, 1.0), (0.0, 0.9)], width: 1.75 },
            Part { profile: &[(1.1, 0.9), (3.9, 1.0), (3.8, 1.5), (1.8, 1.5)], width: 1.6 },
        ],
    },
    VehicleSpec {
        name: "suv",
        parts: &[
            Part { profile: &[(0.0, 0.4), (4.7, 0.4), (4.7, 1.15), (0.0, 1.1)], width: 1.9 },
            Part { profile: &[(1.0, 1.1), (4.7, 1.15), (4.6, 1.85), (1.6, 1.85)], width: 1.8 },
        ],
    },
    VehicleSpec {
        name: "van",
        parts: &[Part {
            profile: &[(0.0, 0.35), (5.0, 0.35), (5.0, 2.1), (1.3, 2.1), (0.0, 1.15)],
            width: 1.95,
        }],
    },
    VehicleSpec {
        name: "bus",
        parts: &[Part {
            profile: &[(0.0, 0.35), (10.5, 0.35), (10.5, 3.0), (0.3, 3.0), (0.0, 2.6)],
            width: 2.5,
        }],
    },
    VehicleSpec {
        name: "pickup",
        parts: &[
            Part { profile: &[(0.0, 0.45), (5.3, 0.45), (5.3, 1.15), (0.0, 1.1)], width: 1.9 },
            Part { profile: &[(1.2, 1.1), (3.0, 1.12), (3.0, 1.9), (1.8, 1.9)], width: 1.8 },
        ],
    },
    VehicleSpec {
        name: "box_truck",
        parts: &[
            Part { profile: &[(0.0, 0.45), (1.9, 0.45), (1.9, 2.0), (0.7, 2.0), (0.0, 1.2)], width: 2.1 },
            Part { profile: &[(2.3, 0.7), (7.2, 0.7), (7.2, 3.4), (2.3, 3.4)], width: 2.45 },
        ],
    },
    VehicleSpec {
        name: "coupe",
        parts: &[
            Part { profile: &[(0.0, 0.2), (4.4, 0.2), (4.4, 0.85), (0.0, 0.7)], width: 1.85 },
            Part { profile: &[(1.6, 0.75), (4.0, 0.85), (3.2, 1.25), (2.3, 1.25)], width: 1.6 },
        ],
    },
];

impl VehicleSpec {
    fn build(&self) -> Mesh {
        let length = self
            .parts
            .iter()
            .flat_map(|p| p.profile.iter().map(|&(d, _)| d))
            .fold(0.0_f64, f64::max);
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for part in self.parts {
            extrude(part, length, &mut vertices, &mut triangles);
        }
        Mesh::new(vertices, triangles)
            .and_then(|m| m.normalized_to_unit_box())
            .expect("builtin vehicle meshes are well formed")
    }
}

fn extrude(part: &Part, length: f64, vertices: &mut Vec<Vector3<f64>>, triangles: &mut Vec<[usize; 3]>) {
    let n = part.profile.len();
    let base = vertices.len();
    for side in [-0.5, 0.5] {
        for &(d, h) in part.profile {
            // front at +z, up is -y
            vertices.push(Vector3::new(side * part.width, -h, length - d));
        }
    }
    for i in 1..n - 1 {
        triangles.push([base, base + i, base + i + 1]);
        triangles.push([base + n, base + n + i + 1, base + n + i]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        triangles.push([base + i, base + n + i, base + n + j]);
        triangles.push([base + i, base + n + j, base + j]);
    }
}
