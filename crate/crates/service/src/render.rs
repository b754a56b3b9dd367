use std::str::FromStr;

use derender::raster::io::{instance_png, normal_png, pose_png, silhouette_png};
use derender::raster::{SilhouetteImage, SoftRasterConfig};
use derender::scene::{render_scene, render_scene_hard, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Silhouette,
    Instance,
    Normal,
    Pose,
}

impl Layer {
    pub fn name(self) -> &'static str {
        match self {
            Self::Silhouette => "silhouette",
            Self::Instance => "instance",
            Self::Normal => "normal",
            Self::Pose => "pose",
        }
    }
}

impl FromStr for Layer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "silhouette" => Ok(Self::Silhouette),
            "instance" => Ok(Self::Instance),
            "normal" => Ok(Self::Normal),
            "pose" => Ok(Self::Pose),
            _ => Err(format!("unknown layer `{s}` (silhouette, instance, normal, pose)")),
        }
    }
}

/// Parses a comma-separated layer list, dropping repeats.
pub fn parse_layers(spec: &str) -> Result<Vec<Layer>, String> {
    let mut out = Vec::new();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let layer: Layer = name.parse()?;
        if !out.contains(&layer) {
            out.push(layer);
        }
    }
    if out.is_empty() {
        return Err("no layers requested".into());
    }
    Ok(out)
}

/// Union of the per-object soft silhouettes.
fn union(silhouettes: &[(u32, SilhouetteImage)], width: usize, height: usize) -> SilhouetteImage {
    let mut miss = vec![1.0; width * height];
    for (_, s) in silhouettes {
        for (m, v) in miss.iter_mut().zip(&s.values) {
            *m *= 1.0 - v;
        }
    }
    SilhouetteImage {
        width,
        height,
        values: miss.into_iter().map(|m| 1.0 - m).collect(),
    }
}

/// PNG payload per requested layer, in request order.
pub fn render_pngs(scene: &Scene, layers: &[Layer]) -> derender::Result<Vec<(Layer, Vec<u8>)>> {
    let cam = &scene.camera;
    let (hard, soft) = if layers.contains(&Layer::Silhouette) {
        let r = render_scene(scene, &SoftRasterConfig::default())?;
        let soft = union(&r.silhouettes, cam.width, cam.height);
        (r.layers, Some(soft))
    } else {
        (render_scene_hard(scene)?, None)
    };
    layers
        .iter()
        .map(|&layer| {
            let png = match layer {
                Layer::Silhouette => silhouette_png(soft.as_ref().expect("rendered above"))?,
                Layer::Instance => instance_png(&hard)?,
                Layer::Normal => normal_png(&hard)?,
                Layer::Pose => pose_png(&hard)?,
            };
            Ok((layer, png))
        })
        .collect()
}
