use std::fs;
use std::path::{Path, PathBuf};

use derender::bench::{gradient_check, run_benchmark, table2_configs, BenchConfig, Difficulty, GradCheckConfig, FULL_LABEL};
use derender::optim::{fit_object, select_mesh_exhaustive, AblationFlags, FitConfig, FitResult, FreeVariable};
use derender::raster::io::{depth_raster, instance_png, normal_png, normal_raster, pose_png, read_mask, silhouette_png};
use derender::raster::{binarize, SilhouetteImage, SoftRasterConfig};
use derender::scene::{apply_edit, occlusion_mask, render_scene, EditOp, Scene};
use derender::Error;
use serde::Serialize;

use crate::{BenchArgs, Cli, Command, EditArgs, FitArgs, FitFlags, GradcheckArgs, RenderArgs, ServeArgs};

/// A failed command: message for standard error and the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub const OTHER: u8 = 1;
    pub const PARSE: u8 = 2;
    pub const RENDER: u8 = 3;
    pub const DIVERGENCE: u8 = 4;
    pub const BAD_EDIT: u8 = 5;
    pub const BAD_CONFIG: u8 = 6;

    fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn parse_err(e: impl std::fmt::Display) -> Failure {
    Failure::new(Failure::PARSE, e.to_string())
}

fn render_err(e: impl std::fmt::Display) -> Failure {
    Failure::new(Failure::RENDER, e.to_string())
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::new(Failure::BAD_CONFIG, e.to_string())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::new(Failure::OTHER, format!("{}: {e}", path.display()))
}

pub fn run(cli: &Cli) -> Outcome<u8> {
    match &cli.command {
        Command::Render(args) => render(cli, args).map(|_| 0),
        Command::Fit(args) => fit(cli, args).map(|_| 0),
        Command::Edit(args) => edit(cli, args).map(|_| 0),
        Command::Bench(args) => bench(cli, args).map(|_| 0),
        Command::Gradcheck(args) => gradcheck(cli, args),
        Command::Serve(args) => serve(args).map(|_| 0),
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str, command: &str) -> Outcome<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| Failure::new(Failure::PARSE, format!("`{command}` needs --{flag}")))
}

fn load_scene(cli: &Cli, command: &str) -> Outcome<Scene> {
    let path = required(&cli.scene, "scene", command)?;
    Scene::load(path).map_err(|e| parse_err(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

const LAYERS: [&str; 6] = ["instance", "depth", "normal", "pose", "silhouette", "masks"];

fn parse_layer_list(spec: &str) -> Outcome<Vec<&str>> {
    let mut out: Vec<&str> = Vec::new();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let known = LAYERS
            .iter()
            .find(|&&l| l == name)
            .ok_or_else(|| parse_err(format!("unknown layer `{name}` ({})", LAYERS.join(", "))))?;
        if !out.contains(known) {
            out.push(known);
        }
    }
    if out.is_empty() {
        return Err(parse_err("no layers requested"));
    }
    Ok(out)
}

/// Writes the requested layers into `dir` and prints one line per file.
fn write_layers(scene: &Scene, layers: &[&str], raster: &SoftRasterConfig, dir: &Path) -> Outcome {
    let r = render_scene(scene, raster).map_err(render_err)?;
    let hard = &r.layers;
    for &layer in layers {
        let files: Vec<(PathBuf, Vec<u8>, String)> = match layer {
            "instance" => {
                let ids = scene.objects.iter().filter(|o| hard.pixel_count(o.id) > 0).count();
                vec![(dir.join("instance.png"), instance_png(hard).map_err(render_err)?, format!("{ids} visible objects"))]
            }
            "depth" => {
                let fg = hard.depth.iter().filter(|d| d.is_finite()).count();
                vec![(dir.join("depth.d3dr"), depth_raster(hard).encode(), format!("{fg} foreground pixels"))]
            }
            "normal" => vec![
                (dir.join("normal.d3dr"), normal_raster(hard).encode(), "3 channels".into()),
                (dir.join("normal.png"), normal_png(hard).map_err(render_err)?, "preview".into()),
            ],
            "pose" => {
                let mut bins: Vec<i32> = hard.pose_bins.iter().copied().filter(|&b| b >= 0).collect();
                bins.sort_unstable();
                bins.dedup();
                vec![(dir.join("pose.png"), pose_png(hard).map_err(render_err)?, format!("bins {bins:?}"))]
            }
            "silhouette" => {
                let mut miss = vec![1.0; scene.camera.pixel_count()];
                for (_, s) in &r.silhouettes {
                    miss.iter_mut().zip(&s.values).for_each(|(m, v)| *m *= 1.0 - v);
                }
                let union = SilhouetteImage::from_values(scene.camera.width, scene.camera.height, miss.into_iter().map(|m| 1.0 - m).collect())
                    .map_err(render_err)?;
                let area = binarize(&union, raster).area();
                vec![(dir.join("silhouette.png"), silhouette_png(&union).map_err(render_err)?, format!("{area} px above threshold"))]
            }
            "masks" => r
                .silhouettes
                .iter()
                .map(|(id, s)| {
                    let mask = binarize(s, raster);
                    let area = mask.area();
                    Ok((dir.join("masks").join(format!("{id}.png")), silhouette_png(&mask).map_err(render_err)?, format!("{area} px")))
                })
                .collect::<Outcome<_>>()?,
            _ => unreachable!("validated layer name"),
        };
        for (path, bytes, summary) in files {
            write(&path, &bytes)?;
            println!("{layer:<10} {} {summary}", path.display());
        }
    }
    Ok(())
}

fn render(cli: &Cli, args: &RenderArgs) -> Outcome {
    let layers = parse_layer_list(&args.layers)?;
    let raster = SoftRasterConfig::with_gamma(args.sharpness);
    raster.validate().map_err(config_err)?;
    let scene = load_scene(cli, "render")?;
    let out = required(&cli.out, "out", "render")?;
    write_layers(&scene, &layers, &raster, out)
}

fn fit_config(flags: &FitFlags) -> Outcome<FitConfig> {
    let free_variables = match &flags.free {
        None => FreeVariable::ALL.into_iter().collect(),
        Some(spec) => spec
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| FreeVariable::parse(s).ok_or_else(|| config_err(format!("unknown free variable `{s}`"))))
            .collect::<Outcome<_>>()?,
    };
    let cfg = FitConfig {
        learning_rate: flags.lr,
        iterations: flags.iterations,
        free_variables,
        ablation_flags: AblationFlags {
            yaw_constraint: !flags.no_yaw_constraint,
            normalized_distance: !flags.no_normalized_distance,
            multicad_ffd: !flags.no_multicad,
        },
        raster: SoftRasterConfig::with_gamma(flags.sharpness),
        ..FitConfig::default()
    };
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn is_divergence(e: &Error) -> bool {
    match e {
        Error::Divergence(_) | Error::NonFiniteGradient(_) | Error::FitAborted { .. } => true,
        Error::Object { source, .. } => is_divergence(source),
        _ => false,
    }
}

#[derive(Serialize)]
struct ObjectFit<'a> {
    object_id: u32,
    #[serde(flatten)]
    result: &'a FitResult,
}

fn fit(cli: &Cli, args: &FitArgs) -> Outcome {
    let cfg = fit_config(&args.fit)?;
    let scene = load_scene(cli, "fit")?;
    let out = required(&cli.out, "out", "fit")?;
    let dims = (scene.camera.width, scene.camera.height);
    let mut targets = Vec::with_capacity(scene.objects.len());
    for obj in &scene.objects {
        let path = args.masks.join(format!("{}.png", obj.id));
        if !path.is_file() {
            return Err(parse_err(format!("missing mask for object {}: {}", obj.id, path.display())));
        }
        let mask = read_mask(&path).map_err(|e| parse_err(format!("{}: {e}", path.display())))?;
        if mask.dims() != dims {
            return Err(parse_err(format!("{}: mask is {:?}, camera is {dims:?}", path.display(), mask.dims())));
        }
        targets.push(mask);
    }

    let mut fitted = scene.clone();
    let mut results = Vec::with_capacity(scene.objects.len());
    for (obj, target) in scene.objects.iter().zip(&targets) {
        let valid = occlusion_mask(&scene, obj.id).map_err(render_err)?;
        let fit = if args.keep_mesh {
            fit_object(target, &valid, &obj.state, &scene.mesh_lib, &scene.camera, &cfg)
        } else {
            select_mesh_exhaustive(target, &valid, &obj.state, &scene.mesh_lib, &scene.camera, &cfg)
        };
        let result = fit.map_err(|e| {
            let code = if is_divergence(&e) { Failure::DIVERGENCE } else { Failure::RENDER };
            Failure::new(code, format!("object {}: {e}", obj.id))
        })?;
        log::info!(
            "object {}: mesh {} loss {:.5} -> {:.5}",
            obj.id,
            result.selected_mesh,
            result.initial_loss,
            result.final_loss
        );
        fitted.object_mut(obj.id).expect("same ids").state = result.state.clone();
        results.push((obj.id, result));
    }
    let report: Vec<ObjectFit> = results.iter().map(|(id, r)| ObjectFit { object_id: *id, result: r }).collect();
    let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::new(Failure::OTHER, e.to_string()))?;
    write(&out.join("fit.json"), json.as_bytes())?;
    fitted.save(&out.join("scene.json")).map_err(|e| Failure::new(Failure::OTHER, e.to_string()))?;
    println!("{}", out.join("scene.json").display());
    Ok(())
}

fn edit(cli: &Cli, args: &EditArgs) -> Outcome {
    let scene = load_scene(cli, "edit")?;
    let out = required(&cli.out, "out", "edit")?;
    let text = fs::read_to_string(&args.script).map_err(|e| parse_err(format!("{}: {e}", args.script.display())))?;
    let ops: Vec<EditOp> = serde_json::from_str(&text).map_err(|e| parse_err(format!("{}: {e}", args.script.display())))?;
    let mut edited = scene.clone();
    for (i, op) in ops.iter().enumerate() {
        edited = apply_edit(&edited, op).map_err(|e| Failure::new(Failure::BAD_EDIT, format!("op {i}: {e}")))?;
    }
    if let Some(dir) = &args.render {
        let raster = SoftRasterConfig::default();
        let layers = ["instance", "depth", "normal", "pose"];
        write_layers(&scene, &layers, &raster, &dir.join("before"))?;
        write_layers(&edited, &layers, &raster, &dir.join("after"))?;
    }
    edited.save(out).map_err(|e| Failure::new(Failure::OTHER, format!("{}: {e}", out.display())))?;
    log::info!("applied {} edits", ops.len());
    Ok(())
}

const CONFIG_ALIASES: [(&str, usize); 4] = [("full", 0), ("no-quaternion", 1), ("no-tau", 2), ("no-multicad", 3)];

fn bench_configs(spec: &str, iterations: u32) -> Outcome<Vec<BenchConfig>> {
    let all = table2_configs(iterations);
    let mut out: Vec<BenchConfig> = Vec::new();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let index = CONFIG_ALIASES
            .iter()
            .find(|(alias, _)| *alias == name)
            .map(|&(_, i)| i)
            .or_else(|| all.iter().position(|c| c.label == name))
            .ok_or_else(|| config_err(format!("unknown config `{name}`")))?;
        if !out.iter().any(|c| c.label == all[index].label) {
            out.push(all[index].clone());
        }
    }
    if !out.iter().any(|c| c.label == FULL_LABEL) {
        return Err(config_err(format!("configs must include `{FULL_LABEL}`")));
    }
    for c in &out {
        c.fit.validate().map_err(config_err)?;
    }
    Ok(out)
}

fn bench(cli: &Cli, args: &BenchArgs) -> Outcome {
    let configs = bench_configs(&args.configs, args.iterations)?;
    let difficulty: Difficulty = args.difficulty.parse().map_err(config_err)?;
    let seeds: Vec<u64> = (0..args.seeds).map(|i| cli.seed.wrapping_add(i)).collect();
    log::info!("{} scenes x {} configs", seeds.len(), configs.len());
    let report = run_benchmark(&configs, &seeds, difficulty).map_err(|e| {
        let code = if is_divergence(&e) { Failure::DIVERGENCE } else { Failure::RENDER };
        Failure::new(code, e.to_string())
    })?;
    let csv = report.to_csv();
    if let Some(dir) = &cli.out {
        write(&dir.join("table2.csv"), csv.as_bytes())?;
        let json = report.to_json().map_err(|e| Failure::new(Failure::OTHER, e.to_string()))?;
        write(&dir.join("table2.json"), json.as_bytes())?;
    }
    print!("{csv}");
    Ok(())
}

fn gradcheck(cli: &Cli, args: &GradcheckArgs) -> Outcome<u8> {
    let cfg = GradCheckConfig {
        meshes: args.meshes as usize,
        samples_per_mesh: args.samples as usize,
        step: args.step,
        tolerance: args.tolerance,
        sharpness_gamma: args.sharpness,
        seed: cli.seed,
        ..GradCheckConfig::default()
    };
    let report = gradient_check(&cfg).map_err(config_err)?;
    let pass = report.is_pass(args.min_pass_rate);
    eprintln!(
        "{}: {}/{} coordinates within {:e} ({:.1}%)",
        if pass { "pass" } else { "FAIL" },
        report.passed,
        report.checked,
        args.tolerance,
        100.0 * report.pass_rate()
    );
    let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::new(Failure::OTHER, e.to_string()))?;
    match &cli.out {
        Some(path) => write(path, json.as_bytes())?,
        None => println!("{json}"),
    }
    Ok(if pass { 0 } else { Failure::OTHER })
}

fn serve(args: &ServeArgs) -> Outcome {
    let addr: std::net::SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .or_else(|_| format!("[{}]:{}", args.host, args.port).parse())
        .map_err(|e| config_err(format!("bad address {}:{}: {e}", args.host, args.port)))?;
    if let Some(root) = &args.mesh_root {
        if !root.is_dir() {
            return Err(config_err(format!("mesh root {} is not a directory", root.display())));
        }
    }
    let config = derender_service::ServiceConfig { mesh_root: args.mesh_root.clone() };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::new(Failure::OTHER, e.to_string()))?;
    runtime
        .block_on(derender_service::serve(addr, config))
        .map_err(|e| Failure::new(Failure::OTHER, e.to_string()))
}
