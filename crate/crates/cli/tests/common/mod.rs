//! A small COLMAP-style dataset of the synthetic toy scene, written to disk.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sparse_splat::ingest::{save_pfm, save_png};
use sparse_splat::raster::{render_forward, RenderOptions};
use sparse_splat::scene::Camera;
use sparse_splat::synthetic::{toy_scene, SyntheticOracle};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-splat"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub struct Dataset {
    pub root: PathBuf,
    pub colmap: PathBuf,
    pub images: PathBuf,
    pub priors: PathBuf,
    pub names: Vec<String>,
}

/// `count` views of the toy scene on an arc, at `width × height`, with a
/// COLMAP text model, PNG images, PFM priors and sparse points.
pub fn write_dataset(root: &Path, count: usize, width: u32, height: u32) -> Dataset {
    let scene = toy_scene(0);
    let oracle = SyntheticOracle::new(scene.gaussians.clone(), 1.5, 0.2, 0.0, 0);
    let colmap = root.join("sparse");
    let images = root.join("images");
    let priors = root.join("priors");
    for d in [&colmap, &images, &priors] {
        fs::create_dir_all(d).unwrap();
    }
    let f = 0.875 * width as f32;
    let (cx, cy) = (width as f32 / 2.0, height as f32 / 2.0);
    let mut images_txt = String::from("# IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME\n");
    let mut names = Vec::new();
    for i in 0..count {
        let az = (-50.0 + 100.0 * i as f32 / (count.max(2) - 1) as f32).to_radians();
        let eye = [4.2 * az.sin(), -0.6, -4.2 * az.cos()];
        let cam = Camera::look_at(0, eye, [0.0, 0.1, 0.3], [0.0, -1.0, 0.0], [f, f], [cx, cy], width, height).unwrap();
        let q = cam.quaternion();
        let t = cam.translation;
        // ids deliberately out of name order
        let id = count - i;
        let name = format!("view_{i:03}.png");
        writeln!(
            images_txt,
            "{id} {:?} {:?} {:?} {:?} {:?} {:?} {:?} 1 {name}\n",
            q[0], q[1], q[2], q[3], t[0], t[1], t[2]
        )
        .unwrap();
        // rebuild from the serialized pose so images match the parsed camera
        let cam = Camera::from_quaternion(0, [f, f], [cx, cy], width, height, q, t).unwrap();
        let out = render_forward(&scene.gaussians, &cam, &RenderOptions::new(0));
        save_png(&out.color, &images.join(&name)).unwrap();
        let prior = sparse_splat::regularize::DepthEstimator::estimate(
            &oracle,
            &sparse_splat::regularize::EstimateRequest {
                image: &out.color,
                camera: &cam,
                name: None,
            },
        )
        .unwrap();
        let stem = name.trim_end_matches(".png");
        save_pfm(&prior.values, &priors.join(format!("{stem}.pfm"))).unwrap();
        names.push(name);
    }
    fs::write(colmap.join("images.txt"), images_txt).unwrap();
    fs::write(
        colmap.join("cameras.txt"),
        format!("# CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]\n1 PINHOLE {width} {height} {f} {f} {cx} {cy}\n"),
    )
    .unwrap();
    let (points, colors) = scene.sparse_points(0.3, 0.05, 0);
    let mut pts = String::from("# POINT3D_ID X Y Z R G B ERROR TRACK[]\n");
    for (k, (p, c)) in points.iter().zip(&colors).enumerate() {
        writeln!(pts, "{} {} {} {} {} {} {} 0.5", k + 1, p[0], p[1], p[2], c[0], c[1], c[2]).unwrap();
    }
    fs::write(colmap.join("points3D.txt"), pts).unwrap();
    Dataset {
        root: root.to_owned(),
        colmap,
        images,
        priors,
        names,
    }
}

pub fn write_config(path: &Path, body: &str) {
    fs::write(path, body).unwrap();
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}
