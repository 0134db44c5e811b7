//! Benchmark set construction: rotation/scale derivations and 480 × 640 rectification.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::Homography;
use crate::imageio::{load_image, save_png};
use crate::kernels::{gaussian_blur, GaussianSpec};
use crate::tensor::Tensor;

/// Working resolution, `(width, height)`.
pub const TARGET_SIZE: (usize, usize) = (640, 480);
/// Multiples of 40° from 0° up to 210°.
pub const ROTATION_ANGLES: [u32; 6] = [0, 40, 80, 120, 160, 200];
pub const ZOOM_SCALES: [f64; 4] = [1.25, 1.5, 1.75, 2.0];

/// `T(c) · A · T(-c)` for the linear part `A` and image centre `c = (W/2, H/2)`.
fn about_center(a: [[f64; 2]; 2], width: usize, height: usize) -> Result<Homography> {
    let (cx, cy) = (width as f64 / 2.0, height as f64 / 2.0);
    let tx = cx - (a[0][0] * cx + a[0][1] * cy);
    let ty = cy - (a[1][0] * cx + a[1][1] * cy);
    Homography::new([
        [a[0][0], a[0][1], tx],
        [a[1][0], a[1][1], ty],
        [0.0, 0.0, 1.0],
    ])
}

/// Rotation by `angle_deg` about the image centre (clockwise on screen, y down).
pub fn rotation_homography(angle_deg: f64, width: usize, height: usize) -> Result<Homography> {
    if angle_deg.rem_euclid(360.0) == 0.0 {
        return Ok(Homography::identity());
    }
    let (s, c) = angle_deg.to_radians().sin_cos();
    about_center([[c, -s], [s, c]], width, height)
}

/// Zoom by `scale` about the image centre.
pub fn scale_homography(scale: f64, width: usize, height: usize) -> Result<Homography> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Homography(format!(
            "scale must be positive, got {scale}"
        )));
    }
    about_center([[scale, 0.0], [0.0, scale]], width, height)
}

/// Resamples `image` into an `out_w × out_h` canvas such that output pixel `p`
/// takes the bilinear source value at `H⁻¹ p`; samples outside the source are 0.
pub fn warp_image(image: &Tensor, h: &Homography, out_dims: (usize, usize)) -> Result<Tensor> {
    let (c, src_h, src_w) = image.chw()?;
    let (out_w, out_h) = out_dims;
    if out_w == 0 || out_h == 0 {
        return Err(Error::Shape("output extents must be positive".into()));
    }
    let inv = h.inverse()?;
    const SLACK: f64 = 1e-9;
    let (max_x, max_y) = ((src_w - 1) as f64, (src_h - 1) as f64);
    let mut out = Tensor::zeros(vec![c, out_h, out_w])?;
    let plane = out_h * out_w;
    for y in 0..out_h {
        for x in 0..out_w {
            let Some((u, v)) = inv.apply(x as f64, y as f64) else {
                continue;
            };
            if !(u >= -SLACK && u <= max_x + SLACK && v >= -SLACK && v <= max_y + SLACK) {
                continue;
            }
            let (u, v) = (u.clamp(0.0, max_x), v.clamp(0.0, max_y));
            let (x0, y0) = (u.floor() as usize, v.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(src_w - 1), (y0 + 1).min(src_h - 1));
            let (fx, fy) = (u - x0 as f64, v - y0 as f64);
            for ci in 0..c {
                let p = image.plane(ci);
                let top = lerp(p[y0 * src_w + x0], p[y0 * src_w + x1], fx);
                let bottom = lerp(p[y1 * src_w + x0], p[y1 * src_w + x1], fx);
                out.data_mut()[ci * plane + y * out_w + x] = lerp(top, bottom, fy);
            }
        }
    }
    Ok(out)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a * (1.0 - t) + b * t
    }
}

/// Resizes to `out_dims = (width, height)` and returns the pixel mapping
/// `diag(sx, sy, 1)` from the source to the resized frame. Downscaling is
/// preceded by a Gaussian low-pass.
pub fn resize(image: &Tensor, out_dims: (usize, usize)) -> Result<(Tensor, Homography)> {
    let (_, h, w) = image.chw()?;
    let sx = out_dims.0 as f64 / w as f64;
    let sy = out_dims.1 as f64 / h as f64;
    let s = Homography::scaling(sx, sy)?;
    let shrink = sx.min(sy);
    let source = if shrink < 1.0 {
        let sigma = 0.5 * ((1.0 / (shrink * shrink)) - 1.0).sqrt();
        let size = 2 * (3.0 * sigma).ceil() as usize + 1;
        gaussian_blur(image, &GaussianSpec::new(size, sigma)?)?
    } else {
        image.clone()
    };
    Ok((warp_image(&source, &s, out_dims)?, s))
}

/// Re-expresses a homography between native frames in resized frames:
/// `S₂ · H · S₁⁻¹`.
pub fn rectify_homography(
    h: &Homography,
    scale1: &Homography,
    scale2: &Homography,
) -> Result<Homography> {
    scale2.compose(h)?.compose(&scale1.inverse()?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeriveMode {
    Rotation,
    Scale,
}

impl std::str::FromStr for DeriveMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rotation" => Ok(Self::Rotation),
            "scale" => Ok(Self::Scale),
            other => Err(format!(
                "unknown mode `{other}` (expected rotation or scale)"
            )),
        }
    }
}

/// One image pair with its ground truth; paths are relative to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestPair {
    pub image1: PathBuf,
    pub image2: PathBuf,
    pub homography: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub pairs: Vec<ManifestPair>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<PathBuf>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Reads a manifest and resolves its relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::File {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|e| Error::File {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut m.pairs {
            for f in [&mut p.image1, &mut p.image2, &mut p.homography] {
                if f.is_relative() {
                    *f = base.join(&*f);
                }
            }
        }
        Ok(m)
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into())
}

/// Builds the rotation or scale set from seed images into `out_dir`.
///
/// Each seed is resized to [`TARGET_SIZE`] first. Unreadable seeds are logged,
/// listed under `skipped`, and otherwise ignored. Writes `manifest.json`.
pub fn derive_set(seeds: &[PathBuf], mode: DeriveMode, out_dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir)?;
    let (w, h) = TARGET_SIZE;
    let mut manifest = Manifest::default();
    for seed in seeds {
        let image = match load_image(seed, 3) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping seed {}: {e}", seed.display());
                manifest.skipped.push(seed.clone());
                continue;
            }
        };
        let (base, _) = resize(&image, TARGET_SIZE)?;
        let stem = stem_of(seed);
        let variants: Vec<(String, Homography)> = match mode {
            DeriveMode::Rotation => ROTATION_ANGLES
                .iter()
                .map(|&a| {
                    Ok((
                        format!("{stem}_rot{a:03}"),
                        rotation_homography(a as f64, w, h)?,
                    ))
                })
                .collect::<Result<_>>()?,
            DeriveMode::Scale => ZOOM_SCALES
                .iter()
                .map(|&s| {
                    let tag = (s * 100.0).round() as u32;
                    Ok((format!("{stem}_scale{tag}"), scale_homography(s, w, h)?))
                })
                .collect::<Result<_>>()?,
        };
        let reference = match mode {
            DeriveMode::Rotation => format!("{stem}_rot000.png"),
            DeriveMode::Scale => {
                let name = format!("{stem}_ref.png");
                save_png(&base, out_dir.join(&name))?;
                name
            }
        };
        for (name, hom) in variants {
            let img_name = format!("{name}.png");
            let h_name = format!("{name}.H");
            save_png(
                &warp_image(&base, &hom, TARGET_SIZE)?,
                out_dir.join(&img_name),
            )?;
            hom.write(out_dir.join(&h_name))?;
            manifest.pairs.push(ManifestPair {
                image1: reference.clone().into(),
                image2: img_name.into(),
                homography: h_name.into(),
            });
        }
    }
    manifest.write(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Converts an HPatches-style tree (`<scene>/1.ppm … 6.ppm`, `<scene>/H_1_k`)
/// into 640 × 480 images with rectified homographies and a manifest pairing
/// image 1 with each other image of its scene.
pub fn prepare_hpatches(root: &Path, out_dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir)?;
    let mut scenes: Vec<PathBuf> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    scenes.sort();
    let mut manifest = Manifest::default();
    for scene in scenes {
        let name = stem_of(&scene);
        let find = |idx: usize| -> Option<PathBuf> {
            ["ppm", "png", "pgm", "jpg"]
                .iter()
                .map(|ext| scene.join(format!("{idx}.{ext}")))
                .find(|p| p.exists())
        };
        let Some(first) = find(1) else {
            log::warn!("scene {} has no first image, skipped", scene.display());
            manifest.skipped.push(scene.clone());
            continue;
        };
        let img1 = match load_image(&first, 3) {
            Ok(i) => i,
            Err(e) => {
                log::warn!("skipping scene {}: {e}", scene.display());
                manifest.skipped.push(first);
                continue;
            }
        };
        let (r1, s1) = resize(&img1, TARGET_SIZE)?;
        let ref_name = format!("{name}_1.png");
        save_png(&r1, out_dir.join(&ref_name))?;
        for k in 2..=6 {
            let (Some(path), h_path) = (find(k), scene.join(format!("H_1_{k}"))) else {
                continue;
            };
            let img = match load_image(&path, 3) {
                Ok(i) => i,
                Err(e) => {
                    log::warn!("skipping {}: {e}", path.display());
                    manifest.skipped.push(path);
                    continue;
                }
            };
            let h = Homography::read(&h_path)?;
            let (rk, sk) = resize(&img, TARGET_SIZE)?;
            let hr = rectify_homography(&h, &s1, &sk)?;
            let img_name = format!("{name}_{k}.png");
            let h_name = format!("{name}_H_1_{k}");
            save_png(&rk, out_dir.join(&img_name))?;
            hr.write(out_dir.join(&h_name))?;
            manifest.pairs.push(ManifestPair {
                image1: ref_name.clone().into(),
                image2: img_name.into(),
                homography: h_name.into(),
            });
        }
    }
    manifest.write(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
