//! Synthetic star-field observations.
//!
//! A sample is produced by drawing a random attitude, projecting catalog stars
//! through a pinhole camera, and rendering three views of the same sky: a
//! photometric image, a unit-peak heatmap, and a fixed-length vector of the
//! brightest star positions. The label is the spherical cluster of the boresight.
//!
//! Pixel `(row, col)` has its centre at image coordinates `(v, u) = (row, col)`,
//! so the boresight lands on `(image_px / 2, image_px / 2)`.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::sphere::{to_unit_vector, ClusterModel, UnitVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    /// Full field of view across the square sensor, degrees.
    pub fov_deg: f64,
    pub image_px: usize,
    pub psf_sigma_px: f64,
    /// Magnitude rendered at intensity 1.0.
    pub mag_zero: f64,
    /// Faintest magnitude that is rendered at all.
    pub mag_limit: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fov_deg: 20.0,
            image_px: 128,
            psf_sigma_px: 1.2,
            mag_zero: 2.0,
            mag_limit: 6.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 90.0) {
            return Err(Error::Config(format!("fov_deg {} outside (0, 90)", self.fov_deg)));
        }
        if self.image_px < 16 {
            return Err(Error::Config(format!("image_px {} < 16", self.image_px)));
        }
        if !(self.psf_sigma_px > 0.0) {
            return Err(Error::Config("psf_sigma_px must be positive".into()));
        }
        if !(self.mag_limit >= self.mag_zero) {
            return Err(Error::Config("mag_limit must be >= mag_zero".into()));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        self.image_px as f64 / (2.0 * (self.fov_deg.to_radians() / 2.0).tan())
    }

    pub fn intensity(&self, vmag: f64) -> f64 {
        10f64.powf(-0.4 * (vmag - self.mag_zero)).min(1.0)
    }
}

/// Everything that shapes a rendered sample besides the sky and the attitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneConfig {
    pub camera: CameraModel,
    pub heat_px: usize,
    pub heat_sigma_px: f64,
    /// Number of stars encoded in the coordinate vector.
    pub n_stars: usize,
    /// Standard deviation of the additive image noise.
    pub noise_sigma: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            camera: CameraModel::default(),
            heat_px: 32,
            heat_sigma_px: 1.0,
            n_stars: 8,
            noise_sigma: 0.02,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        if self.heat_px < 4 {
            return Err(Error::Config("heat_px must be >= 4".into()));
        }
        if !(self.heat_sigma_px > 0.0) {
            return Err(Error::Config("heat_sigma_px must be positive".into()));
        }
        if self.n_stars == 0 {
            return Err(Error::Config("n_stars must be >= 1".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn coord_len(&self) -> usize {
        3 * self.n_stars
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attitude {
    pub boresight_ra_deg: f64,
    pub boresight_dec_deg: f64,
    pub roll_deg: f64,
}

impl Attitude {
    pub fn boresight(&self) -> UnitVector {
        to_unit_vector(self.boresight_ra_deg, self.boresight_dec_deg).expect("attitude within domain")
    }

    /// Camera axes `(u, v, boresight)` in the celestial frame.
    pub fn camera_axes(&self) -> [[f64; 3]; 3] {
        let a = self.boresight_ra_deg.to_radians();
        let d = self.boresight_dec_deg.to_radians();
        let r = self.roll_deg.to_radians();
        let (sa, ca) = a.sin_cos();
        let (sd, cd) = d.sin_cos();
        let (sr, cr) = r.sin_cos();
        let b = [cd * ca, cd * sa, sd];
        let east = [-sa, ca, 0.0];
        let north = [-sd * ca, -sd * sa, cd];
        let u = [
            cr * east[0] + sr * north[0],
            cr * east[1] + sr * north[1],
            cr * east[2] + sr * north[2],
        ];
        let v = [
            -sr * east[0] + cr * north[0],
            -sr * east[1] + cr * north[1],
            -sr * east[2] + cr * north[2],
        ];
        [u, v, b]
    }
}

/// Boresight uniform on the sphere, roll uniform in `[0, 360)`.
pub fn sample_attitude<R: Rng + ?Sized>(rng: &mut R) -> Attitude {
    let ra = rng.random::<f64>() * 360.0;
    let dec = (2.0 * rng.random::<f64>() - 1.0).clamp(-1.0, 1.0).asin().to_degrees();
    let roll = rng.random::<f64>() * 360.0;
    Attitude {
        boresight_ra_deg: ra,
        boresight_dec_deg: dec,
        roll_deg: roll,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedStar {
    pub id: u64,
    pub u_px: f64,
    pub v_px: f64,
    pub intensity: f64,
}

/// A catalog with unit vectors precomputed, restricted to renderable stars.
#[derive(Debug, Clone)]
pub struct StarField {
    entries: Vec<(u64, [f64; 3], f64)>,
}

impl StarField {
    pub fn new(catalog: &Catalog, camera: &CameraModel) -> Self {
        let entries = catalog
            .stars
            .iter()
            .filter(|s| s.vmag <= camera.mag_limit)
            .map(|s| {
                let v = to_unit_vector(s.ra_deg, s.dec_deg).expect("catalog validated at parse");
                (s.id, v.as_array(), s.vmag)
            })
            .collect();
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Gnomonic projection about the boresight. Stars behind the camera or
    /// farther than `fov / sqrt(2)` from the boresight are dropped; the result
    /// is sorted by descending intensity, then ascending id.
    pub fn project(&self, attitude: &Attitude, camera: &CameraModel) -> Vec<ProjectedStar> {
        let [ua, va, b] = attitude.camera_axes();
        let cos_max = (camera.fov_deg / std::f64::consts::SQRT_2).to_radians().cos();
        let f = camera.focal_px();
        let c = camera.image_px as f64 / 2.0;
        let dot = |p: &[f64; 3], q: &[f64; 3]| p[0] * q[0] + p[1] * q[1] + p[2] * q[2];

        let mut out: Vec<ProjectedStar> = self
            .entries
            .iter()
            .filter_map(|(id, s, vmag)| {
                let z = dot(s, &b);
                if z <= 0.0 || z < cos_max {
                    return None;
                }
                Some(ProjectedStar {
                    id: *id,
                    u_px: c + f * dot(s, &ua) / z,
                    v_px: c + f * dot(s, &va) / z,
                    intensity: camera.intensity(*vmag),
                })
            })
            .collect();
        out.sort_by(|a, b| b.intensity.total_cmp(&a.intensity).then(a.id.cmp(&b.id)));
        out
    }
}

pub fn project_stars(catalog: &Catalog, attitude: &Attitude, camera: &CameraModel) -> Vec<ProjectedStar> {
    StarField::new(catalog, camera).project(attitude, camera)
}

/// Adds an isotropic Gaussian of the given peak, truncated at radius `4 sigma`.
fn splat(buf: &mut [f64], side: usize, u: f64, v: f64, peak: f64, sigma: f64) {
    let r = 4.0 * sigma;
    let r2 = r * r;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let lo = |x: f64| (x - r).ceil().max(0.0) as usize;
    let hi = |x: f64| ((x + r).floor()).min(side as f64 - 1.0);
    let (col_hi, row_hi) = (hi(u), hi(v));
    if col_hi < 0.0 || row_hi < 0.0 {
        return;
    }
    for row in lo(v)..=row_hi as usize {
        let dy = row as f64 - v;
        for col in lo(u)..=col_hi as usize {
            let dx = col as f64 - u;
            let d2 = dx * dx + dy * dy;
            if d2 <= r2 {
                buf[row * side + col] += peak * (-d2 * inv).exp();
            }
        }
    }
}

/// Photometric image: Gaussian PSF per star, additive Gaussian noise, clip to `[0, 1]`.
/// No random numbers are drawn when `noise_sigma == 0`.
pub fn render_image<R: Rng + ?Sized>(stars: &[ProjectedStar], camera: &CameraModel, noise_sigma: f64, rng: &mut R) -> Vec<f32> {
    let side = camera.image_px;
    let mut buf = vec![0.0f64; side * side];
    for s in stars {
        splat(&mut buf, side, s.u_px, s.v_px, s.intensity, camera.psf_sigma_px);
    }
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("sigma > 0");
        for p in buf.iter_mut() {
            *p += normal.sample(rng);
        }
    }
    buf.into_iter().map(|p| p.clamp(0.0, 1.0) as f32).collect()
}

/// Geometry-only heatmap: every star is a unit-peak Gaussian at heatmap scale.
pub fn render_heatmap(stars: &[ProjectedStar], image_px: usize, heat_px: usize, heat_sigma_px: f64) -> Vec<f32> {
    let scale = heat_px as f64 / image_px as f64;
    let mut buf = vec![0.0f64; heat_px * heat_px];
    for s in stars {
        let u = (s.u_px + 0.5) * scale - 0.5;
        let v = (s.v_px + 0.5) * scale - 0.5;
        splat(&mut buf, heat_px, u, v, 1.0, heat_sigma_px);
    }
    buf.into_iter().map(|p| p.clamp(0.0, 1.0) as f32).collect()
}

/// `(u / image_px, v / image_px, intensity)` for the first `n_stars` stars that
/// fall inside the frame, zero-padded to `3 * n_stars`. Input must already be
/// sorted brightest first.
pub fn coord_vector(stars: &[ProjectedStar], n_stars: usize, image_px: usize) -> Vec<f32> {
    let side = image_px as f64;
    let mut out = vec![0.0f32; 3 * n_stars];
    let in_frame = stars
        .iter()
        .filter(|s| (0.0..=side).contains(&s.u_px) && (0.0..=side).contains(&s.v_px));
    for (slot, s) in out.chunks_exact_mut(3).zip(in_frame) {
        slot[0] = (s.u_px / side) as f32;
        slot[1] = (s.v_px / side) as f32;
        slot[2] = s.intensity as f32;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
        })
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => Err(Error::InvalidArgument(format!("split must be train or val, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Vec<f32>,
    pub heatmap: Vec<f32>,
    pub coords: Vec<f32>,
    pub label: usize,
    pub attitude: Attitude,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub k: usize,
    pub scene: SceneConfig,
    pub master_seed: u64,
    pub split: Split,
}

/// Seed of sample `index` under `master_seed` (SplitMix64 finaliser).
pub fn sample_seed(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Renders one sample from its own seed. Every random draw (attitude, noise)
/// comes from a stream derived only from `seed`.
pub fn render_sample(field: &StarField, model: &ClusterModel, scene: &SceneConfig, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attitude = sample_attitude(&mut rng);
    render_sample_at(field, model, scene, attitude, &mut rng, seed)
}

pub fn render_sample_at<R: Rng + ?Sized>(
    field: &StarField,
    model: &ClusterModel,
    scene: &SceneConfig,
    attitude: Attitude,
    rng: &mut R,
    noise_seed: u64,
) -> Sample {
    let cam = &scene.camera;
    let stars = field.project(&attitude, cam);
    let image = render_image(&stars, cam, scene.noise_sigma, rng);
    let heatmap = render_heatmap(&stars, cam.image_px, scene.heat_px, scene.heat_sigma_px);
    let coords = coord_vector(&stars, scene.n_stars, cam.image_px);
    Sample {
        image,
        heatmap,
        coords,
        label: model.assign_label(&attitude.boresight()),
        attitude,
        noise_seed,
    }
}

/// Generates `count` samples. Each sample uses its own RNG stream derived from
/// `(master_seed, index)`, so the result does not depend on thread count.
pub fn generate_dataset(
    catalog: &Catalog,
    model: &ClusterModel,
    count: usize,
    scene: &SceneConfig,
    master_seed: u64,
    split: Split,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::InvalidArgument("dataset count must be >= 1".into()));
    }
    scene.validate()?;
    let field = StarField::new(catalog, &scene.camera);
    let samples = (0..count as u64)
        .into_par_iter()
        .map(|i| render_sample(&field, model, scene, sample_seed(master_seed, i)))
        .collect();
    Ok(Dataset {
        samples,
        k: model.k(),
        scene: *scene,
        master_seed,
        split,
    })
}

pub const META_FILE: &str = "meta.txt";
pub const SAMPLES_FILE: &str = "samples.bin";
const DATASET_FORMAT: &str = "star-fusion-dataset-v1";

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Bytes per record in `samples.bin`.
    pub fn record_len(scene: &SceneConfig) -> usize {
        let c = &scene.camera;
        4 + 3 * 8 + 4 * (c.image_px * c.image_px + scene.heat_px * scene.heat_px + scene.coord_len())
    }

    pub fn meta_text(&self) -> String {
        let c = &self.scene.camera;
        let s = &self.scene;
        let pairs: [(&str, String); 14] = [
            ("format", DATASET_FORMAT.to_string()),
            ("split", self.split.to_string()),
            ("count", self.len().to_string()),
            ("k", self.k.to_string()),
            ("image_px", c.image_px.to_string()),
            ("heat_px", s.heat_px.to_string()),
            ("n_stars", s.n_stars.to_string()),
            ("fov_deg", c.fov_deg.to_string()),
            ("psf_sigma_px", c.psf_sigma_px.to_string()),
            ("mag_zero", c.mag_zero.to_string()),
            ("mag_limit", c.mag_limit.to_string()),
            ("heat_sigma_px", s.heat_sigma_px.to_string()),
            ("noise_sigma", s.noise_sigma.to_string()),
            ("master_seed", self.master_seed.to_string()),
        ];
        pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(META_FILE), self.meta_text())?;
        let mut w = BufWriter::new(fs::File::create(dir.join(SAMPLES_FILE))?);
        for s in &self.samples {
            w.write_all(&(s.label as u32).to_le_bytes())?;
            for x in [s.attitude.boresight_ra_deg, s.attitude.boresight_dec_deg, s.attitude.roll_deg] {
                w.write_all(&x.to_le_bytes())?;
            }
            for arr in [&s.image, &s.heatmap, &s.coords] {
                for x in arr.iter() {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Dataset> {
        let meta_path = dir.join(META_FILE);
        let meta = DatasetMeta::read(&meta_path)?;
        let origin = dir.join(SAMPLES_FILE).display().to_string();

        let mut bytes = Vec::new();
        fs::File::open(dir.join(SAMPLES_FILE))?.read_to_end(&mut bytes)?;
        let rec = Dataset::record_len(&meta.scene);
        if bytes.len() != rec * meta.count {
            return Err(Error::format(
                origin,
                format!("expected {} bytes for {} records, found {}", rec * meta.count, meta.count, bytes.len()),
            ));
        }

        let c = &meta.scene.camera;
        let (n_img, n_heat, n_coord) = (c.image_px * c.image_px, meta.scene.heat_px * meta.scene.heat_px, meta.scene.coord_len());
        let mut samples = Vec::with_capacity(meta.count);
        for (i, chunk) in bytes.chunks_exact(rec).enumerate() {
            let mut cur = ByteCursor { buf: chunk, pos: 0 };
            let label = cur.u32() as usize;
            if label >= meta.k {
                return Err(Error::format(origin, format!("record {i}: label {label} >= k {}", meta.k)));
            }
            let attitude = Attitude {
                boresight_ra_deg: cur.f64(),
                boresight_dec_deg: cur.f64(),
                roll_deg: cur.f64(),
            };
            samples.push(Sample {
                image: cur.f32s(n_img),
                heatmap: cur.f32s(n_heat),
                coords: cur.f32s(n_coord),
                label,
                attitude,
                noise_seed: sample_seed(meta.master_seed, i as u64),
            });
        }
        if samples.is_empty() {
            return Err(Error::format(origin, "dataset is empty"));
        }
        Ok(Dataset {
            samples,
            k: meta.k,
            scene: meta.scene,
            master_seed: meta.master_seed,
            split: meta.split,
        })
    }
}

/// Parsed `meta.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    pub split: Split,
    pub count: usize,
    pub k: usize,
    pub scene: SceneConfig,
    pub master_seed: u64,
}

impl DatasetMeta {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let origin = path.display().to_string();
        let map: std::collections::HashMap<&str, &str> = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim(), v.trim()))
            .collect();
        fn get<T: FromStr>(map: &std::collections::HashMap<&str, &str>, key: &str, origin: &str) -> Result<T> {
            map.get(key)
                .ok_or_else(|| Error::format(origin, format!("missing key {key}")))?
                .parse()
                .map_err(|_| Error::format(origin, format!("bad value for {key}")))
        }
        if map.get("format").copied() != Some(DATASET_FORMAT) {
            return Err(Error::format(origin, "not a star-fusion dataset (format key)"));
        }
        let camera = CameraModel {
            fov_deg: get(&map, "fov_deg", &origin)?,
            image_px: get(&map, "image_px", &origin)?,
            psf_sigma_px: get(&map, "psf_sigma_px", &origin)?,
            mag_zero: get(&map, "mag_zero", &origin)?,
            mag_limit: get(&map, "mag_limit", &origin)?,
        };
        let scene = SceneConfig {
            camera,
            heat_px: get(&map, "heat_px", &origin)?,
            heat_sigma_px: get(&map, "heat_sigma_px", &origin)?,
            n_stars: get(&map, "n_stars", &origin)?,
            noise_sigma: get(&map, "noise_sigma", &origin)?,
        };
        let split: String = get(&map, "split", &origin)?;
        Ok(Self {
            split: split.parse()?,
            count: get(&map, "count", &origin)?,
            k: get(&map, "k", &origin)?,
            scene,
            master_seed: get(&map, "master_seed", &origin)?,
        })
    }
}

struct ByteCursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl ByteCursor<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.buf[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        out
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
    fn f32s(&mut self, n: usize) -> Vec<f32> {
        (0..n).map(|_| f32::from_le_bytes(self.take())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{parse_catalog_str, StarRecord};

    fn star_at(u: f64, v: f64, intensity: f64) -> ProjectedStar {
        ProjectedStar { id: 1, u_px: u, v_px: v, intensity }
    }

    fn one_star_catalog(ra: f64, dec: f64, vmag: f64) -> Catalog {
        Catalog {
            stars: vec![StarRecord { id: 1, ra_deg: ra, dec_deg: dec, vmag }],
            source_name: "t".into(),
        }
    }

    #[test]
    fn attitude_sampling_is_seeded() {
        let a = sample_attitude(&mut ChaCha8Rng::seed_from_u64(4));
        let b = sample_attitude(&mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
        assert!((0.0..360.0).contains(&a.roll_deg));
    }

    #[test]
    fn attitude_sampling_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 100_000;
        let mut sum = [0.0; 3];
        let mut cap = 0usize;
        for _ in 0..n {
            let a = sample_attitude(&mut rng);
            let v = a.boresight();
            sum[0] += v.x;
            sum[1] += v.y;
            sum[2] += v.z;
            if a.boresight_dec_deg > 60.0 {
                cap += 1;
            }
        }
        let norm = (sum.iter().map(|s| s * s).sum::<f64>()).sqrt() / n as f64;
        assert!(norm < 0.02, "mean norm {norm}");
        // Cap area above dec 60: (1 - sin 60)/2.
        let expect = (1.0 - 60f64.to_radians().sin()) / 2.0;
        let frac = cap as f64 / n as f64;
        assert!((frac - expect).abs() < 0.005, "{frac} vs {expect}");
    }

    #[test]
    fn boresight_star_projects_to_centre_for_any_roll() {
        let cam = CameraModel::default();
        let cat = one_star_catalog(123.0, -40.0, 3.0);
        for roll in [0.0, 33.0, 190.0, 359.0] {
            let att = Attitude { boresight_ra_deg: 123.0, boresight_dec_deg: -40.0, roll_deg: roll };
            let p = project_stars(&cat, &att, &cam);
            assert_eq!(p.len(), 1);
            assert!((p[0].u_px - 64.0).abs() < 1e-9 && (p[0].v_px - 64.0).abs() < 1e-9);
        }
    }

    #[test]
    fn half_fov_star_lands_on_right_edge() {
        let cam = CameraModel::default();
        // Roll 0: camera +u is local east. A star fov/2 east along the equator.
        let cat = one_star_catalog(cam.fov_deg / 2.0, 0.0, 3.0);
        let att = Attitude { boresight_ra_deg: 0.0, boresight_dec_deg: 0.0, roll_deg: 0.0 };
        let p = project_stars(&cat, &att, &cam);
        // f * tan(fov/2) = image_px / 2, so u = image_px.
        assert!((p[0].u_px - cam.image_px as f64).abs() < 1e-9, "{}", p[0].u_px);
        assert!((p[0].v_px - 64.0).abs() < 1e-9);
    }

    #[test]
    fn projection_culls_and_sorts() {
        let cam = CameraModel::default();
        let cat = parse_catalog_str(
            "1,0,0,4.0\n2,1,1,2.0\n3,180,0,1.0\n4,0,15,3.0\n5,2,-2,2.0\n6,0.5,0.5,7.5",
            "t",
        )
        .unwrap();
        let att = Attitude { boresight_ra_deg: 0.0, boresight_dec_deg: 0.0, roll_deg: 45.0 };
        let p = project_stars(&cat, &att, &cam);
        // 3 is behind the camera, 4 is 15 deg off-axis (> 20/sqrt2), 6 is too faint.
        let ids: Vec<u64> = p.iter().map(|s| s.id).collect();
        assert_eq!(ids, vec![2, 5, 1]);
        assert_eq!(p[0].intensity, 1.0);
        assert!((cam.intensity(cam.mag_zero) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn empty_sky_renders_black() {
        let cam = CameraModel::default();
        let img = render_image(&[], &cam, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(img.iter().all(|&p| p == 0.0));
        assert!(render_heatmap(&[], 128, 32, 1.0).iter().all(|&p| p == 0.0));
    }

    #[test]
    fn single_star_profile() {
        let cam = CameraModel::default();
        let img = render_image(&[star_at(40.0, 50.0, 0.7)], &cam, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        let side = cam.image_px;
        assert!((img[50 * side + 40] as f64 - 0.7).abs() < 1e-7);
        let s = cam.psf_sigma_px;
        let expect = 0.7 * (-1.0 / (2.0 * s * s)).exp();
        assert!((img[50 * side + 41] as f64 - expect).abs() < 1e-7);
        assert!((img[51 * side + 40] as f64 - expect).abs() < 1e-7);
        // Truncated beyond 4 sigma.
        assert_eq!(img[50 * side + 40 + 5], 0.0);
    }

    #[test]
    fn overlapping_stars_clip_at_one() {
        let cam = CameraModel::default();
        let stars = [star_at(64.0, 64.0, 0.9), star_at(64.0, 64.0, 0.5)];
        let img = render_image(&stars, &cam, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(img.iter().cloned().fold(0.0f32, f32::max), 1.0);
    }

    #[test]
    fn noise_stays_in_range() {
        let cam = CameraModel::default();
        let img = render_image(&[star_at(10.0, 10.0, 1.0)], &cam, 0.3, &mut ChaCha8Rng::seed_from_u64(8));
        assert!(img.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p)));
        assert!(img.iter().any(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn rendering_is_linear_below_clip() {
        let cam = CameraModel::default();
        let a = [star_at(30.3, 40.7, 0.3), star_at(80.0, 20.2, 0.2)];
        let b = [star_at(31.0, 41.1, 0.25), star_at(100.5, 100.5, 0.4)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ia = render_image(&a, &cam, 0.0, &mut rng);
        let ib = render_image(&b, &cam, 0.0, &mut rng);
        let both: Vec<ProjectedStar> = a.iter().chain(&b).copied().collect();
        let iab = render_image(&both, &cam, 0.0, &mut rng);
        for ((x, y), z) in ia.iter().zip(&ib).zip(&iab) {
            assert!((x + y - z).abs() < 1e-6);
        }
    }

    #[test]
    fn heatmap_has_unit_peaks() {
        // Image u = 4h + 1.5 maps to heat pixel h exactly (scale 1/4).
        let faint = star_at(4.0 * 10.0 + 1.5, 4.0 * 12.0 + 1.5, 0.01);
        let h = render_heatmap(&[faint], 128, 32, 1.0);
        assert_eq!(h[12 * 32 + 10], 1.0);

        let far = star_at(4.0 * 25.0 + 1.5, 4.0 * 25.0 + 1.5, 0.9);
        let h2 = render_heatmap(&[faint, far], 128, 32, 1.0);
        assert_eq!(h2.iter().cloned().fold(0.0f32, f32::max), 1.0);
        assert_eq!(h2[25 * 32 + 25], 1.0);
        // Blobs are separated by well over 8 sigma; midpoint is dark.
        assert_eq!(h2[18 * 32 + 18], 0.0);
    }

    #[test]
    fn coord_vector_examples() {
        assert_eq!(coord_vector(&[], 8, 128), vec![0.0; 24]);
        assert_eq!(
            coord_vector(&[star_at(64.0, 64.0, 0.5)], 2, 128),
            vec![0.5, 0.5, 0.5, 0.0, 0.0, 0.0]
        );
        // Off-frame stars are skipped.
        let v = coord_vector(&[star_at(-3.0, 64.0, 0.9), star_at(32.0, 96.0, 0.4)], 1, 128);
        assert_eq!(v, vec![0.25, 0.75, 0.4]);
    }

    #[test]
    fn coord_vector_keeps_brightest() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut stars: Vec<ProjectedStar> = (0..10)
            .map(|i| ProjectedStar {
                id: i,
                u_px: rng.random::<f64>() * 128.0,
                v_px: rng.random::<f64>() * 128.0,
                intensity: rng.random(),
            })
            .collect();
        stars.sort_by(|a, b| b.intensity.total_cmp(&a.intensity));
        let v = coord_vector(&stars, 8, 128);

        let mut oracle: Vec<f64> = stars.iter().map(|s| s.intensity).collect();
        oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let got: Vec<f64> = v.chunks(3).map(|c| c[2] as f64).collect();
        for (g, o) in got.iter().zip(&oracle[..8]) {
            assert!((g - o).abs() < 1e-7);
        }
    }

    #[test]
    fn sample_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| sample_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(sample_seed(1, 0), sample_seed(2, 0));
    }

    #[test]
    fn split_parsing() {
        assert_eq!("train".parse::<Split>().unwrap(), Split::Train);
        assert_eq!(Split::Val.to_string(), "val");
        assert!("test".parse::<Split>().is_err());
    }
}
