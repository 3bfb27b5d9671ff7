//! Unit-sphere geometry and spherical K-means pseudo-labeling.
//!
//! Boresight directions `(ra, dec)` are mapped to unit vectors, clustered with
//! K-means++ seeding and Lloyd iterations, and the resulting centroids define
//! the discrete label space. Clustering in vector space removes the RA
//! wrap-around at 0/360 degrees.
//!
//! Centroid updates use the arithmetic mean *renormalised to unit length*,
//! which is the exact minimiser of the within-cluster squared chord distance
//! on the sphere; Lloyd's inertia is therefore non-increasing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitVector {
    pub const X: UnitVector = UnitVector { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: UnitVector = UnitVector { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: UnitVector = UnitVector { x: 0.0, y: 0.0, z: 1.0 };

    /// Normalises an arbitrary non-zero vector.
    pub fn normalize(x: f64, y: f64, z: f64) -> Option<UnitVector> {
        let n = (x * x + y * y + z * z).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        Some(UnitVector { x: x / n, y: y / n, z: z / n })
    }

    pub fn dot(&self, o: &UnitVector) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &UnitVector) -> [f64; 3] {
        [
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        ]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Squared Euclidean (chord) distance.
    #[inline]
    pub fn chord2(&self, o: &UnitVector) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        dx * dx + dy * dy + dz * dz
    }

    /// Back to `(ra_deg, dec_deg)`, RA in `[0, 360)`.
    pub fn to_radec(&self) -> (f64, f64) {
        let ra = self.y.atan2(self.x).to_degrees().rem_euclid(360.0);
        let ra = if ra >= 360.0 { 0.0 } else { ra };
        (ra, self.z.clamp(-1.0, 1.0).asin().to_degrees())
    }
}

/// `[cos d cos a, cos d sin a, sin d]` for RA `a` and declination `d` in degrees.
pub fn to_unit_vector(ra_deg: f64, dec_deg: f64) -> Result<UnitVector> {
    if !ra_deg.is_finite() || !dec_deg.is_finite() {
        return Err(Error::Domain(format!("non-finite coordinates ({ra_deg}, {dec_deg})")));
    }
    if !(-90.0..=90.0).contains(&dec_deg) {
        return Err(Error::Domain(format!("declination {dec_deg} outside [-90, 90]")));
    }
    let a = ra_deg.rem_euclid(360.0).to_radians();
    let d = dec_deg.to_radians();
    let (sa, ca) = a.sin_cos();
    let (sd, cd) = d.sin_cos();
    Ok(UnitVector { x: cd * ca, y: cd * sa, z: sd })
}

/// Great-circle arc length in radians, via `atan2(|a x b|, a . b)`.
pub fn geodesic_distance(a: &UnitVector, b: &UnitVector) -> f64 {
    let c = a.cross(b);
    let s = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    s.atan2(a.dot(b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<UnitVector>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Sum of squared chord distances to the assigned centroid.
    pub inertia: f64,
    /// Inertia after each assignment step; empty for models loaded from disk.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn from_centroids(centroids: Vec<UnitVector>) -> Result<Self> {
        if centroids.len() < 2 {
            return Err(Error::InvalidArgument("a cluster model needs k >= 2".into()));
        }
        for c in &centroids {
            if (c.dot(c) - 1.0).abs() > 1e-9 {
                return Err(Error::Domain("centroid is not unit length".into()));
            }
        }
        Ok(Self {
            centroids,
            iterations_run: 0,
            converged: true,
            inertia: 0.0,
            inertia_history: Vec::new(),
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Nearest centroid by squared chord distance; lowest index wins ties.
    pub fn assign_label(&self, v: &UnitVector) -> usize {
        nearest(&self.centroids, v).0
    }

    pub fn assign_all(&self, vectors: &[UnitVector]) -> Vec<usize> {
        vectors.iter().map(|v| self.assign_label(v)).collect()
    }

    /// Nearest and second-nearest centroid, ties to the lower index.
    pub fn nearest_two(&self, v: &UnitVector) -> (usize, usize) {
        let mut first = (usize::MAX, f64::INFINITY);
        let mut second = (usize::MAX, f64::INFINITY);
        for (i, c) in self.centroids.iter().enumerate() {
            let d = c.chord2(v);
            if d < first.1 {
                second = first;
                first = (i, d);
            } else if d < second.1 {
                second = (i, d);
            }
        }
        (first.0, second.0)
    }

    /// Text form: `k=<K>`, then one `x y z` line per centroid, then `#` metadata lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("k={}\n", self.k());
        for c in &self.centroids {
            let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", c.x, c.y, c.z);
        }
        let _ = writeln!(
            out,
            "# iterations={} converged={} inertia={:.17e}",
            self.iterations_run, self.converged, self.inertia
        );
        out
    }

    pub fn from_text(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().map(|l| l.trim_end_matches('\r'));
        let first = lines.next().ok_or_else(|| Error::format(origin, "empty file"))?;
        let k: usize = first
            .strip_prefix("k=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::format(origin, "first line must be k=<K>"))?;

        let mut centroids = Vec::with_capacity(k);
        for i in 0..k {
            let line = lines
                .next()
                .ok_or_else(|| Error::format(origin, format!("expected {k} centroid lines, found {i}")))?;
            let v: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::format(origin, format!("bad centroid line {}", i + 2)))?;
            if v.len() != 3 {
                return Err(Error::format(origin, format!("centroid line {} needs 3 numbers", i + 2)));
            }
            centroids.push(UnitVector { x: v[0], y: v[1], z: v[2] });
        }
        let mut model = ClusterModel::from_centroids(centroids).map_err(|e| Error::format(origin, e.to_string()))?;

        for line in lines {
            let Some(meta) = line.strip_prefix('#') else { continue };
            for kv in meta.split_whitespace() {
                match kv.split_once('=') {
                    Some(("iterations", v)) => model.iterations_run = v.parse().unwrap_or(0),
                    Some(("converged", v)) => model.converged = v == "true",
                    Some(("inertia", v)) => model.inertia = v.parse().unwrap_or(0.0),
                    _ => {}
                }
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_text(&text, &path.display().to_string())
    }
}

/// Free-function forms matching the rest of the pipeline.
pub fn assign_label(model: &ClusterModel, v: &UnitVector) -> usize {
    model.assign_label(v)
}

pub fn nearest_two(model: &ClusterModel, v: &UnitVector) -> (usize, usize) {
    model.nearest_two(v)
}

#[inline]
fn nearest(centroids: &[UnitVector], v: &UnitVector) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = c.chord2(v);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// K-means++ seeding with D^2 sampling over squared chord distance.
/// Returns the indices of the chosen vectors.
pub fn kmeans_pp_indices<R: Rng + ?Sized>(vectors: &[UnitVector], k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    if vectors.len() < k {
        return Err(Error::InfeasibleInit { k, distinct: count_distinct(vectors) });
    }

    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..vectors.len()));
    let mut d2: Vec<f64> = vectors.iter().map(|v| v.chord2(&vectors[chosen[0]])).collect();

    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InfeasibleInit { k, distinct: count_distinct(vectors) });
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        // Fall back to the last positive-weight point if rounding runs past the end.
        let mut pick = d2.iter().rposition(|&d| d > 0.0).expect("total > 0");
        for (i, &d) in d2.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            if acc > target {
                pick = i;
                break;
            }
        }
        chosen.push(pick);
        let c = vectors[pick];
        for (di, v) in d2.iter_mut().zip(vectors) {
            *di = di.min(v.chord2(&c));
        }
    }
    Ok(chosen)
}

pub fn kmeans_pp_init<R: Rng + ?Sized>(vectors: &[UnitVector], k: usize, rng: &mut R) -> Result<Vec<UnitVector>> {
    Ok(kmeans_pp_indices(vectors, k, rng)?
        .into_iter()
        .map(|i| vectors[i])
        .collect())
}

fn count_distinct(vectors: &[UnitVector]) -> usize {
    let mut keys: Vec<[u64; 3]> = vectors
        .iter()
        .map(|v| [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()])
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once no centroid moves by more than this (Euclidean).
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize) -> Self {
        Self { k, max_iter: DEFAULT_MAX_ITER, tol: DEFAULT_TOL }
    }
}

/// Spherical K-means: K-means++ seeding followed by Lloyd iterations with
/// renormalised-mean centroid updates.
///
/// An empty cluster is reseeded to the point farthest from its own assigned
/// centroid (each point used at most once per update). The same repair is
/// applied if a cluster's mean has (numerically) zero length.
pub fn spherical_kmeans<R: Rng + ?Sized>(vectors: &[UnitVector], params: KMeansParams, rng: &mut R) -> Result<ClusterModel> {
    let centroids = kmeans_pp_init(vectors, params.k, rng)?;
    lloyd(vectors, centroids, params)
}

/// Lloyd iterations from explicit starting centroids.
pub fn lloyd(vectors: &[UnitVector], mut centroids: Vec<UnitVector>, params: KMeansParams) -> Result<ClusterModel> {
    let k = centroids.len();
    if k < 2 || vectors.len() < k {
        return Err(Error::InfeasibleInit { k, distinct: count_distinct(vectors) });
    }
    let mut labels = vec![0usize; vectors.len()];
    let mut dists = vec![0.0f64; vectors.len()];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        history.push(assign_step(vectors, &centroids, &mut labels, &mut dists));
        iterations += 1;

        let mut sums = vec![[0.0f64; 3]; k];
        let mut counts = vec![0usize; k];
        for (v, &l) in vectors.iter().zip(&labels) {
            sums[l][0] += v.x;
            sums[l][1] += v.y;
            sums[l][2] += v.z;
            counts[l] += 1;
        }

        let mut used = vec![false; vectors.len()];
        let mut movement: f64 = 0.0;
        for c in 0..k {
            let updated = if counts[c] > 0 {
                UnitVector::normalize(sums[c][0], sums[c][1], sums[c][2])
            } else {
                None
            };
            let updated = match updated {
                Some(u) => u,
                None => {
                    let far = farthest_unused(&dists, &used);
                    used[far] = true;
                    dists[far] = 0.0;
                    vectors[far]
                }
            };
            movement = movement.max(updated.chord2(&centroids[c]).sqrt());
            centroids[c] = updated;
        }
        if movement < params.tol {
            converged = true;
            break;
        }
    }

    let inertia = assign_step(vectors, &centroids, &mut labels, &mut dists);
    history.push(inertia);

    Ok(ClusterModel {
        centroids,
        iterations_run: iterations,
        converged,
        inertia,
        inertia_history: history,
    })
}

fn assign_step(vectors: &[UnitVector], centroids: &[UnitVector], labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for ((v, l), d) in vectors.iter().zip(labels.iter_mut()).zip(dists.iter_mut()) {
        let (i, dist) = nearest(centroids, v);
        *l = i;
        *d = dist;
        inertia += dist;
    }
    inertia
}

fn farthest_unused(dists: &[f64], used: &[bool]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, (&d, &u)) in dists.iter().zip(used).enumerate() {
        if !u && d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// `n` directions uniform on the sphere (RA uniform, sin(dec) uniform).
pub fn uniform_sphere_sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<UnitVector> {
    (0..n)
        .map(|_| {
            let ra = rng.random::<f64>() * 360.0;
            let dec = (2.0 * rng.random::<f64>() - 1.0).asin().to_degrees();
            to_unit_vector(ra, dec).expect("finite by construction")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: &UnitVector, b: [f64; 3], tol: f64) -> bool {
        (a.x - b[0]).abs() < tol && (a.y - b[1]).abs() < tol && (a.z - b[2]).abs() < tol
    }

    #[test]
    fn unit_vector_axes() {
        assert!(close(&to_unit_vector(0.0, 0.0).unwrap(), [1.0, 0.0, 0.0], 1e-15));
        assert!(close(&to_unit_vector(90.0, 0.0).unwrap(), [0.0, 1.0, 0.0], 1e-15));
        for ra in [0.0, 17.0, 200.0, 359.9] {
            assert!(close(&to_unit_vector(ra, 90.0).unwrap(), [0.0, 0.0, 1.0], 1e-15));
        }
        // cos45*cos45 = 0.5, sin45 = 1/sqrt(2)
        assert!(close(
            &to_unit_vector(45.0, 45.0).unwrap(),
            [0.5, 0.5, std::f64::consts::FRAC_1_SQRT_2],
            1e-15
        ));
        assert!(close(&to_unit_vector(-90.0, 0.0).unwrap(), [0.0, -1.0, 0.0], 1e-15));
    }

    #[test]
    fn unit_vector_rejects_bad_input() {
        assert!(to_unit_vector(f64::NAN, 0.0).is_err());
        assert!(to_unit_vector(0.0, f64::INFINITY).is_err());
        assert!(to_unit_vector(0.0, 90.5).is_err());
    }

    #[test]
    fn geodesic_examples() {
        let v = to_unit_vector(12.0, 34.0).unwrap();
        assert_eq!(geodesic_distance(&v, &v), 0.0);
        let minus_x = UnitVector { x: -1.0, y: 0.0, z: 0.0 };
        assert!((geodesic_distance(&UnitVector::X, &minus_x) - PI).abs() < 1e-15);
        assert!((geodesic_distance(&UnitVector::X, &UnitVector::Y) - FRAC_PI_2).abs() < 1e-15);
        // Tiny separations resolve where acos(dot) would return 0.
        let a = to_unit_vector(0.0, 0.0).unwrap();
        let b = to_unit_vector(1e-7, 0.0).unwrap();
        let expect = 1e-7f64.to_radians();
        assert!((geodesic_distance(&a, &b) - expect).abs() < 1e-20);
    }

    #[test]
    fn kmeans_pp_forced_selection() {
        let v = vec![UnitVector::X, UnitVector::Y];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut idx = kmeans_pp_indices(&v, 2, &mut rng).unwrap();
        idx.sort();
        assert_eq!(idx, vec![0, 1]);
        assert!(matches!(kmeans_pp_indices(&v, 1, &mut rng), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn kmeans_pp_is_deterministic() {
        let pts: Vec<UnitVector> = (0..8)
            .map(|i| to_unit_vector(i as f64 * 45.0, if i % 2 == 0 { 30.0 } else { -30.0 }).unwrap())
            .collect();
        let a = kmeans_pp_indices(&pts, 3, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = kmeans_pp_indices(&pts, 3, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        let mut s = a.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn identical_vectors_are_infeasible() {
        let v = vec![UnitVector::Z; 5];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            spherical_kmeans(&v, KMeansParams::new(2), &mut rng),
            Err(Error::InfeasibleInit { k: 2, distinct: 1 })
        ));
        assert!(matches!(
            spherical_kmeans(&v[..1], KMeansParams::new(2), &mut rng),
            Err(Error::InfeasibleInit { .. })
        ));
    }

    #[test]
    fn antipodal_bundles_split() {
        let mut pts = Vec::new();
        for (ra, dec) in [(0.0, 0.0), (2.0, 1.0), (-1.5, 2.0), (1.0, -2.0)] {
            pts.push(to_unit_vector(ra, dec).unwrap());
            pts.push(to_unit_vector(ra + 180.0, -dec).unwrap());
        }
        let model = spherical_kmeans(&pts, KMeansParams::new(2), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(model.converged);
        let labels = model.assign_all(&pts);
        for pair in labels.chunks(2) {
            assert_ne!(pair[0], pair[1]);
        }
        assert!(labels.iter().step_by(2).all(|&l| l == labels[0]));

        // Centroid = renormalised bundle mean.
        let bundle: Vec<&UnitVector> = pts.iter().step_by(2).collect();
        let s = bundle.iter().fold([0.0; 3], |a, v| [a[0] + v.x, a[1] + v.y, a[2] + v.z]);
        let mean = UnitVector::normalize(s[0], s[1], s[2]).unwrap();
        assert!(model.centroids[labels[0]].chord2(&mean) < 1e-20);
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        // Everything sits near +x, so a centroid at -x starts empty and must
        // be moved to the point farthest from its current centroid.
        let pts: Vec<UnitVector> = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (20.0, 0.0)]
            .iter()
            .map(|&(a, d)| to_unit_vector(a, d).unwrap())
            .collect();
        let minus_x = UnitVector { x: -1.0, y: 0.0, z: 0.0 };
        let model = lloyd(&pts, vec![UnitVector::X, minus_x], KMeansParams::new(2)).unwrap();
        assert!(model.converged);
        let labels = model.assign_all(&pts);
        assert_eq!(labels, vec![0, 0, 0, 1]);
        assert_eq!(model.centroids[1], pts[3]);
        for c in &model.centroids {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn label_tie_breaks_to_lowest_index() {
        let model = ClusterModel::from_centroids(vec![UnitVector::X, UnitVector::Y, UnitVector::Z]).unwrap();
        let mid = UnitVector::normalize(1.0, 1.0, 0.0).unwrap();
        assert_eq!(model.assign_label(&mid), 0);
        assert_eq!(model.assign_label(&UnitVector::Z), 2);
        let eq = UnitVector::normalize(1.0, 1.0, 1.0).unwrap();
        assert_eq!(model.nearest_two(&eq), (0, 1));
    }

    #[test]
    fn nearest_two_examples() {
        let model = ClusterModel::from_centroids(vec![UnitVector::X, UnitVector::Y, UnitVector::Z]).unwrap();
        let v = UnitVector::normalize(0.9, 0.1, 0.0).unwrap();
        // |v-ex|^2 = 2-2*0.9/n, |v-ey|^2 = 2-2*0.1/n, |v-ez|^2 = 2
        assert_eq!(model.nearest_two(&v), (0, 1));
        let (first, second) = model.nearest_two(&UnitVector::Z);
        assert_eq!(first, 2);
        assert_eq!(second, 0);

        let four = ClusterModel::from_centroids(vec![
            to_unit_vector(0.0, 0.0).unwrap(),
            to_unit_vector(90.0, 0.0).unwrap(),
            to_unit_vector(120.0, 0.0).unwrap(),
            to_unit_vector(0.0, 80.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(four.nearest_two(&four.centroids[2]), (2, 1));
    }

    #[test]
    fn wrap_around_labels_agree() {
        let v1 = to_unit_vector(359.9, 0.0).unwrap();
        let v2 = to_unit_vector(0.1, 0.0).unwrap();
        let chord = 2.0 * (0.1f64).to_radians().sin();
        assert!((v1.chord2(&v2).sqrt() - chord).abs() < 1e-12);
        let model = ClusterModel::from_centroids(vec![
            to_unit_vector(10.0, 5.0).unwrap(),
            to_unit_vector(120.0, 0.0).unwrap(),
            to_unit_vector(240.0, 0.0).unwrap(),
        ])
        .unwrap();
        assert_eq!(model.assign_label(&v1), model.assign_label(&v2));
    }

    #[test]
    fn model_text_round_trip() {
        let pts = uniform_sphere_sample(500, &mut ChaCha8Rng::seed_from_u64(9));
        let model = spherical_kmeans(&pts, KMeansParams::new(6), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let back = ClusterModel::from_text(&model.to_text(), "mem").unwrap();
        assert_eq!(back.centroids, model.centroids);
        assert_eq!(back.iterations_run, model.iterations_run);
        assert_eq!(back.inertia, model.inertia);
        assert!(ClusterModel::from_text("k=2\n1 0 0\n", "mem").is_err());
        assert!(ClusterModel::from_text("k=2\n1 0 0\n0 2 0\n", "mem").is_err());
    }

    #[test]
    fn inertia_history_is_monotone() {
        for seed in 0..10 {
            let pts = uniform_sphere_sample(400, &mut ChaCha8Rng::seed_from_u64(seed));
            let model = spherical_kmeans(&pts, KMeansParams::new(12), &mut ChaCha8Rng::seed_from_u64(seed + 100)).unwrap();
            for w in model.inertia_history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "inertia rose: {:?}", w);
            }
        }
    }

    proptest! {
        #[test]
        fn chord_geodesic_consistency(a in 0.0..360.0f64, d in -90.0..=90.0f64, b in 0.0..360.0f64, e in -90.0..=90.0f64) {
            let u = to_unit_vector(a, d).unwrap();
            let v = to_unit_vector(b, e).unwrap();
            let g = geodesic_distance(&u, &v);
            prop_assert!((0.0..=PI).contains(&g));
            prop_assert!((u.chord2(&v) - (2.0 - 2.0 * g.cos())).abs() < 1e-9);
        }

        #[test]
        fn radec_round_trip(a in 0.0..360.0f64, d in -89.9..=89.9f64) {
            let (ra, dec) = to_unit_vector(a, d).unwrap().to_radec();
            prop_assert!((ra - a).abs() < 1e-9 || (ra - a).abs() > 359.0);
            prop_assert!((dec - d).abs() < 1e-9);
        }
    }
}
