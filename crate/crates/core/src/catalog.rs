//! Star catalog ingest.
//!
//! The only accepted format is a four-column CSV, `id,ra_deg,dec_deg,vmag`,
//! with `#` comment lines and an optional header line. Archive formats
//! (Hipparcos, Gaia) must be converted to this schema beforehand.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "id,ra_deg,dec_deg,vmag";

/// One catalog star. Coordinates are ICRS degrees; smaller `vmag` is brighter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StarRecord {
    pub id: u64,
    pub ra_deg: f64,
    pub dec_deg: f64,
    pub vmag: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub stars: Vec<StarRecord>,
    pub source_name: String,
}

impl Catalog {
    pub fn len(&self) -> usize {
        self.stars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stars.is_empty()
    }

    /// Stars with `vmag <= vmag_max`, in catalog order. The result may be empty.
    pub fn filter_by_magnitude(&self, vmag_max: f64) -> Catalog {
        Catalog {
            stars: self
                .stars
                .iter()
                .filter(|s| s.vmag <= vmag_max)
                .copied()
                .collect(),
            source_name: self.source_name.clone(),
        }
    }

    /// Serialises to the ingest CSV format. `parse_catalog` reproduces the
    /// records exactly because floats are written in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.stars.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for s in &self.stars {
            let _ = writeln!(out, "{},{},{},{}", s.id, s.ra_deg, s.dec_deg, s.vmag);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Free-function form of [`Catalog::filter_by_magnitude`].
pub fn filter_by_magnitude(catalog: &Catalog, vmag_max: f64) -> Catalog {
    catalog.filter_by_magnitude(vmag_max)
}

/// Reads a catalog CSV from disk.
pub fn load_catalog(path: &std::path::Path) -> Result<Catalog> {
    let file = std::fs::File::open(path)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    parse_catalog(std::io::BufReader::new(file), &name)
}

pub fn parse_catalog_str(text: &str, source_name: &str) -> Result<Catalog> {
    parse_catalog(text.as_bytes(), source_name)
}

pub fn parse_catalog<R: BufRead>(reader: R, source_name: &str) -> Result<Catalog> {
    let mut stars = Vec::new();
    let mut seen = HashSet::new();
    let mut header_allowed = true;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if header_allowed {
            header_allowed = false;
            let normalized: String = trimmed.chars().filter(|c| !c.is_whitespace()).collect();
            if normalized.eq_ignore_ascii_case(CSV_HEADER) {
                continue;
            }
        }

        let star = parse_record(trimmed, line_no)?;
        if !seen.insert(star.id) {
            return Err(Error::DuplicateId {
                line: line_no,
                id: star.id,
            });
        }
        stars.push(star);
    }

    if stars.is_empty() {
        return Err(Error::EmptyCatalog);
    }
    Ok(Catalog {
        stars,
        source_name: source_name.to_string(),
    })
}

fn parse_record(line: &str, line_no: usize) -> Result<StarRecord> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected 4 fields, found {}", fields.len()),
        });
    }
    let parse_err = |name: &str, raw: &str| Error::Parse {
        line: line_no,
        message: format!("field {name} is not numeric: {raw:?}"),
    };

    let id: u64 = fields[0].parse().map_err(|_| parse_err("id", fields[0]))?;
    let ra_deg: f64 = fields[1].parse().map_err(|_| parse_err("ra_deg", fields[1]))?;
    let dec_deg: f64 = fields[2].parse().map_err(|_| parse_err("dec_deg", fields[2]))?;
    let vmag: f64 = fields[3].parse().map_err(|_| parse_err("vmag", fields[3]))?;

    let range_err = |message: String| Error::Range {
        line: line_no,
        message,
    };
    if id == 0 {
        return Err(range_err("id must be a positive integer".into()));
    }
    if !ra_deg.is_finite() || !(0.0..=360.0).contains(&ra_deg) {
        return Err(range_err(format!("ra_deg {ra_deg} outside [0, 360)")));
    }
    if !dec_deg.is_finite() || !(-90.0..=90.0).contains(&dec_deg) {
        return Err(range_err(format!("dec_deg {dec_deg} outside [-90, 90]")));
    }
    if !vmag.is_finite() {
        return Err(range_err(format!("vmag {vmag} is not finite")));
    }

    Ok(StarRecord {
        id,
        ra_deg: if ra_deg == 360.0 { 0.0 } else { ra_deg },
        dec_deg,
        vmag,
    })
}

/// Parameters for a seeded stand-in sky, used when no real catalog is at hand.
///
/// Star counts grow by a factor `10^0.5` per magnitude (close to the observed
/// bright-star counts), and `disk_fraction` of the stars are concentrated
/// toward the galactic plane so that star density varies across the sky.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSky {
    pub count: usize,
    pub mag_bright: f64,
    pub mag_faint: f64,
    pub disk_fraction: f64,
    /// Scale height of the disk population in `sin(b)`.
    pub disk_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticSky {
    fn default() -> Self {
        Self {
            count: 3000,
            mag_bright: -1.5,
            mag_faint: 6.5,
            disk_fraction: 0.4,
            disk_scale: 0.15,
            seed: 1,
        }
    }
}

// J2000 galactic -> equatorial rotation (rows: equatorial x, y, z).
const GAL_TO_EQ: [[f64; 3]; 3] = [
    [-0.054_875_539_390, 0.494_109_453_633, -0.867_666_135_683],
    [-0.873_437_104_725, -0.444_829_594_298, -0.198_076_389_613],
    [-0.483_834_991_775, 0.746_982_248_696, 0.455_983_794_523],
];

pub fn synthetic_catalog(sky: &SyntheticSky) -> Result<Catalog> {
    if sky.count == 0 {
        return Err(Error::InvalidArgument("synthetic catalog needs count >= 1".into()));
    }
    if !(sky.mag_faint > sky.mag_bright) {
        return Err(Error::InvalidArgument("mag_faint must exceed mag_bright".into()));
    }
    if !(0.0..=1.0).contains(&sky.disk_fraction) || !(sky.disk_scale > 0.0) {
        return Err(Error::InvalidArgument("disk_fraction in [0,1] and disk_scale > 0 required".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(sky.seed);
    let lo = 10f64.powf(0.5 * sky.mag_bright);
    let hi = 10f64.powf(0.5 * sky.mag_faint);
    let mut stars = Vec::with_capacity(sky.count);

    for i in 0..sky.count {
        let l = rng.random::<f64>() * std::f64::consts::TAU;
        let sin_b = if rng.random::<f64>() < sky.disk_fraction {
            // Laplace profile in sin(b), folded back into [-1, 1].
            let u: f64 = rng.random::<f64>() - 0.5;
            let s = -sky.disk_scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
            s.clamp(-1.0, 1.0)
        } else {
            2.0 * rng.random::<f64>() - 1.0
        };
        let cos_b = (1.0 - sin_b * sin_b).max(0.0).sqrt();
        let g = [cos_b * l.cos(), cos_b * l.sin(), sin_b];
        let eq: Vec<f64> = GAL_TO_EQ
            .iter()
            .map(|row| row[0] * g[0] + row[1] * g[1] + row[2] * g[2])
            .collect();

        let mut ra = eq[1].atan2(eq[0]).to_degrees().rem_euclid(360.0);
        ra = (ra * 1e6).round() / 1e6;
        if ra >= 360.0 {
            ra = 0.0;
        }
        let dec = (eq[2].clamp(-1.0, 1.0).asin().to_degrees() * 1e6).round() / 1e6;

        let u: f64 = rng.random();
        let vmag = ((lo + u * (hi - lo)).log10() / 0.5 * 100.0).round() / 100.0;

        stars.push(StarRecord {
            id: i as u64 + 1,
            ra_deg: ra,
            dec_deg: dec,
            vmag,
        });
    }

    Ok(Catalog {
        stars,
        source_name: format!("synthetic(seed={})", sky.seed),
    })
}
