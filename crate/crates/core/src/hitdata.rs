//! Detector hits, truth particles, CSV I/O and a synthetic helical-track
//! event generator for a cylindrical barrel detector.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::fs::File;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{QgnnError, Result};

pub const N_LAYERS: usize = 10;

/// Barrel layer radii in mm, innermost first.
pub const DEFAULT_LAYER_RADII: [f64; N_LAYERS] = [32.0, 72.0, 116.0, 172.0, 260.0, 360.0, 500.0, 660.0, 820.0, 1020.0];

#[derive(Clone, Debug, PartialEq)]
pub struct Hit {
    pub hit_id: u64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub layer: usize,
    /// 0 marks a noise hit.
    pub particle_id: u64,
    pub r: f64,
    pub phi: f64,
}

impl Hit {
    pub fn new(hit_id: u64, x: f64, y: f64, z: f64, layer: usize, particle_id: u64) -> Self {
        Self {
            hit_id,
            x,
            y,
            z,
            layer,
            particle_id,
            r: x.hypot(y),
            phi: wrap_phi(y.atan2(x)),
        }
    }

    pub fn is_noise(&self) -> bool {
        self.particle_id == 0
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phi(phi: f64) -> f64 {
    let mut p = phi % (2.0 * PI);
    if p <= -PI {
        p += 2.0 * PI;
    } else if p > PI {
        p -= 2.0 * PI;
    }
    p
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParticleTruth {
    pub particle_id: u64,
    /// GeV
    pub pt: f64,
    pub eta: f64,
    /// mm
    pub vz: f64,
    pub charge: i8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub event_id: u64,
    pub hits: Vec<Hit>,
    pub particles: Vec<ParticleTruth>,
}

impl Event {
    pub fn particle_map(&self) -> HashMap<u64, &ParticleTruth> {
        self.particles.iter().map(|p| (p.particle_id, p)).collect()
    }

    /// Checks that every non-noise hit refers to a known particle and that
    /// particle ids are unique and nonzero.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for p in &self.particles {
            if p.particle_id == 0 || !ids.insert(p.particle_id) {
                return Err(QgnnError::Domain(format!(
                    "event {}: invalid or duplicate particle id {}",
                    self.event_id, p.particle_id
                )));
            }
        }
        for h in &self.hits {
            if h.layer >= N_LAYERS {
                return Err(QgnnError::Domain(format!("hit {} on layer {}", h.hit_id, h.layer)));
            }
            if h.particle_id != 0 && !ids.contains(&h.particle_id) {
                return Err(QgnnError::Domain(format!(
                    "hit {} refers to unknown particle {}",
                    h.hit_id, h.particle_id
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// CSV I/O

const HIT_COLUMNS: [&str; 6] = ["hit_id", "x", "y", "z", "layer", "particle_id"];
const PARTICLE_COLUMNS: [&str; 5] = ["particle_id", "pt", "eta", "vz", "charge"];

pub fn hits_file_name(event_id: u64) -> String {
    format!("event{event_id:09}-hits.csv")
}

pub fn particles_file_name(event_id: u64) -> String {
    format!("event{event_id:09}-particles.csv")
}

/// Parses the numeric id out of an `eventNNNNNNNNN-*.csv` file name.
pub fn event_id_from_path(path: &Path) -> Option<u64> {
    let name = path.file_name()?.to_str()?;
    let rest = name.strip_prefix("event")?;
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

struct CsvTable {
    path: PathBuf,
    columns: Vec<usize>,
    reader: csv::Reader<File>,
}

impl CsvTable {
    fn open(path: &Path, wanted: &[&str]) -> Result<Self> {
        let file = File::open(path).map_err(|e| QgnnError::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| QgnnError::parse(path, 1, e.to_string()))?
            .clone();
        let columns = wanted
            .iter()
            .map(|name| {
                headers
                    .iter()
                    .position(|h| h == *name)
                    .ok_or_else(|| QgnnError::parse(path, 1, format!("missing column {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            reader,
        })
    }

    /// Visits each data row with its 1-based file line number.
    fn for_each_row(&mut self, mut f: impl FnMut(usize, Vec<&str>) -> Result<()>) -> Result<()> {
        let mut record = csv::StringRecord::new();
        let mut line = 1;
        loop {
            let more = self
                .reader
                .read_record(&mut record)
                .map_err(|e| QgnnError::parse(&self.path, line + 1, e.to_string()))?;
            if !more {
                return Ok(());
            }
            line = record.position().map_or(line + 1, |p| p.line() as usize);
            let cells = self.columns.iter().map(|&c| record.get(c).unwrap_or("")).collect();
            f(line, cells)?;
        }
    }
}

fn cell<T: std::str::FromStr>(path: &Path, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| QgnnError::parse(path, line, format!("column {name}: cannot parse {raw:?}")))
}

/// Reads a hits/particles CSV pair.
pub fn load_event(hits_path: &Path, particles_path: &Path) -> Result<Event> {
    let mut particles = Vec::new();
    let mut known = HashSet::new();
    let mut table = CsvTable::open(particles_path, &PARTICLE_COLUMNS)?;
    table.for_each_row(|line, c| {
        let p = particles_path;
        let particle = ParticleTruth {
            particle_id: cell(p, line, "particle_id", c[0])?,
            pt: cell(p, line, "pt", c[1])?,
            eta: cell(p, line, "eta", c[2])?,
            vz: cell(p, line, "vz", c[3])?,
            charge: cell(p, line, "charge", c[4])?,
        };
        if particle.particle_id == 0 || !known.insert(particle.particle_id) {
            return Err(QgnnError::parse(
                p,
                line,
                format!("invalid or duplicate particle_id {}", particle.particle_id),
            ));
        }
        if !(particle.pt > 0.0) || !(particle.charge == 1 || particle.charge == -1) {
            return Err(QgnnError::parse(p, line, "pt must be positive and charge ±1"));
        }
        particles.push(particle);
        Ok(())
    })?;

    let mut hits = Vec::new();
    let mut table = CsvTable::open(hits_path, &HIT_COLUMNS)?;
    table.for_each_row(|line, c| {
        let p = hits_path;
        let layer: usize = cell(p, line, "layer", c[4])?;
        if layer >= N_LAYERS {
            return Err(QgnnError::parse(
                p,
                line,
                format!("layer {layer} outside 0..{N_LAYERS}"),
            ));
        }
        let particle_id: u64 = cell(p, line, "particle_id", c[5])?;
        if particle_id != 0 && !known.contains(&particle_id) {
            return Err(QgnnError::parse(p, line, format!("unknown particle_id {particle_id}")));
        }
        hits.push(Hit::new(
            cell(p, line, "hit_id", c[0])?,
            cell(p, line, "x", c[1])?,
            cell(p, line, "y", c[2])?,
            cell(p, line, "z", c[3])?,
            layer,
            particle_id,
        ));
        Ok(())
    })?;

    Ok(Event {
        event_id: event_id_from_path(hits_path).unwrap_or(0),
        hits,
        particles,
    })
}

/// Writes the hits/particles CSV pair. Floats use shortest round-trip formatting.
pub fn write_event(event: &Event, hits_path: &Path, particles_path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(hits_path).map_err(|e| csv_io(hits_path, e))?;
    w.write_record(HIT_COLUMNS).map_err(|e| csv_io(hits_path, e))?;
    for h in &event.hits {
        w.write_record([
            h.hit_id.to_string(),
            h.x.to_string(),
            h.y.to_string(),
            h.z.to_string(),
            h.layer.to_string(),
            h.particle_id.to_string(),
        ])
        .map_err(|e| csv_io(hits_path, e))?;
    }
    w.flush().map_err(|e| QgnnError::io(hits_path, e))?;

    let mut w = csv::Writer::from_path(particles_path).map_err(|e| csv_io(particles_path, e))?;
    w.write_record(PARTICLE_COLUMNS)
        .map_err(|e| csv_io(particles_path, e))?;
    for p in &event.particles {
        w.write_record([
            p.particle_id.to_string(),
            p.pt.to_string(),
            p.eta.to_string(),
            p.vz.to_string(),
            p.charge.to_string(),
        ])
        .map_err(|e| csv_io(particles_path, e))?;
    }
    w.flush().map_err(|e| QgnnError::io(particles_path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> QgnnError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => QgnnError::io(path, io),
        other => QgnnError::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Writes an event into `dir` under its id-stamped file names.
pub fn write_event_to_dir(event: &Event, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let hits = dir.join(hits_file_name(event.event_id));
    let particles = dir.join(particles_file_name(event.event_id));
    write_event(event, &hits, &particles)?;
    Ok((hits, particles))
}

/// Loads every `event*-hits.csv` (with its particles file) in `dir`, ordered by event id.
pub fn load_event_dir(dir: &Path) -> Result<Vec<Event>> {
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| QgnnError::io(dir, e))? {
        let path = entry.map_err(|e| QgnnError::io(dir, e))?.path();
        let is_hits = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with("-hits.csv"));
        if let (true, Some(id)) = (is_hits, event_id_from_path(&path)) {
            ids.push(id);
        }
    }
    ids.sort_unstable();
    ids.into_iter()
        .map(|id| load_event(&dir.join(hits_file_name(id)), &dir.join(particles_file_name(id))))
        .collect()
}

// ---------------------------------------------------------------------------
// Synthetic generator

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorGeometry {
    /// mm, innermost first
    pub layer_radii: [f64; N_LAYERS],
    /// Barrel extends over |z| ≤ half_length (mm).
    pub half_length: f64,
    /// Tesla
    pub b_field: f64,
    /// Gaussian position resolution (mm) along rφ and z.
    pub smear_sigma: f64,
}

impl Default for DetectorGeometry {
    fn default() -> Self {
        Self {
            layer_radii: DEFAULT_LAYER_RADII,
            half_length: 1100.0,
            b_field: 2.0,
            smear_sigma: 0.1,
        }
    }
}

impl DetectorGeometry {
    /// Transverse radius of curvature in mm for `pt` in GeV.
    pub fn curvature_radius(&self, pt: f64) -> f64 {
        1000.0 * pt / (0.3 * self.b_field)
    }

    /// Unsmeared intersection of a helix from `(0, 0, vz)` with the cylinder of radius `r`,
    /// or `None` when the track curls up before reaching it.
    pub fn helix_point(&self, track: &TrackParams, r: f64) -> Option<(f64, f64, f64)> {
        let radius = self.curvature_radius(track.pt);
        let ratio = r / (2.0 * radius);
        if ratio > 1.0 {
            return None;
        }
        // half the turning angle; the chord to the crossing points along φ0 − q·half
        let half_turn = ratio.asin();
        let arc = 2.0 * radius * half_turn;
        let phi = track.phi0 - f64::from(track.charge) * half_turn;
        Some((r * phi.cos(), r * phi.sin(), track.vz + arc * track.eta.sinh()))
    }
}

/// Kinematics of one generated track.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackParams {
    pub pt: f64,
    pub phi0: f64,
    pub eta: f64,
    pub vz: f64,
    pub charge: i8,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PtRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub n_tracks: usize,
    pub pt_range: PtRange,
    pub noise_fraction: f64,
    pub eta_max: f64,
    pub vz_sigma: f64,
    pub geometry: DetectorGeometry,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_tracks: 5,
            pt_range: PtRange { min: 1.0, max: 5.0 },
            noise_fraction: 0.0,
            eta_max: 1.2,
            vz_sigma: 30.0,
            geometry: DetectorGeometry::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let PtRange { min, max } = self.pt_range;
        if !(min.is_finite() && max.is_finite()) || min > max {
            return Err(QgnnError::Config(format!("empty pt range [{min}, {max}]")));
        }
        if min < 0.1 {
            return Err(QgnnError::Config(format!("pt range minimum {min} GeV below 0.1")));
        }
        if self.n_tracks == 0 {
            return Err(QgnnError::Config("at least one track per event is required".into()));
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(QgnnError::Config(format!(
                "noise fraction {} outside [0, 1)",
                self.noise_fraction
            )));
        }
        Ok(())
    }
}

/// Appends the smeared layer crossings of one track to `hits`.
fn trace_track<R: Rng>(
    geometry: &DetectorGeometry,
    track: &TrackParams,
    particle_id: u64,
    rng: &mut R,
    hits: &mut Vec<Hit>,
) {
    let smear = Normal::new(0.0, geometry.smear_sigma).expect("finite sigma");
    for (layer, &r) in geometry.layer_radii.iter().enumerate() {
        let Some((x, y, z)) = geometry.helix_point(track, r) else {
            break;
        };
        if z.abs() > geometry.half_length {
            continue;
        }
        // sensors measure on the cylinder surface: smear along rφ and z only
        let phi = y.atan2(x) + smear.sample(rng) / r;
        let z = z + smear.sample(rng);
        let id = hits.len() as u64 + 1;
        hits.push(Hit::new(id, r * phi.cos(), r * phi.sin(), z, layer, particle_id));
    }
}

/// Hits of a single fully specified track, smeared with `seed`.
pub fn generate_track_hits(geometry: &DetectorGeometry, track: &TrackParams, seed: u64) -> Vec<Hit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = Vec::new();
    trace_track(geometry, track, 1, &mut rng, &mut hits);
    hits
}

/// Generates one synthetic event; deterministic given `seed`.
pub fn generate_event(config: &GeneratorConfig, event_id: u64, seed: u64) -> Result<Event> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geometry = &config.geometry;
    let vz_dist = Normal::new(0.0, config.vz_sigma).map_err(|e| QgnnError::Config(format!("vertex spread: {e}")))?;

    let mut hits = Vec::new();
    let mut particles = Vec::with_capacity(config.n_tracks);
    for i in 0..config.n_tracks {
        let PtRange { min, max } = config.pt_range;
        let track = TrackParams {
            pt: if min < max { rng.random_range(min..max) } else { min },
            phi0: rng.random_range(-PI..PI),
            eta: rng.random_range(-config.eta_max..=config.eta_max),
            vz: vz_dist.sample(&mut rng),
            charge: if rng.random::<bool>() { 1 } else { -1 },
        };
        let particle_id = i as u64 + 1;
        trace_track(geometry, &track, particle_id, &mut rng, &mut hits);
        particles.push(ParticleTruth {
            particle_id,
            pt: track.pt,
            eta: track.eta,
            vz: track.vz,
            charge: track.charge,
        });
    }

    let n_noise = (config.noise_fraction * hits.len() as f64).ceil() as usize;
    for _ in 0..n_noise {
        let layer = rng.random_range(0..N_LAYERS);
        let r = geometry.layer_radii[layer];
        let phi = rng.random_range(-PI..PI);
        let z = rng.random_range(-geometry.half_length..=geometry.half_length);
        let id = hits.len() as u64 + 1;
        hits.push(Hit::new(id, r * phi.cos(), r * phi.sin(), z, layer, 0));
    }

    Ok(Event {
        event_id,
        hits,
        particles,
    })
}

/// Per-event seed derived from a run seed (SplitMix64 finalizer).
pub fn event_seed(run_seed: u64, index: u64) -> u64 {
    let mut z = run_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Events `0..n_events`, each seeded with [`event_seed`]. Generated in parallel.
pub fn generate_events(config: &GeneratorConfig, n_events: usize, seed: u64) -> Result<Vec<Event>> {
    config.validate()?;
    crate::par::try_map_range(n_events, |i| {
        generate_event(config, i as u64, event_seed(seed, i as u64))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_coordinates() {
        let h = Hit::new(1, 3.0, 4.0, 0.0, 0, 0);
        assert_eq!(h.r, 5.0);
        assert!((h.phi - 0.927_295_218_001_612_2).abs() < 1e-12);
        assert_eq!(Hit::new(1, -1.0, -0.0, 0.0, 0, 0).phi, PI);
        assert_eq!(wrap_phi(-PI), PI);
        assert!((wrap_phi(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn straight_track_hits_every_layer() {
        let geometry = DetectorGeometry::default();
        let track = TrackParams {
            pt: 100.0,
            phi0: 0.4,
            eta: 0.0,
            vz: 0.0,
            charge: 1,
        };
        let hits = generate_track_hits(&geometry, &track, 9);
        assert_eq!(hits.len(), N_LAYERS);
        for (layer, h) in hits.iter().enumerate() {
            assert_eq!(h.layer, layer);
            assert_eq!(h.particle_id, 1);
            assert!(h.z.abs() < 1.0, "z = {}", h.z);
            assert!((h.r - geometry.layer_radii[layer]).abs() < 1e-9);
            // sagitta of a 100 GeV track at 1 m is ~0.15 mm
            assert!((h.phi - 0.4).abs() < 0.01);
        }
    }

    #[test]
    fn low_pt_track_curls_before_outer_layers() {
        let geometry = DetectorGeometry::default();
        // R = 1000·0.2/0.6 ≈ 333 mm reaches only r ≤ 667 mm
        let track = TrackParams {
            pt: 0.2,
            phi0: 0.0,
            eta: 0.0,
            vz: 0.0,
            charge: -1,
        };
        let hits = generate_track_hits(&geometry, &track, 1);
        assert_eq!(hits.len(), 8);
    }

    #[test]
    fn generator_contracts() {
        let cfg = GeneratorConfig {
            n_tracks: 20,
            noise_fraction: 0.0,
            ..Default::default()
        };
        let e = generate_event(&cfg, 3, 42).unwrap();
        assert!(e.hits.iter().all(|h| !h.is_noise()));
        assert_eq!(e, generate_event(&cfg, 3, 42).unwrap());
        e.validate().unwrap();

        let noisy = GeneratorConfig {
            noise_fraction: 0.25,
            ..cfg.clone()
        };
        let e = generate_event(&noisy, 3, 42).unwrap();
        let n_track = e.hits.iter().filter(|h| !h.is_noise()).count();
        let n_noise = e.hits.len() - n_track;
        assert_eq!(n_noise, (0.25 * n_track as f64).ceil() as usize);

        let bad = GeneratorConfig {
            pt_range: PtRange { min: 3.0, max: 2.0 },
            ..cfg.clone()
        };
        assert!(matches!(generate_event(&bad, 0, 0), Err(QgnnError::Config(_))));
        let bad = GeneratorConfig {
            noise_fraction: 1.0,
            ..cfg.clone()
        };
        assert!(generate_event(&bad, 0, 0).is_err());
        let bad = GeneratorConfig {
            pt_range: PtRange { min: 0.05, max: 1.0 },
            ..cfg
        };
        assert!(generate_event(&bad, 0, 0).is_err());
    }

    #[test]
    fn events_are_independent_and_reproducible() {
        let cfg = GeneratorConfig::default();
        let a = generate_events(&cfg, 3, 7).unwrap();
        assert_eq!(a, generate_events(&cfg, 3, 7).unwrap());
        assert_eq!(a.iter().map(|e| e.event_id).collect::<Vec<_>>(), [0, 1, 2]);
        assert_ne!(a[0].hits, a[1].hits);
        assert_ne!(event_seed(7, 0), event_seed(8, 0));
    }

    #[test]
    fn event_id_parsing() {
        assert_eq!(event_id_from_path(Path::new("/a/event000000042-hits.csv")), Some(42));
        assert_eq!(event_id_from_path(Path::new("hits.csv")), None);
    }
}
