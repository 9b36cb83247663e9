//! Hit-graph construction: truth-level selection, φ×z sectoring, candidate
//! segment building between adjacent layers, and truth labelling.

use std::collections::{HashMap, HashSet};
use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{QgnnError, Result};
use crate::hitdata::{wrap_phi, Event, Hit};
use crate::par;

pub const N_PHI_SECTORS: usize = 8;
pub const N_Z_SECTORS: usize = 2;
pub const N_SECTORS: usize = N_PHI_SECTORS * N_Z_SECTORS;
pub const PHI_SECTOR_WIDTH: f64 = FRAC_PI_4;

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionCuts {
    /// GeV
    pub pt_min: f64,
    /// Maximum |Δφ/Δr| in rad/mm.
    pub phi_slope_max: f64,
    /// mm
    pub z0_max: f64,
    pub eta_min: f64,
    pub eta_max: f64,
}

impl Default for SelectionCuts {
    fn default() -> Self {
        Self {
            pt_min: 1.0,
            phi_slope_max: 0.0006,
            z0_max: 100.0,
            eta_min: -5.0,
            eta_max: 5.0,
        }
    }
}

impl SelectionCuts {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.pt_min, self.phi_slope_max, self.z0_max];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(QgnnError::Config(format!("selection cuts must be positive: {self:?}")));
        }
        if !(self.eta_min < self.eta_max) {
            return Err(QgnnError::Config(format!(
                "eta range [{}, {}] is not ordered",
                self.eta_min, self.eta_max
            )));
        }
        Ok(())
    }
}

/// Fixed detector-envelope scales mapping (r, φ, z) into `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub r_scale: f64,
    pub z_offset: f64,
    pub z_scale: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self {
            r_scale: 1100.0,
            z_offset: 1100.0,
            z_scale: 2200.0,
        }
    }
}

impl Normalization {
    pub fn features(&self, r: f64, phi_in_sector: f64, z: f64) -> [f64; 3] {
        [
            (r / self.r_scale).clamp(0.0, 1.0),
            (phi_in_sector / PHI_SECTOR_WIDTH).clamp(0.0, 1.0),
            ((z + self.z_offset) / self.z_scale).clamp(0.0, 1.0),
        ]
    }

    /// Inverse map back to (r mm, φ rad, z mm) for a node of sector `phi_sector`.
    pub fn cylindrical(&self, features: [f64; 3], phi_sector: usize) -> [f64; 3] {
        [
            features[0] * self.r_scale,
            wrap_phi(sector_low(phi_sector) + features[1] * PHI_SECTOR_WIDTH),
            features[2] * self.z_scale - self.z_offset,
        ]
    }
}

/// Lower φ edge of `phi_sector`.
pub fn sector_low(phi_sector: usize) -> f64 {
    -PI + phi_sector as f64 * PHI_SECTOR_WIDTH
}

/// Sector index and in-sector φ offset. Bins are half-open `[low, low + π/4)`,
/// so a hit exactly on an edge goes to the upper bin; φ = π wraps to bin 0.
pub fn phi_sector_of(phi: f64) -> (usize, f64) {
    let shifted = (phi + PI).rem_euclid(TAU);
    let bin = ((shifted / PHI_SECTOR_WIDTH).floor() as usize).min(N_PHI_SECTORS - 1);
    (bin, shifted - bin as f64 * PHI_SECTOR_WIDTH)
}

pub fn z_sector_of(z: f64) -> usize {
    usize::from(z >= 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Provenance {
    pub event_id: u64,
    pub phi_sector: usize,
    pub z_sector: usize,
}

impl Provenance {
    /// Stable identifier used in file names and metrics.
    pub fn id(&self) -> String {
        format!("event{:09}_p{}_z{}", self.event_id, self.phi_sector, self.z_sector)
    }
}

/// Hits of one φ×z sector.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorEvent {
    pub provenance: Provenance,
    pub hits: Vec<Hit>,
    /// In-sector φ offset for each hit, aligned with `hits`.
    pub phi_in_sector: Vec<f64>,
}

/// Drops noise hits and hits of particles failing the pt / η selection.
pub fn apply_truth_cuts(event: &Event, cuts: &SelectionCuts) -> Event {
    let particles = event.particle_map();
    let passes = |h: &Hit| {
        particles
            .get(&h.particle_id)
            .is_some_and(|p| p.pt >= cuts.pt_min && p.eta >= cuts.eta_min && p.eta <= cuts.eta_max)
    };
    let hits: Vec<Hit> = event.hits.iter().filter(|h| passes(h)).cloned().collect();
    let used: HashSet<u64> = hits.iter().map(|h| h.particle_id).collect();
    Event {
        event_id: event.event_id,
        particles: event
            .particles
            .iter()
            .filter(|p| used.contains(&p.particle_id))
            .cloned()
            .collect(),
        hits,
    }
}

/// Partitions an event into its 16 sectors, ordered by (phi_sector, z_sector).
pub fn split_sectors(event: &Event) -> Vec<SectorEvent> {
    let mut sectors: Vec<SectorEvent> = (0..N_SECTORS)
        .map(|s| SectorEvent {
            provenance: Provenance {
                event_id: event.event_id,
                phi_sector: s / N_Z_SECTORS,
                z_sector: s % N_Z_SECTORS,
            },
            hits: Vec::new(),
            phi_in_sector: Vec::new(),
        })
        .collect();
    for hit in &event.hits {
        let (p, offset) = phi_sector_of(hit.phi);
        let sector = &mut sectors[p * N_Z_SECTORS + z_sector_of(hit.z)];
        sector.hits.push(hit.clone());
        sector.phi_in_sector.push(offset);
    }
    sectors
}

/// φ-slope and z-intercept of the segment from `a` to `b`, or `None` if Δr = 0.
pub fn segment_geometry(a: &Hit, b: &Hit) -> Option<(f64, f64)> {
    let dr = b.r - a.r;
    if dr == 0.0 {
        return None;
    }
    let dphi = wrap_phi(b.phi - a.phi);
    let slope = dphi / dr;
    let z0 = a.z - a.r * (b.z - a.z) / dr;
    Some((slope, z0))
}

/// Candidate graph before truth labels are attached.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateGraph {
    pub provenance: Provenance,
    pub node_features: Vec<[f64; 3]>,
    /// Index into the sector's hits for every node.
    pub node_hits: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    /// Adjacent-layer pairs skipped for Δr = 0.
    pub zero_dr_skipped: usize,
}

/// Builds all adjacent-layer segments passing the φ-slope and z0 cuts.
///
/// Nodes are ordered by (layer, hit_id); the inner endpoint of each edge is
/// the smaller-r hit.
pub fn build_edges(sector: &SectorEvent, cuts: &SelectionCuts, norm: &Normalization) -> CandidateGraph {
    let mut order: Vec<usize> = (0..sector.hits.len()).collect();
    order.sort_by_key(|&i| (sector.hits[i].layer, sector.hits[i].hit_id));
    let node_features = order
        .iter()
        .map(|&i| {
            let h = &sector.hits[i];
            norm.features(h.r, sector.phi_in_sector[i], h.z)
        })
        .collect();

    let mut by_layer: HashMap<usize, Vec<usize>> = HashMap::new();
    for (node, &i) in order.iter().enumerate() {
        by_layer.entry(sector.hits[i].layer).or_default().push(node);
    }

    let mut edges = Vec::new();
    let mut zero_dr_skipped = 0;
    for (node_a, &ia) in order.iter().enumerate() {
        let a = &sector.hits[ia];
        let Some(upper) = by_layer.get(&(a.layer + 1)) else {
            continue;
        };
        for &node_b in upper {
            let b = &sector.hits[order[node_b]];
            let (inner, outer, hi, ho) = if a.r <= b.r {
                (node_a, node_b, a, b)
            } else {
                (node_b, node_a, b, a)
            };
            match segment_geometry(hi, ho) {
                None => zero_dr_skipped += 1,
                Some((slope, z0)) => {
                    if slope.abs() < cuts.phi_slope_max && z0.abs() < cuts.z0_max {
                        edges.push((inner, outer));
                    }
                }
            }
        }
    }

    CandidateGraph {
        provenance: sector.provenance,
        node_features,
        node_hits: order,
        edges,
        zero_dr_skipped,
    }
}

/// Consecutive (inner, outer) hit-index pairs of every particle, ordered by r.
pub fn truth_segments(sector: &SectorEvent) -> HashSet<(usize, usize)> {
    let mut tracks: HashMap<u64, Vec<usize>> = HashMap::new();
    for (i, h) in sector.hits.iter().enumerate() {
        if !h.is_noise() {
            tracks.entry(h.particle_id).or_default().push(i);
        }
    }
    let mut segments = HashSet::new();
    for mut hits in tracks.into_values() {
        hits.sort_by(|&a, &b| sector.hits[a].r.total_cmp(&sector.hits[b].r));
        segments.extend(hits.windows(2).map(|w| (w[0], w[1])));
    }
    segments
}

/// Attaches labels: 1 iff both endpoints are consecutive hits of the same particle.
pub fn label_edges(candidates: CandidateGraph, sector: &SectorEvent) -> Result<SubGraph> {
    let truth = truth_segments(sector);
    let labels = candidates
        .edges
        .iter()
        .map(|&(i, o)| {
            let pair = (candidates.node_hits[i], candidates.node_hits[o]);
            u8::from(truth.contains(&pair))
        })
        .collect();
    SubGraph::new(
        candidates.node_features,
        candidates.edges,
        labels,
        candidates.provenance,
    )
}

/// Segment-finding tallies for efficiency / purity reporting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeStats {
    pub truth_segments: usize,
    pub true_edges: usize,
    pub edges: usize,
    pub zero_dr_skipped: usize,
}

impl EdgeStats {
    pub fn efficiency(&self) -> f64 {
        ratio(self.true_edges, self.truth_segments)
    }

    pub fn purity(&self) -> f64 {
        ratio(self.true_edges, self.edges)
    }

    pub fn merge(&mut self, other: &EdgeStats) {
        self.truth_segments += other.truth_segments;
        self.true_edges += other.true_edges;
        self.edges += other.edges;
        self.zero_dr_skipped += other.zero_dr_skipped;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        f64::NAN
    } else {
        num as f64 / den as f64
    }
}

/// Full preprocessing of one event: cuts, sectoring, edges and labels.
/// Sectors are processed in parallel; output order is (phi_sector, z_sector).
pub fn build_event_graphs(
    event: &Event,
    cuts: &SelectionCuts,
    norm: &Normalization,
) -> Result<(Vec<SubGraph>, EdgeStats)> {
    cuts.validate()?;
    let selected = apply_truth_cuts(event, cuts);
    let sectors = split_sectors(&selected);
    let results = par::map_slice(&sectors, |sector| {
        let candidates = build_edges(sector, cuts, norm);
        let stats = EdgeStats {
            truth_segments: truth_segments(sector).len(),
            true_edges: 0,
            edges: candidates.edges.len(),
            zero_dr_skipped: candidates.zero_dr_skipped,
        };
        label_edges(candidates, sector).map(|g| {
            let true_edges = g.n_true();
            (g, EdgeStats { true_edges, ..stats })
        })
    });
    let mut graphs = Vec::with_capacity(N_SECTORS);
    let mut total = EdgeStats::default();
    for r in results {
        let (g, s) = r?;
        total.merge(&s);
        graphs.push(g);
    }
    Ok((graphs, total))
}

// ---------------------------------------------------------------------------
// SubGraph

#[derive(Clone, Debug, PartialEq)]
pub struct SubGraph {
    node_features: Vec<[f64; 3]>,
    edges: Vec<(usize, usize)>,
    labels: Vec<u8>,
    provenance: Provenance,
}

impl SubGraph {
    /// Checked constructor enforcing the graph invariants.
    pub fn new(
        node_features: Vec<[f64; 3]>,
        edges: Vec<(usize, usize)>,
        labels: Vec<u8>,
        provenance: Provenance,
    ) -> Result<Self> {
        if labels.len() != edges.len() {
            return Err(QgnnError::Dimension {
                expected: edges.len(),
                got: labels.len(),
            });
        }
        if let Some((n, f)) = node_features
            .iter()
            .enumerate()
            .find(|(_, f)| f.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(QgnnError::Domain(format!("node {n} feature {f:?} outside [0, 1]")));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(QgnnError::Domain(format!("edge label {l} is not 0/1")));
        }
        let n = node_features.len();
        let mut seen = HashSet::with_capacity(edges.len());
        for &(i, o) in &edges {
            if i >= n || o >= n {
                return Err(QgnnError::Index {
                    index: i.max(o),
                    len: n,
                });
            }
            if !(node_features[i][0] < node_features[o][0]) {
                return Err(QgnnError::Domain(format!(
                    "edge ({i}, {o}) does not point outward in r"
                )));
            }
            if !seen.insert((i, o)) {
                return Err(QgnnError::Domain(format!("duplicate edge ({i}, {o})")));
            }
        }
        Ok(Self {
            node_features,
            edges,
            labels,
            provenance,
        })
    }

    pub fn node_features(&self) -> &[[f64; 3]] {
        &self.node_features
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn n_nodes(&self) -> usize {
        self.node_features.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_true(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn file_name(&self) -> String {
        format!("{}.graph", self.provenance.id())
    }

    /// Text serialization; floats use shortest round-trip formatting so the
    /// file reproduces every bit.
    pub fn to_text(&self) -> String {
        let p = self.provenance;
        let mut out = String::new();
        let _ = writeln!(out, "qgnn-subgraph 1");
        let _ = writeln!(
            out,
            "nodes {} edges {} event {} phi_sector {} z_sector {}",
            self.n_nodes(),
            self.n_edges(),
            p.event_id,
            p.phi_sector,
            p.z_sector
        );
        for [r, phi, z] in &self.node_features {
            let _ = writeln!(out, "{r} {phi} {z}");
        }
        for (&(i, o), l) in self.edges.iter().zip(&self.labels) {
            let _ = writeln!(out, "{i} {o} {l}");
        }
        out
    }

    pub fn from_text(text: &str, source: &Path) -> Result<Self> {
        let err = |line: usize, msg: &str| QgnnError::parse(source, line, msg.to_string());
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, "qgnn-subgraph 1")) => {}
            _ => return Err(err(1, "expected header `qgnn-subgraph 1`")),
        }
        let (ln, header) = lines.next().ok_or_else(|| err(2, "missing size line"))?;
        let tokens: Vec<&str> = header.split_whitespace().collect();
        let keys = ["nodes", "edges", "event", "phi_sector", "z_sector"];
        if tokens.len() != 10 || tokens.iter().step_by(2).zip(keys).any(|(t, k)| *t != k) {
            return Err(err(ln, "malformed size line"));
        }
        let num = |i: usize| -> Result<u64> { tokens[i].parse().map_err(|_| err(ln, "non-numeric size field")) };
        let (n_nodes, n_edges) = (num(1)? as usize, num(3)? as usize);
        let provenance = Provenance {
            event_id: num(5)?,
            phi_sector: num(7)? as usize,
            z_sector: num(9)? as usize,
        };
        if provenance.phi_sector >= N_PHI_SECTORS || provenance.z_sector >= N_Z_SECTORS {
            return Err(err(ln, "sector index out of range"));
        }

        let mut node_features = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (ln, row) = lines.next().ok_or_else(|| err(0, "truncated node block"))?;
            let vals: Vec<f64> = row
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(ln, "non-numeric node feature"))?;
            let arr: [f64; 3] = vals.try_into().map_err(|_| err(ln, "expected 3 node features"))?;
            node_features.push(arr);
        }
        let mut edges = Vec::with_capacity(n_edges);
        let mut labels = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let (ln, row) = lines.next().ok_or_else(|| err(0, "truncated edge block"))?;
            let vals: Vec<usize> = row
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(ln, "non-numeric edge field"))?;
            let [i, o, l]: [usize; 3] = vals.try_into().map_err(|_| err(ln, "expected `in out label`"))?;
            edges.push((i, o));
            labels.push(u8::try_from(l).map_err(|_| err(ln, "label out of range"))?);
        }
        if let Some((ln, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(err(ln, &format!("trailing content {extra:?}")));
        }
        Self::new(node_features, edges, labels, provenance)
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.file_name());
        std::fs::write(&path, self.to_text()).map_err(|e| QgnnError::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| QgnnError::io(path, e))?;
        Self::from_text(&text, path)
    }
}

/// Loads every `*.graph` file in `dir`, sorted by file name.
pub fn load_subgraph_dir(dir: &Path) -> Result<Vec<SubGraph>> {
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| QgnnError::io(dir, e))? {
        let path = entry.map_err(|e| QgnnError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "graph") {
            paths.push(path);
        }
    }
    paths.sort();
    paths.iter().map(|p| SubGraph::read(p)).collect()
}

/// Small random layered graph with both edge classes present, for gradient
/// checks and benchmarks. Nodes sit on `n_layers` radial bands; edges join
/// neighbouring bands.
pub fn toy_subgraph(seed: u64, n_nodes: usize, n_layers: usize) -> Result<SubGraph> {
    use rand::{Rng, SeedableRng};
    if n_layers < 2 || n_nodes < n_layers {
        return Err(QgnnError::Config(format!(
            "toy graph needs ≥ 2 layers and ≥ 1 node per layer, got {n_nodes} nodes on {n_layers} layers"
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let band = 0.9 / n_layers as f64;
    let layer_of = |i: usize| i % n_layers;
    let nodes: Vec<[f64; 3]> = (0..n_nodes)
        .map(|i| {
            let r = 0.05 + band * layer_of(i) as f64 + rng.random_range(0.0..0.5 * band);
            [r, rng.random::<f64>(), rng.random::<f64>()]
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..n_nodes {
        for o in 0..n_nodes {
            if layer_of(o) == layer_of(i) + 1 && (o == i + 1 || rng.random::<f64>() < 0.4) {
                edges.push((i, o));
            }
        }
    }
    let mut labels: Vec<u8> = edges.iter().map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
    labels[0] = 1;
    if let Some(l) = labels.get_mut(1) {
        *l = 0;
    }
    SubGraph::new(
        nodes,
        edges,
        labels,
        Provenance {
            event_id: seed,
            phi_sector: 0,
            z_sector: 0,
        },
    )
}
