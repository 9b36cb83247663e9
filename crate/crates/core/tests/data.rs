use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;

use proptest::prelude::*;
use qgnn::graph::{
    apply_truth_cuts, build_event_graphs, load_subgraph_dir, phi_sector_of, sector_low, split_sectors, toy_subgraph,
    z_sector_of, Normalization, SelectionCuts, SubGraph, N_SECTORS, PHI_SECTOR_WIDTH,
};
use qgnn::hitdata::{
    generate_event, generate_events, hits_file_name, load_event, load_event_dir, particles_file_name, wrap_phi,
    write_event_to_dir, GeneratorConfig, Hit, PtRange, DEFAULT_LAYER_RADII,
};
use qgnn::QgnnError;

fn noise_free(n_tracks: usize) -> GeneratorConfig {
    GeneratorConfig {
        n_tracks,
        pt_range: PtRange { min: 1.0, max: 5.0 },
        noise_fraction: 0.0,
        ..Default::default()
    }
}

#[test]
fn csv_round_trip_preserves_events() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GeneratorConfig {
        noise_fraction: 0.2,
        n_tracks: 12,
        ..Default::default()
    };
    let events = generate_events(&cfg, 3, 9).unwrap();
    for e in &events {
        write_event_to_dir(e, dir.path()).unwrap();
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 6);
    let loaded = load_event_dir(dir.path()).unwrap();
    assert_eq!(loaded.len(), 3);
    for (a, b) in events.iter().zip(&loaded) {
        assert_eq!(a.event_id, b.event_id);
        assert_eq!(a.particles, b.particles);
        assert_eq!(a.hits.len(), b.hits.len());
        for (h, g) in a.hits.iter().zip(&b.hits) {
            assert_eq!((h.hit_id, h.layer, h.particle_id), (g.hit_id, g.layer, g.particle_id));
            for (u, v) in [(h.x, g.x), (h.y, g.y), (h.z, g.z), (h.r, g.r), (h.phi, g.phi)] {
                assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0), "{u} vs {v}");
            }
        }
    }
}

#[test]
fn hundred_event_batch_file_names() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = noise_free(1);
    for e in generate_events(&cfg, 100, 1).unwrap() {
        write_event_to_dir(&e, dir.path()).unwrap();
    }
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 200);
    assert!(dir.path().join(hits_file_name(99)).exists());
    assert!(dir.path().join(particles_file_name(0)).exists());
}

#[test]
fn loader_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let hits = dir.path().join("h.csv");
    let parts = dir.path().join("p.csv");
    fs::write(&parts, "particle_id,pt,eta,vz,charge\n7,2.0,0.1,0.0,1\n").unwrap();

    fs::write(&hits, "hit_id,x,y,z,layer,particle_id\n").unwrap();
    assert!(load_event(&hits, &parts).unwrap().hits.is_empty());

    fs::write(
        &hits,
        "hit_id,x,y,z,layer,particle_id\n1,3,4,0,0,7\n2,30,40,1,1,7\n3,60,80,2,2,7\n",
    )
    .unwrap();
    let e = load_event(&hits, &parts).unwrap();
    assert_eq!((e.hits.len(), e.particles.len()), (3, 1));
    assert_eq!(e.hits[0].r, 5.0);
    assert!((e.hits[0].phi - 0.9273).abs() < 1e-4);

    let cases = [
        ("hit_id,x,y,z,layer\n1,3,4,0,0\n", 1),
        ("hit_id,x,y,z,layer,particle_id\n1,3,4,0,0,7\n2,abc,4,0,1,7\n", 3),
        ("hit_id,x,y,z,layer,particle_id\n1,3,4,0,0,99\n", 2),
    ];
    for (text, line) in cases {
        fs::write(&hits, text).unwrap();
        match load_event(&hits, &parts) {
            Err(QgnnError::Parse { file, line: l, .. }) => {
                assert_eq!(file, hits);
                assert_eq!(l, line, "{text}");
            }
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn generated_hits_sit_on_their_layers() {
    let cfg = GeneratorConfig {
        n_tracks: 50,
        noise_fraction: 0.1,
        ..Default::default()
    };
    let e = generate_event(&cfg, 0, 3).unwrap();
    e.validate().unwrap();
    for h in &e.hits {
        let r0 = DEFAULT_LAYER_RADII[h.layer];
        assert!(
            (h.r - r0).abs() <= 3.0 * cfg.geometry.smear_sigma,
            "layer {} r {}",
            h.layer,
            h.r
        );
        assert!(h.z.abs() <= cfg.geometry.half_length + 1.0);
    }
}

#[test]
fn helix_segments_pass_the_slope_cut() {
    let cuts = SelectionCuts::default();
    let (mut pass, mut total) = (0usize, 0usize);
    for e in generate_events(&noise_free(40), 20, 17).unwrap() {
        let mut by_particle: HashMap<u64, Vec<&Hit>> = HashMap::new();
        for h in &e.hits {
            by_particle.entry(h.particle_id).or_default().push(h);
        }
        for hits in by_particle.values_mut() {
            hits.sort_by(|a, b| a.r.total_cmp(&b.r));
            for w in hits.windows(2) {
                if w[1].layer != w[0].layer + 1 {
                    continue;
                }
                total += 1;
                let slope = wrap_phi(w[1].phi - w[0].phi) / (w[1].r - w[0].r);
                pass += usize::from(slope.abs() <= cuts.phi_slope_max);
            }
        }
    }
    let frac = pass as f64 / total as f64;
    assert!(total > 1000 && frac >= 0.95, "{pass}/{total}");
}

#[test]
fn sectors_partition_the_event() {
    let cfg = GeneratorConfig {
        n_tracks: 120,
        noise_fraction: 0.0,
        ..Default::default()
    };
    let e = generate_event(&cfg, 4, 4).unwrap();
    let sectors = split_sectors(&e);
    assert_eq!(sectors.len(), N_SECTORS);
    assert_eq!(sectors.iter().map(|s| s.hits.len()).sum::<usize>(), e.hits.len());
    for s in &sectors {
        for (h, off) in s.hits.iter().zip(&s.phi_in_sector) {
            assert_eq!(phi_sector_of(h.phi).0, s.provenance.phi_sector);
            assert_eq!(z_sector_of(h.z), s.provenance.z_sector);
            assert!((0.0..PHI_SECTOR_WIDTH).contains(off));
        }
    }
}

#[test]
fn uniform_phi_occupancy_is_balanced() {
    // hits of one track share φ, so the independent draws are tracks and
    // noise hits; both should fill the 8 φ bins within a factor 1.5
    let cfg = GeneratorConfig {
        n_tracks: 1000,
        noise_fraction: 0.2,
        ..Default::default()
    };
    let e = generate_event(&cfg, 0, 21).unwrap();
    let noise: Vec<&Hit> = e.hits.iter().filter(|h| h.is_noise()).collect();
    assert!(noise.len() >= 1000);
    for hits in [e.hits.iter().collect::<Vec<_>>(), noise] {
        let mut counts = [0usize; 8];
        for h in hits {
            counts[phi_sector_of(h.phi).0] += 1;
        }
        let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
        assert!(*hi as f64 / *lo as f64 <= 1.5, "{counts:?}");
    }
}

#[test]
fn truth_edge_efficiency_on_clean_events() {
    let mut total = qgnn::graph::EdgeStats::default();
    for e in generate_events(&noise_free(5), 20, 2).unwrap() {
        let (graphs, stats) = build_event_graphs(&e, &SelectionCuts::default(), &Normalization::default()).unwrap();
        assert_eq!(graphs.len(), N_SECTORS);
        total.merge(&stats);
    }
    assert!(total.efficiency() >= 0.95, "{total:?}");
    assert!(total.purity() > 0.0 && total.purity() <= 1.0);
}

#[test]
fn low_pt_and_noise_hits_are_cut() {
    let cfg = GeneratorConfig {
        n_tracks: 30,
        pt_range: PtRange { min: 0.5, max: 2.0 },
        noise_fraction: 0.3,
        ..Default::default()
    };
    let e = generate_event(&cfg, 0, 5).unwrap();
    let kept = apply_truth_cuts(&e, &SelectionCuts::default());
    let pt: HashMap<u64, f64> = e.particles.iter().map(|p| (p.particle_id, p.pt)).collect();
    assert!(kept.hits.len() < e.hits.len());
    assert!(kept
        .hits
        .iter()
        .all(|h| h.particle_id != 0 && pt[&h.particle_id] >= 1.0));
}

#[test]
fn subgraph_files_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let e = generate_event(&noise_free(20), 6, 6).unwrap();
    let (graphs, _) = build_event_graphs(&e, &SelectionCuts::default(), &Normalization::default()).unwrap();
    for g in &graphs {
        g.write(dir.path()).unwrap();
    }
    let mut loaded = load_subgraph_dir(dir.path()).unwrap();
    loaded.sort_by_key(|g| g.provenance());
    let mut original = graphs.clone();
    original.sort_by_key(|g| g.provenance());
    assert_eq!(loaded, original);
    let toy = toy_subgraph(1, 12, 3).unwrap();
    let path = toy.write(dir.path()).unwrap();
    assert_eq!(SubGraph::read(&path).unwrap(), toy);
}

proptest! {
    #[test]
    fn phi_binning_is_a_partition(phi in -PI..=PI) {
        let (bin, off) = phi_sector_of(phi);
        prop_assert!(bin < 8);
        prop_assert!((0.0..PHI_SECTOR_WIDTH + 1e-12).contains(&off));
        let back = wrap_phi(sector_low(bin) + off);
        prop_assert!((back - phi).abs() < 1e-9 || ((back - phi).abs() - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn normalized_features_invert(r in 0.0f64..1100.0, off in 0.0f64..PHI_SECTOR_WIDTH, z in -1100.0f64..1100.0, sector in 0usize..8) {
        let norm = Normalization::default();
        let f = norm.features(r, off, z);
        prop_assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
        let [r2, phi2, z2] = norm.cylindrical(f, sector);
        prop_assert!((r2 - r).abs() < 1e-9 && (z2 - z).abs() < 1e-9);
        prop_assert!((wrap_phi(phi2 - sector_low(sector) - off)).abs() < 1e-9);
    }

    #[test]
    fn built_graphs_satisfy_invariants(seed in 0u64..1000) {
        let cfg = GeneratorConfig { n_tracks: 15, noise_fraction: 0.2, ..Default::default() };
        let e = generate_event(&cfg, seed, seed).unwrap();
        let (graphs, stats) = build_event_graphs(&e, &SelectionCuts::default(), &Normalization::default()).unwrap();
        prop_assert_eq!(graphs.iter().map(|g| g.n_edges()).sum::<usize>(), stats.edges);
        for g in graphs {
            // the checked constructor enforces the rest; re-run it
            let again = SubGraph::new(g.node_features().to_vec(), g.edges().to_vec(), g.labels().to_vec(), g.provenance());
            prop_assert!(again.is_ok());
        }
    }
}
