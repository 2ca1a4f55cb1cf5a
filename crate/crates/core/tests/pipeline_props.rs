use chrono::{TimeZone, Utc};
use parcelfit::geom::{Point, Polygon};
use parcelfit::model::ProjectionSpec;
use parcelfit::pipeline::dagger::interior_angles_deg;
use parcelfit::pipeline::{dagger_removal, dedup, iou, olc, shard, shard_by_cells, write_shards, DaggerOptions, Detection};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

#[test]
fn olc_reference_vectors() {
    let text = include_str!("data/olc_encoding.csv");
    let mut n = 0;
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let (lat, lng, len): (f64, f64, usize) = (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap());
        assert_eq!(olc::encode(lat, lng, len), f[3], "{line}");
        n += 1;
    }
    assert!(n >= 3);
}

/// A convex-ish polygon where one or two vertices are replaced by narrow outward spikes.
fn spiky_polygon(rng: &mut ChaCha8Rng) -> Vec<Point> {
    let k = rng.gen_range(6..=8);
    let spikes: BTreeSet<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(0..k)).collect();
    let mut out = Vec::new();
    for i in 0..k {
        let th = (i as f64 + rng.gen_range(-0.2..0.2)) * std::f64::consts::TAU / k as f64;
        let r = rng.gen_range(9.0..11.0);
        let at = |a: f64, r: f64| Point::new(r * a.cos(), r * a.sin());
        if spikes.contains(&i) {
            let d = rng.gen_range(1.5..2.5f64).to_radians();
            out.push(at(th - d, r));
            out.push(at(th, rng.gen_range(11.5..13.0) + r - 10.0));
            out.push(at(th + d, r));
        } else {
            out.push(at(th, r));
        }
    }
    out
}

/// Smallest area change over every vertex-deletion subset that leaves a valid
/// polygon with no angle under the spike threshold, within the area tolerance.
fn despiked_oracle(ring: &[Point], opts: &DaggerOptions) -> Option<f64> {
    let a0 = Polygon::from_exterior(ring.to_vec()).unwrap().area();
    let n = ring.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        if (n as u32 - mask.count_ones()) < 3 {
            continue;
        }
        let kept: Vec<Point> = (0..n).filter(|i| mask & (1 << i) == 0).map(|i| ring[i]).collect();
        let Ok(p) = Polygon::from_exterior(kept) else { continue };
        if interior_angles_deg(p.exterior()).iter().any(|&a| a < opts.spike_angle_max_deg) {
            continue;
        }
        let d = (p.area() - a0).abs();
        if d <= opts.area_tol_frac * a0 && best.is_none_or(|b| d < (b - a0).abs()) {
            best = Some(p.area());
        }
    }
    best
}

#[test]
fn dagger_removal_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let opts = DaggerOptions { simplify_tol_m: 0.0, ..DaggerOptions::default() };
    let mut checked = 0;
    for _ in 0..60 {
        let ring = spiky_polygon(&mut rng);
        let Ok(p) = Polygon::from_exterior(ring.clone()) else { continue };
        let Some(oracle) = despiked_oracle(p.exterior(), &opts) else { continue };
        let out = dagger_removal(&p, &opts);
        assert!((out.shape.area() - oracle).abs() <= 0.01 * oracle, "{} vs {oracle}", out.shape.area());
        assert!(interior_angles_deg(out.shape.exterior()).iter().all(|&a| a >= opts.spike_angle_max_deg));
        assert!(out.area_change_frac <= opts.area_tol_frac);
        assert!(out.shape.exterior().len() <= p.exterior().len());
        checked += 1;
    }
    assert!(checked >= 40, "only {checked} cases had an oracle");
}

fn det(i: usize, class: &str, p: Polygon, day: u32) -> Detection {
    Detection {
        feature_id: format!("d{i:05}"),
        class: class.into(),
        shape: p,
        observed_at: Utc.with_ymd_and_hms(2024, 1, day, 0, 0, 0).unwrap(),
        source_image_id: String::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn dedup_leaves_no_duplicate_pair(
        boxes in prop::collection::vec((0.0..60.0f64, 0.0..60.0f64, 5.0..20.0f64, 0..2usize, 1..28u32), 1..40),
        thresh in 0.2..0.9f64,
    ) {
        let dets: Vec<Detection> = boxes
            .iter()
            .enumerate()
            .map(|(i, &(x, y, s, c, d))| det(i, ["field", "pond"][c], Polygon::rect(x, y, x + s, y + s).unwrap(), d))
            .collect();
        let out = dedup(&dets, thresh).unwrap();
        for (i, a) in out.iter().enumerate() {
            for b in &out[i + 1..] {
                if a.class == b.class {
                    prop_assert!(iou(&a.shape, &b.shape).unwrap() < thresh);
                }
            }
        }
        // dagger removal never adds vertices or moves area past the tolerance
        for d in &dets {
            let o = dagger_removal(&d.shape, &DaggerOptions::default());
            prop_assert!(o.shape.exterior().len() <= d.shape.exterior().len());
            prop_assert!(o.area_change_frac <= 0.01);
        }
    }
}

#[test]
fn sharding_partitions_ten_thousand_detections() {
    let crs = ProjectionSpec::new(18.52, 73.85).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dets: Vec<Detection> = (0..10_000)
        .map(|i| {
            let (x, y) = (rng.gen_range(-15_000.0..15_000.0), rng.gen_range(-15_000.0..15_000.0));
            let s = rng.gen_range(20.0..80.0);
            det(i, "field", Polygon::rect(x, y, x + s, y + s).unwrap(), 1)
        })
        .collect();
    let shards = shard_by_cells(&dets, &crs, shard::DEFAULT_LEVEL).unwrap();
    let mut seen = BTreeSet::new();
    for s in &shards {
        for d in &s.features {
            assert!(seen.insert(d.feature_id.clone()), "{} in two shards", d.feature_id);
            let (lng, lat) = crs.unproject(d.shape.centroid());
            assert_eq!(shard::cell_token(lat, lng, shard::DEFAULT_LEVEL).unwrap().to_string(), s.cell_token);
        }
    }
    assert_eq!(seen.len(), dets.len());
    let dir = tempfile::tempdir().unwrap();
    let paths = write_shards(&shards, &crs, dir.path()).unwrap();
    assert_eq!(paths.len(), shards.len());
    for p in paths {
        let len = std::fs::metadata(&p).unwrap().len();
        assert!(len < 2_000_000, "{p:?} is {len} bytes");
    }
}
