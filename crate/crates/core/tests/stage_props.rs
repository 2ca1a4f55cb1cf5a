use parcelfit::facefit::{build_farm_partition, PartitionOptions};
use parcelfit::fixture::{generate, FixtureConfig};
use parcelfit::geom::{centroid_aligned_hausdorff, difference, Point};
use parcelfit::jitterfit::{jitterfit_map, JitterOptions, SimilarityTransform};
use parcelfit::metrics::{excess_area_map, FarmIndex};
use parcelfit::model::{FarmPlot, FarmSet, Stage};
use parcelfit::splinefit::{splinefit, SplineOptions, WarpField};
use proptest::prelude::*;

fn small_map_options() -> JitterOptions {
    JitterOptions { max_translation_m: 60.0, ..JitterOptions::map_defaults() }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn jitterfit_reports_what_it_returns_and_is_equivariant(
        seed in 0..1000u64,
        tx in -30.0..30.0f64,
        ty in -30.0..30.0f64,
        theta in -0.05..0.05f64,
        vx in -5e3..5e3f64,
        vy in -5e3..5e3f64,
    ) {
        let fx = generate(&FixtureConfig {
            n_plots: 16,
            noise_m: 0.5,
            transform: SimilarityTransform::new(tx, ty, theta, 1.0),
            seed,
            ..Default::default()
        })
        .unwrap();
        let opts = small_map_options();
        let idx = FarmIndex::new(&fx.farms);
        let (fit, m1) = jitterfit_map(&fx.survey, &idx, &opts).unwrap();
        let ea = excess_area_map(&m1, &idx).unwrap().total;
        prop_assert!((fit.objective_after - ea).abs() <= 1e-6 * ea.max(1.0));
        prop_assert!(fit.objective_after <= fit.objective_before);
        let (again, _) = jitterfit_map(&fx.survey, &idx, &opts).unwrap();
        prop_assert_eq!(again.transform, fit.transform);

        // both maps moved by v: the pivot moves too, so the recovered parameters stay put
        let shift = |p: Point| Point::new(p.x + vx, p.y + vy);
        let m = fx.survey.with_shapes(fx.survey.plots.iter().map(|p| p.shape.map_points(shift)).collect(), Stage::M0);
        let farms = FarmSet::new(fx.farms.plots.iter().map(|p| FarmPlot::new(p.id.clone(), p.shape.map_points(shift))).collect(), fx.farms.crs).unwrap();
        let (moved, _) = jitterfit_map(&m, &FarmIndex::new(&farms), &opts).unwrap();
        let (a, b) = (fit.transform, moved.transform);
        prop_assert!(Point::new(a.tx - b.tx, a.ty - b.ty).norm() <= 0.5, "{a:?} vs {b:?}");
        prop_assert!((a.theta - b.theta).abs().to_degrees() <= 0.2 && (a.s - b.s).abs() <= 0.005, "{a:?} vs {b:?}");
    }

    #[test]
    fn splinefit_keeps_its_guards(seed in 0..1000u64, amp in 2.0..8.0f64) {
        let fx = generate(&FixtureConfig { n_plots: 25, noise_m: 0.5, warp_amplitude_m: amp, seed, ..Default::default() }).unwrap();
        let opts = SplineOptions::default();
        let r = splinefit(&fx.survey, &FarmIndex::new(&fx.farms), &opts).unwrap();
        prop_assert!(!r.anchors.ids.is_empty());
        for id in &r.anchors.ids {
            let k = fx.survey.plots.iter().position(|p| &p.id == id).unwrap();
            prop_assert!(r.refits[k].objective_after <= opts.anchor_dtb_max);
        }
        if r.outcome.factor == 1.0 {
            prop_assert!(r.anchor_residual_m <= 1e-3, "anchor residual {}", r.anchor_residual_m);
        }
        prop_assert!(r.warp.max_displacement_on_grid(&fx.survey.bbox(), 10.0) <= opts.epsilon_m + 1e-6);
        for (a, b) in fx.survey.plots.iter().zip(&r.m2.plots) {
            let da = (b.shape.area() - a.shape.area()).abs() / a.shape.area();
            prop_assert!(da <= opts.area_tol_frac, "{}: area {da}", a.id);
            let h = centroid_aligned_hausdorff(&a.shape, &b.shape);
            prop_assert!(h <= opts.shape_bound_coeff * a.shape.area().sqrt(), "{}: shape {h}", a.id);
        }
    }

    #[test]
    fn partition_tiles_the_box_and_holds_each_farm(seed in 0..1000u64, inset in 0.0..6.0f64) {
        let fx = generate(&FixtureConfig { n_plots: 9, margin_rings: 1, farm_inset_m: inset, seed, ..Default::default() }).unwrap();
        let bbox = fx.farms.bbox().expand(20.0);
        let part = build_farm_partition(&fx.farms, &bbox, &PartitionOptions::default()).unwrap();
        let total: f64 = part.cells.iter().map(|(_, c)| c.area()).sum();
        let box_area = bbox.width() * bbox.height();
        prop_assert!((total - box_area).abs() <= 1e-3 * box_area, "{total} vs {box_area}");
        for (farm, (id, cell)) in fx.farms.plots.iter().zip(&part.cells) {
            prop_assert_eq!(&farm.id, id);
            let outside = difference(&farm.shape, cell).unwrap().area();
            prop_assert!(outside <= 1e-3 * farm.shape.area(), "{id}: {outside} m² outside its cell");
        }
    }
}

/// Interpolation is exact without regularization; the default regularization
/// keeps control points well inside the anchor tolerance.
#[test]
fn warp_reproduces_control_displacements() {
    let pts: Vec<Point> = (0..30).map(|k| Point::new((k % 6) as f64 * 97.0 + (k * k % 7) as f64, (k / 6) as f64 * 103.0)).collect();
    let disp: Vec<Point> = pts.iter().map(|p| Point::new((p.y * 0.01).sin() * 4.0, (p.x * 0.013).cos() * 3.0)).collect();
    let worst = |lambda: f64| {
        let w = WarpField::fit(&pts, &disp, 15.0, lambda).unwrap();
        pts.iter().zip(&disp).map(|(p, d)| w.displacement(*p, 1.0).sub(*d).norm()).fold(0.0, f64::max)
    };
    assert!(worst(0.0) <= 1e-6);
    assert!(worst(SplineOptions::default().tps_lambda) <= 1e-4);
}
