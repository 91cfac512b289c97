use proptest::prelude::*;
use vdaa_core::dataset_io::{
    generate_synthetic_dataset, parse_predictions, parse_yolo_label, write_predictions, write_yolo_label, LabelRecord,
    PredictionRecord, SyntheticConfig,
};
use vdaa_core::encounters::{generate_encounters, ConditionGrid};
use vdaa_core::geometry::relative_geometry;
use vdaa_core::metrics::{average_precision, is_nmac, match_detections, partition, Facet, ImageMatching, Interpolation};
use vdaa_core::perception::{DetectorProfile, PerceptionConfig};
use vdaa_core::simulator::{run_batch_configured, Policy, SimConfig};
use vdaa_core::units::wrap_180;
use vdaa_core::{AircraftState, BoundingBox, EncounterConfig};

fn six_decimals() -> impl Strategy<Value = f64> {
    (0u32..=1_000_000).prop_map(|k| f64::from(k) / 1e6)
}

fn label() -> impl Strategy<Value = LabelRecord> {
    (0u32..5, six_decimals(), six_decimals(), six_decimals(), six_decimals()).prop_map(
        |(class_id, center_x, center_y, width, height)| LabelRecord { class_id, center_x, center_y, width, height },
    )
}

fn aircraft() -> impl Strategy<Value = AircraftState> {
    (-5000.0..5000.0f64, -5000.0..5000.0f64, 0.0..3000.0f64, 0.0..360.0f64, 20.0..120.0f64).prop_map(
        |(e, n, u, hdg, gs)| AircraftState::level(e, n, u, hdg, gs),
    )
}

fn rotate(s: &AircraftState, deg: f64) -> AircraftState {
    let (sin, cos) = deg.to_radians().sin_cos();
    AircraftState {
        east: s.east * cos + s.north * sin,
        north: -s.east * sin + s.north * cos,
        heading: (s.heading + deg).rem_euclid(360.0),
        ..*s
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn labels_round_trip(records in prop::collection::vec(label(), 0..20)) {
        let text = write_yolo_label(&records);
        let back = parse_yolo_label(&text).unwrap();
        prop_assert_eq!(&back, &records);
        prop_assert_eq!(write_yolo_label(&back), text);
    }

    #[test]
    fn predictions_round_trip(records in prop::collection::vec((label(), six_decimals()), 0..20)) {
        let preds: Vec<PredictionRecord> =
            records.into_iter().map(|(label, confidence)| PredictionRecord { label, confidence }).collect();
        prop_assert_eq!(parse_predictions(&write_predictions(&preds)).unwrap(), preds);
    }

    #[test]
    fn relative_geometry_rotation_invariant(own in aircraft(), int in aircraft(), deg in 0.0..360.0f64) {
        let a = relative_geometry(&own, &int);
        let b = relative_geometry(&rotate(&own, deg), &rotate(&int, deg));
        prop_assert!((a.horizontal_range - b.horizontal_range).abs() < 1e-6);
        prop_assert_eq!(a.vertical_offset, b.vertical_offset);
        prop_assert!((a.horizontal_closing_speed - b.horizontal_closing_speed).abs() < 1e-6);
        if a.horizontal_range > 1.0 {
            prop_assert!(wrap_180(a.bearing - b.bearing).abs() < 1e-6);
        }
    }

    #[test]
    fn nmac_symmetric(own in aircraft(), de in -200.0..200.0f64, dn in -200.0..200.0f64, du in -50.0..50.0f64) {
        let int = AircraftState { east: own.east + de, north: own.north + dn, up: own.up + du, ..own };
        let ab = relative_geometry(&own, &int);
        let ba = relative_geometry(&int, &own);
        prop_assert_eq!(is_nmac(&ab), is_nmac(&ba));
        prop_assert_eq!(ab.vertical_offset, -ba.vertical_offset);
    }
}

fn detection_instance() -> impl Strategy<Value = Vec<(Vec<BoundingBox>, Vec<BoundingBox>)>> {
    let boxes = prop::collection::vec((0.1..0.9f64, 0.1..0.9f64, 0.05..0.3f64, 0.05..0.3f64), 1..6);
    let preds = prop::collection::vec((0.1..0.9f64, 0.1..0.9f64, 0.05..0.3f64, 0.05..0.3f64, 1u32..=16), 0..10);
    prop::collection::vec((preds, boxes), 1..4).prop_map(|images| {
        images
            .into_iter()
            .map(|(p, g)| {
                let preds = p
                    .into_iter()
                    .map(|(x, y, w, h, c)| BoundingBox::ground_truth(x, y, w, h).with_confidence(f64::from(c) / 16.0))
                    .collect();
                let gts = g.into_iter().map(|(x, y, w, h)| BoundingBox::ground_truth(x, y, w, h)).collect();
                (preds, gts)
            })
            .collect()
    })
}

fn ap_of(images: &[(Vec<BoundingBox>, Vec<BoundingBox>)], f: impl Fn(f64) -> f64) -> f64 {
    let matchings: Vec<ImageMatching> = images
        .iter()
        .map(|(p, g)| {
            let p: Vec<BoundingBox> = p.iter().map(|b| b.with_confidence(f(b.confidence))).collect();
            match_detections(&p, g, 0.5).unwrap()
        })
        .collect();
    average_precision(&matchings, Interpolation::AllPoint).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ap_invariant_under_monotone_rescaling(images in detection_instance()) {
        let base = ap_of(&images, |c| c);
        prop_assert_eq!(base, ap_of(&images, |c| c * c));
        prop_assert_eq!(base, ap_of(&images, |c| c / 2.0));
        prop_assert!((0.0..=1.0).contains(&base));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn slices_partition_records(seed in any::<u64>(), n in 1usize..300) {
        let samples = generate_synthetic_dataset(n, seed, &SyntheticConfig::default()).unwrap();
        let metas: Vec<_> = samples.into_iter().map(|s| s.metadata).collect();
        for facet in Facet::ALL {
            let parts = partition(&metas, facet).unwrap();
            prop_assert_eq!(parts.len(), facet.values().len());
            prop_assert_eq!(parts.iter().map(|(_, v)| v.len()).sum::<usize>(), n);
        }
    }

    #[test]
    fn detection_dominance_and_nmac_scan(seed in any::<u64>()) {
        let encs = generate_encounters(seed, ConditionGrid::Iid { count: 10 }, &EncounterConfig::default()).unwrap();
        let run = |perception: PerceptionConfig| {
            let cfg = SimConfig { perception, ..SimConfig::default() };
            run_batch_configured(&encs, &Policy::AlwaysCoc, &cfg, 1).unwrap().results
        };
        let stochastic = |scale| PerceptionConfig::Stochastic { profile: DetectorProfile::baseline(), scale, noise: None };
        let ladder = [
            run(PerceptionConfig::Perfect),
            run(stochastic(1.0)),
            run(stochastic(0.5)),
            run(PerceptionConfig::Blind),
        ];
        for pair in ladder.windows(2) {
            for (hi, lo) in pair[0].iter().zip(&pair[1]) {
                for (a, b) in hi.steps.iter().zip(&lo.steps) {
                    prop_assert!(a.detected || !b.detected);
                }
            }
        }
        for (enc, r) in encs.iter().zip(&ladder[0]) {
            let scan = r.steps.iter().any(|s| is_nmac(&relative_geometry(&s.ownship, &s.intruder)));
            prop_assert_eq!(r.nmac, scan);
            let min = r.steps.iter().map(|s| relative_geometry(&s.ownship, &s.intruder).horizontal_range).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(r.min_horizontal_sep, min);
            // without advisories the ownship flies its script
            for (s, scripted) in r.steps.iter().zip(&enc.ownship_script) {
                prop_assert_eq!(s.ownship.up, scripted.up);
            }
        }
    }
}
