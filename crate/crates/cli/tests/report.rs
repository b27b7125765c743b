use proptest::prelude::*;
use studio_cli::report::{read_csv, render_table, write_csv, ReportRow};

fn text() -> impl Strategy<Value = String> {
    // commas, quotes, newlines and non-ASCII all need quoting or escaping
    "[a-zA-Z0-9 ,\"\n\r'é☃:/]{0,40}"
}

fn score() -> impl Strategy<Value = f64> {
    prop_oneof![0.0..=100.0f64, Just(0.0), Just(100.0), Just(1e-300), Just(57.735026918962575)]
}

prop_compose! {
    fn row()(
        scenario in text(), prompt in text(), refined_prompt in text(),
        initial_score in score(), inpainted_score in score(),
        ids in prop::collection::vec(text(), 6),
    ) -> ReportRow {
        ReportRow {
            scenario,
            prompt,
            refined_prompt,
            initial_score,
            inpainted_score,
            delta: inpainted_score - initial_score,
            generation: ids[0].clone(),
            inpaint: ids[1].clone(),
            segmenter: ids[2].clone(),
            refiner: ids[3].clone(),
            embedder: ids[4].clone(),
            config_hash: ids[5].clone(),
        }
    }
}

proptest! {
    #[test]
    fn csv_round_trips_every_field(rows in prop::collection::vec(row(), 0..8)) {
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            prop_assert_eq!(a, b);
            prop_assert_eq!(a.delta.to_bits(), b.delta.to_bits());
        }
        prop_assert!(render_table(&rows).lines().count() > rows.len());
    }
}
