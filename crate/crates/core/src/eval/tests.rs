use super::*;
use crate::encoder::init_params;
use crate::graphdata::{gen_structure_ood, planted_partition, Benchmark, OodUnit, PlantedPartition};

fn bench() -> Benchmark {
    let g = planted_partition(&PlantedPartition { nodes: 120, ..Default::default() }, 1).unwrap();
    gen_structure_ood(&g, 4).unwrap()
}

#[test]
fn zero_steps_equals_raw_energy() {
    let b = bench();
    let cfg = EncoderConfig::gcn(3);
    let p = init_params(&cfg, b.id_graph.num_features(), 2).unwrap();
    let k0 = EvalSettings { k: 0, ..Default::default() };
    let raw = EvalSettings { score: ScoreKind::Energy, ..Default::default() };
    let a = evaluate(&b, &p, &cfg, &k0).unwrap();
    let e = evaluate(&b, &p, &cfg, &raw).unwrap();
    assert_eq!(a.report, e.report);
}

#[test]
fn msp_column_matches_msp_score() {
    let b = bench();
    let cfg = EncoderConfig::gcn(3);
    let p = init_params(&cfg, b.id_graph.num_features(), 2).unwrap();
    let ev = evaluate(&b, &p, &cfg, &EvalSettings::default()).unwrap();
    let prop = cfg.propagation(&b.id_graph).unwrap();
    let logits = forward(&p, &cfg, &b.id_graph, &prop, NormMode::Stored).unwrap().into_logits();
    let msp = msp_score(&logits);
    for r in ev.scores[0].iter().filter(|r| !r.is_ood) {
        assert_eq!(r.msp, msp[r.node_id]);
    }
}

#[test]
fn csv_round_trip_reproduces_metrics() {
    let b = bench();
    let cfg = EncoderConfig::gcn(3);
    let p = init_params(&cfg, b.id_graph.num_features(), 5).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    for kind in [ScoreKind::Gnnsafe, ScoreKind::Energy, ScoreKind::Msp] {
        let ev = evaluate(&b, &p, &cfg, &EvalSettings { score: kind, ..Default::default() }).unwrap();
        let path = tmp.path().join("scores.csv");
        write_score_csv(&ev.scores[0], &path).unwrap();
        let rows = read_score_csv(&path).unwrap();
        assert_eq!(rows, ev.scores[0]);
        let m = unit_metrics(&rows, kind).unwrap();
        let u = &ev.report.units[0];
        assert_eq!((m.auroc, m.aupr, m.fpr95), (u.auroc, u.aupr, u.fpr95));
    }
}

#[test]
fn copy_of_id_graph_is_indistinguishable() {
    let b = bench();
    let copy = Arc::new((*b.id_graph).clone());
    let n = copy.num_nodes();
    // OOD nodes: the same test nodes, scored on an identical graph.
    let unit = OodUnit::new(copy, b.splits.test.clone()).unwrap();
    assert!(unit.mask.len() < n);
    let b2 = Benchmark::new("copy", b.id_graph.clone(), b.splits.clone(), vec![unit], None).unwrap();
    let cfg = EncoderConfig::gcn(3);
    let p = init_params(&cfg, b.id_graph.num_features(), 5).unwrap();
    let ev = evaluate(&b2, &p, &cfg, &EvalSettings::default()).unwrap();
    assert_eq!(ev.report.units[0].auroc, 0.5);
}

#[test]
fn mismatched_model_is_a_config_error() {
    let b = bench();
    let cfg = EncoderConfig::gcn(3);
    let p = init_params(&cfg, 7, 5).unwrap();
    assert!(matches!(evaluate(&b, &p, &cfg, &EvalSettings::default()), Err(Error::Config(_))));
}

#[test]
fn malformed_csv_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("s.csv");
    std::fs::write(&path, format!("{SCORE_HEADER}\n1,2,3\n")).unwrap();
    assert!(matches!(read_score_csv(&path), Err(Error::Format { .. })));
}
