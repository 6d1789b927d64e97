use narrative_core::analysis::{analyze, AnalysisOptions};
use narrative_core::corpus::{load_group, permute_group};
use narrative_core::semantic::{embed_paragraphs, first_coordinate_series, Weighting};
use narrative_core::testkit::{
    brownian_bridge_group, text_synth_group, Lexicon, SyntheticGroupSpec, TextSynthSpec,
};

#[test]
fn group_scale_corpus_loads_in_full() {
    let dir = tempfile::tempdir().unwrap();
    let lexicon = Lexicon::synthetic(20, 30, 3);
    let spec = TextSynthSpec::new(684, 20, 3);
    let config = text_synth_group(&spec, &lexicon, dir.path()).unwrap();
    let (group, report) = load_group(dir.path(), &config).unwrap();
    assert_eq!(group.n_narratives(), 684);
    assert_eq!(report.accepted, 684);
    assert_eq!(report.candidates, 684);
}

#[test]
fn text_corpus_through_lsa_recovers_order() {
    let dir = tempfile::tempdir().unwrap();
    let lexicon = Lexicon::synthetic(8, 40, 11);
    let spec = TextSynthSpec::new(60, 8, 11);
    let config = text_synth_group(&spec, &lexicon, dir.path()).unwrap();
    let (group, _) = load_group(dir.path(), &config).unwrap();
    let set = embed_paragraphs(&group, 12, Weighting::LogEntropy).unwrap();
    let bundle = analyze(&set, &group.meta(), &AnalysisOptions::default()).unwrap();
    assert_eq!(bundle.ordered.tsp.order, (0..8).collect::<Vec<_>>());
    assert!(bundle.comparison.ordered_dominates);

    // the first coordinate of a narrative is one value per paragraph
    let series = first_coordinate_series(&set, 0).unwrap();
    assert_eq!(series.len(), 8);
}

#[test]
fn permuting_text_keeps_every_paragraph() {
    let dir = tempfile::tempdir().unwrap();
    let lexicon = Lexicon::synthetic(6, 20, 1);
    let config = text_synth_group(&TextSynthSpec::new(5, 6, 1), &lexicon, dir.path()).unwrap();
    let (group, _) = load_group(dir.path(), &config).unwrap();
    let shuffled = permute_group(&group, 9, false);
    for (a, b) in group.narratives().iter().zip(shuffled.narratives()) {
        let mut x = a.paragraphs.clone();
        let mut y = b.paragraphs.clone();
        x.sort();
        y.sort();
        assert_eq!(x, y);
    }
    let pinned = permute_group(&group, 9, true);
    for (a, b) in group.narratives().iter().zip(pinned.narratives()) {
        assert_eq!(a.paragraphs[0], b.paragraphs[0]);
        assert_eq!(a.paragraphs[5], b.paragraphs[5]);
    }
}

#[test]
fn pinned_shuffle_keeps_anchor_means() {
    let mut spec = SyntheticGroupSpec::along_axis(40, 10, 4, 1.0, 0.0, 6);
    spec.sigma = spec.sigma_for_noise_ratio(2.0);
    let (set, meta) = brownian_bridge_group(&spec).unwrap();
    let options = AnalysisOptions {
        pin_anchors: true,
        ..AnalysisOptions::default()
    };
    let bundle = analyze(&set, &meta, &options).unwrap();
    assert_eq!(bundle.shuffled.path.points[0], spec.anchor_a_vec);
    assert_eq!(bundle.shuffled.path.points[9], spec.anchor_b_vec);
    let json = serde_json::to_string(&bundle).unwrap();
    assert!(json.contains("\"shuffled\""));
}
