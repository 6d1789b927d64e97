use std::collections::BTreeMap;
use std::path::Path;

use log::warn;
use narrative_core::analysis::{AnalysisOptions, VariantReport};
use narrative_core::corpus::{candidate_files, split_paragraphs};
use narrative_core::semantic::{embed_paragraphs, load_external, paragraph_series};
use narrative_core::takens::{
    dimension_sweep, lorenz_series, shuffle_series, GpConfig, LorenzParams,
};
use narrative_core::testkit::{text_synth_group, Lexicon, TextSynthSpec};
use narrative_core::{
    brownian_bridge_group, load_group, sub_seed, tree_to_dot, CorpusError, DelaySeries,
    EmbeddingSet, GroupConfig, GroupMeta, NarrativeGroup, SemanticError, SyntheticGroupSpec,
    Weighting,
};
use serde::de::DeserializeOwned;
use serde_json::json;

use crate::bundle::{read_text, Bundle};
use crate::{AnalyzeArgs, CliError, DimensionArgs, EmbedArgs, IngestArgs, SynthArgs, SynthKind};

const LORENZ_TAU: usize = 10;
const LORENZ_TRANSIENT: usize = 1000;

/// A JSON argument given inline (`{...}`) or as a file path.
fn json_arg<T: DeserializeOwned>(
    arg: &str,
    what: &str,
    bundle: &mut Bundle,
) -> Result<T, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        bundle.add_input_bytes(format!("inline:{what}"), arg.as_bytes());
        arg.to_string()
    } else {
        let path = Path::new(arg);
        bundle.add_input(path)?;
        read_text(path)?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid {what}: {e}")))
}

fn hash_corpus(dir: &Path, bundle: &mut Bundle) -> Result<(), CliError> {
    for (_, path) in candidate_files(dir)? {
        bundle.add_input(&path)?;
    }
    Ok(())
}

fn load_corpus(
    dir: &Path,
    config_arg: &str,
    bundle: &mut Bundle,
) -> Result<(NarrativeGroup, GroupConfig), CliError> {
    let config: GroupConfig = json_arg(config_arg, "group config", bundle)?;
    config.validate()?;
    hash_corpus(dir, bundle)?;
    match load_group(dir, &config) {
        Ok((group, report)) => {
            bundle.write("validation.json", report.to_json() + "\n")?;
            Ok((group, config))
        }
        Err(CorpusError::InsufficientNarratives { accepted, report }) => {
            bundle.write("validation.json", report.to_json() + "\n")?;
            Err(CorpusError::InsufficientNarratives { accepted, report }.into())
        }
        Err(e) => Err(e.into()),
    }
}

/// LSA embedding; a dimension above the matrix rank bound is lowered to it.
fn embed_group(
    group: &NarrativeGroup,
    dims: usize,
    weighting: Weighting,
) -> Result<EmbeddingSet, CliError> {
    match embed_paragraphs(group, dims, weighting) {
        Err(SemanticError::RankTooLarge { k, rows, cols }) if k > 0 => {
            let bound = rows.min(cols);
            warn!("--dims {k} exceeds the {rows}x{cols} matrix rank bound; using {bound}");
            Ok(embed_paragraphs(group, bound, weighting)?)
        }
        other => Ok(other?),
    }
}

fn seeds(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

pub fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let mut bundle = Bundle::create(&args.out)?;
    let result = load_corpus(&args.corpus.dir, &args.corpus.group_config, &mut bundle);
    if let Ok((group, _)) = &result {
        bundle.write_json("group_meta.json", &group.meta())?;
    }
    let config = json!({ "dir": args.corpus.dir, "group_config": args.corpus.group_config });
    bundle.finish("ingest", config, BTreeMap::new())?;
    result.map(|_| ())
}

pub fn embed(args: EmbedArgs) -> Result<(), CliError> {
    let mut bundle = Bundle::create(&args.out)?;
    let (group, config) = load_corpus(&args.corpus.dir, &args.corpus.group_config, &mut bundle)?;
    let set = embed_group(&group, args.embed.dims, args.embed.weighting)?;
    bundle.write("embeddings.txt", set.to_file_string())?;
    bundle.write_json("group_meta.json", &group.meta())?;
    let snapshot = json!({
        "dir": args.corpus.dir,
        "group_config": config,
        "dims_requested": args.embed.dims,
        "dims": set.k(),
        "weighting": args.embed.weighting.to_string(),
    });
    bundle.finish("embed", snapshot, BTreeMap::new())
}

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let mut bundle = Bundle::create(&args.out)?;
    match args.kind {
        SynthKind::Bridge => {
            let spec: SyntheticGroupSpec = match &args.spec {
                Some(arg) => json_arg(arg, "synthetic spec", &mut bundle)?,
                None => {
                    let mut spec = SyntheticGroupSpec::along_axis(
                        args.narratives,
                        args.paragraphs,
                        args.dims,
                        1.0,
                        0.0,
                        args.seed,
                    );
                    if args.paragraphs >= 2 && args.dims >= 1 {
                        spec.sigma = args
                            .sigma
                            .unwrap_or_else(|| spec.sigma_for_noise_ratio(args.noise_ratio));
                    }
                    spec
                }
            };
            let (set, meta) = brownian_bridge_group(&spec)?;
            bundle.write("embeddings.txt", set.to_file_string())?;
            bundle.write_json("group_meta.json", &meta)?;
            bundle.write_json("spec.json", &spec)?;
            let seed = spec.seed;
            bundle.finish("synth", json!({ "kind": "bridge", "spec": spec }), seeds(&[("root", seed)]))
        }
        SynthKind::Text => {
            let spec: TextSynthSpec = match &args.spec {
                Some(arg) => json_arg(arg, "text spec", &mut bundle)?,
                None => TextSynthSpec::new(args.narratives, args.paragraphs, args.seed),
            };
            let lexicon = Lexicon::synthetic(spec.n_paragraphs, args.pool_size, spec.seed);
            let corpus = bundle.root().join("corpus");
            let config = text_synth_group(&spec, &lexicon, &corpus)?;
            for (id, _) in candidate_files(&corpus)? {
                bundle.record(&format!("corpus/{id}.txt"))?;
            }
            bundle.write_json("group_config.json", &config)?;
            bundle.write_json("spec.json", &spec)?;
            let snapshot = json!({ "kind": "text", "spec": spec, "pool_size": args.pool_size });
            let seed = spec.seed;
            bundle.finish("synth", snapshot, seeds(&[("root", seed)]))
        }
    }
}

/// Parses `a..b` (1-based, inclusive) into 0-based bounds.
fn parse_range(text: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--range expects a..b with 1 <= a < b, got '{text}'"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || b <= a {
        return Err(bad());
    }
    Ok((a - 1, b - 1))
}

fn position(flag: &str, value: Option<usize>) -> Result<Option<usize>, CliError> {
    match value {
        Some(0) => Err(CliError::Usage(format!("{flag} is 1-based"))),
        other => Ok(other.map(|p| p - 1)),
    }
}

fn write_variant(bundle: &mut Bundle, dir: &str, v: &VariantReport) -> Result<(), CliError> {
    bundle.write(&format!("{dir}/average_path.csv"), v.path.to_csv())?;
    bundle.write_json(
        &format!("{dir}/action.json"),
        &json!({ "path_action": v.action, "tsp_action": v.tsp.cost }),
    )?;
    bundle.write(&format!("{dir}/mst.dot"), tree_to_dot(&v.mst, None))?;
    bundle.write(&format!("{dir}/mst_edges.csv"), v.mst.to_csv())?;
    bundle.write_json(&format!("{dir}/mst_branches.json"), &v.branches)?;
    bundle.write(&format!("{dir}/tsp_order.csv"), v.tsp.to_csv())?;
    bundle.write(&format!("{dir}/runs.json"), v.runs.to_json() + "\n")?;
    bundle.write(&format!("{dir}/runs.csv"), v.runs.to_csv())
}

pub fn analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let mut bundle = Bundle::create(&args.out)?;
    let (set, meta, source) = match (&args.dir, &args.embeddings) {
        (Some(dir), None) => {
            let config_arg = args.group_config.as_deref().expect("clap requires it");
            let (group, config) = load_corpus(dir, config_arg, &mut bundle)?;
            let set = embed_group(&group, args.embed.dims, args.embed.weighting)?;
            let source = json!({
                "dir": dir,
                "group_config": config,
                "dims": set.k(),
                "weighting": args.embed.weighting.to_string(),
            });
            (set, group.meta(), source)
        }
        (None, Some(path)) => {
            let meta_path = args.group_meta.as_ref().expect("clap requires it");
            bundle.add_input(meta_path)?;
            let meta: GroupMeta = serde_json::from_str(&read_text(meta_path)?)
                .map_err(|e| CliError::Usage(format!("invalid group meta: {e}")))?;
            bundle.add_input(path)?;
            let set = load_external(path, &meta)?;
            let source = json!({ "embeddings": path, "group_meta": meta_path });
            (set, meta, source)
        }
        _ => {
            return Err(CliError::Usage(
                "give either --dir with --group-config, or --embeddings with --group-meta".into(),
            ))
        }
    };

    let options = AnalysisOptions {
        metric: args.metric,
        solver: args.tsp,
        restarts: args.restarts,
        seed: args.seed,
        pin_anchors: args.pin_anchors,
        range: args.range.as_deref().map(parse_range).transpose()?,
        start: position("--start", args.start)?,
        end: position("--end", args.end)?,
        run_gap: args.run_gap,
    };
    let result = narrative_core::analyze(&set, &meta, &options)?;
    write_variant(&mut bundle, "ordered", &result.ordered)?;
    write_variant(&mut bundle, "shuffled", &result.shuffled)?;
    bundle.write_json("comparison.json", &result.comparison)?;

    let snapshot = json!({
        "source": source,
        "options": options,
        "range_1_based": [result.range.0 + 1, result.range.1 + 1],
    });
    let seeds = seeds(&[
        ("root", options.seed),
        ("shuffle", options.shuffle_seed()),
        ("tsp", options.tsp_seed()),
    ]);
    bundle.finish("analyze", snapshot, seeds)
}

pub fn dimension(args: DimensionArgs) -> Result<(), CliError> {
    let mut bundle = Bundle::create(&args.out)?;
    if args.m_min == 0 || args.m_min > args.m_max {
        return Err(CliError::Usage(format!(
            "need 1 <= m-min <= m-max, got {}..{}",
            args.m_min, args.m_max
        )));
    }
    let (series, default_tau, source) = if let Some(path) = &args.series {
        bundle.add_input(path)?;
        let s = DelaySeries::from_csv(&read_text(path)?, path.display().to_string())?;
        (s, None, json!({ "series": path }))
    } else if let Some(path) = &args.text {
        bundle.add_input(path)?;
        let paragraphs = split_paragraphs(&read_text(path)?);
        let values = paragraph_series(&paragraphs, args.weighting)?;
        let s = DelaySeries::new(values, path.display().to_string())?;
        let source = json!({ "text": path, "weighting": args.weighting.to_string() });
        (s, None, source)
    } else if args.lorenz {
        let params = LorenzParams::default();
        let (x, _, _) = lorenz_series(
            &params,
            args.dt,
            args.points + LORENZ_TRANSIENT,
            LORENZ_TRANSIENT,
        )?;
        let source = json!({
            "lorenz": params,
            "dt": args.dt,
            "points": args.points,
            "transient": LORENZ_TRANSIENT,
        });
        (x, Some(LORENZ_TAU), source)
    } else {
        return Err(CliError::Usage("give one of --series, --text or --lorenz".into()));
    };

    let tau = args.tau.or(default_tau);
    let gp = GpConfig {
        seed: sub_seed(args.seed, "gp"),
        ..GpConfig::default()
    };
    let shuffle_seed = sub_seed(args.seed, "shuffle");
    let range = args.m_min..=args.m_max;
    let ordered = dimension_sweep(&series, range.clone(), tau, &gp)?;
    let shuffled = dimension_sweep(&shuffle_series(&series, shuffle_seed), range, Some(ordered.tau), &gp)?;

    bundle.write("series.csv", series.to_csv())?;
    bundle.write("dimension_ordered.csv", ordered.to_csv())?;
    bundle.write("dimension_shuffled.csv", shuffled.to_csv())?;
    let snapshot = json!({
        "source": source,
        "m_min": args.m_min,
        "m_max": args.m_max,
        "tau": ordered.tau,
        "gp": gp,
    });
    let seeds = seeds(&[("root", args.seed), ("gp", gp.seed), ("shuffle", shuffle_seed)]);
    bundle.finish("dimension", snapshot, seeds)
}
