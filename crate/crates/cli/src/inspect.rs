use std::fs;
use std::path::Path;

use dnncov::io::{self, DATASET_MAGIC, STATE_MAGIC, TRACE_MAGIC};

use crate::{data_err, load_dataset, load_model, load_profile, load_report, Outcome};

pub fn run(path: &Path) -> Outcome {
    crate::check_input(path)?;
    let bytes = fs::read(path).map_err(|e| data_err(path, e))?;
    let magic: Option<[u8; 4]> = bytes.get(..4).and_then(|m| m.try_into().ok());
    match magic {
        Some(DATASET_MAGIC) => dataset(path),
        Some(TRACE_MAGIC) => traces(path, &bytes),
        Some(STATE_MAGIC) => state(path, &bytes),
        _ => {
            let doc: serde_json::Value =
                serde_json::from_slice(&bytes).map_err(|e| data_err(path, format!("not a dnncov artifact: {e}")))?;
            match doc.get("format").and_then(|f| f.as_str()) {
                Some(io::MODEL_FORMAT) => model(path),
                Some(io::PROFILE_FORMAT) => profile(path),
                Some(io::REPORT_FORMAT) => report(path),
                other => Err(data_err(path, format!("unknown artifact format {other:?}"))),
            }
        }
    }
}

fn range(values: impl Iterator<Item = f32>) -> String {
    let (lo, hi) = values.fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        "empty".into()
    } else {
        format!("[{lo}, {hi}]")
    }
}

fn dataset(path: &Path) -> Outcome {
    let d = load_dataset(path)?;
    let mut per_class = vec![0usize; d.num_classes() as usize];
    for &l in d.labels() {
        per_class[l as usize] += 1;
    }
    say!("dataset");
    say!("  records      {}", d.len());
    say!("  input_size   {}", d.input_size());
    say!("  num_classes  {}", d.num_classes());
    say!("  provenance   {}", d.provenance());
    say!("  ids          {}", if d.explicit_ids().is_some() { "explicit" } else { "index" });
    say!("  per class    {per_class:?}");
    for j in 0..d.input_size() {
        say!("  input[{j}]     {}", range((0..d.len()).map(|i| d.input(i)[j])));
    }
    for i in 0..d.len().min(5) {
        say!("  {:<12} {:?} -> {}", d.id(i), d.input(i), d.label(i));
    }
    Ok(())
}

fn traces(path: &Path, bytes: &[u8]) -> Outcome {
    let (header, records) = io::read_traces(bytes).map_err(|e| data_err(path, e))?;
    say!("trace stream");
    say!("  model_id     {}", header.model_id);
    say!("  layer_sizes  {:?}", header.layer_sizes);
    say!("  records      {}", header.count);
    for l in 0..header.layer_sizes.len() {
        let values = records.iter().flat_map(|t| t.layers[l].iter().copied());
        say!("  layer {l}      {}", range(values));
    }
    for t in records.iter().take(5) {
        say!("  record       {}", t.input_id);
    }
    Ok(())
}

fn state(path: &Path, bytes: &[u8]) -> Outcome {
    let (header, parts) = io::read_state_raw(&mut &bytes[..]).map_err(|e| data_err(path, e))?;
    say!("coverage state");
    say!("  model_id       {}", header.model_id);
    say!("  profile_hash   {}", header.profile_hash);
    say!(
        "  config         k={} top_k={} nc_threshold={}",
        header.config.k_sections,
        header.config.top_k,
        header.config.nc_threshold
    );
    say!("  layer_sizes    {:?}", header.layer_sizes);
    say!("  inputs_seen    {}", header.inputs_seen);
    say!("  sections hit   {} / {}", parts.sections.count_ones(), parts.sections.len());
    say!("  upper corners  {}", parts.upper.count_ones());
    say!("  lower corners  {}", parts.lower.count_ones());
    say!("  top-k neurons  {}", parts.topk.count_ones());
    say!("  nc neurons     {}", parts.nc.count_ones());
    say!("  patterns       {}", parts.patterns.len());
    Ok(())
}

fn model(path: &Path) -> Outcome {
    let m = load_model(path)?;
    say!("model");
    say!("  model_id     {}", m.model_id());
    say!("  input_size   {}", m.input_size());
    say!("  num_classes  {}", m.num_classes());
    let mut params = 0;
    for (i, l) in m.layers().iter().enumerate() {
        params += l.weights().len() + l.bias().len();
        say!("  layer {i}      dense {} {} -> {}", l.activation(), l.input_size(), l.output_size());
    }
    say!("  parameters   {params}");
    Ok(())
}

fn profile(path: &Path) -> Outcome {
    let p = load_profile(path)?;
    say!("profile");
    say!("  model_id     {}", p.model_id());
    say!("  digest       {}", p.digest());
    say!("  inputs       {}", p.count());
    for (i, layer) in p.layers().iter().enumerate() {
        let constant = layer.iter().filter(|b| b.low == b.high).count();
        say!(
            "  layer {i}      {} neurons, lows {}, highs {}, {constant} constant",
            layer.len(),
            range(layer.iter().map(|b| b.low)),
            range(layer.iter().map(|b| b.high)),
        );
    }
    Ok(())
}

fn report(path: &Path) -> Outcome {
    let r = load_report(path)?;
    let c = &r.counts;
    say!("coverage report");
    say!("  model_id       {}", r.model_id);
    say!("  profile_hash   {}", r.profile_hash);
    say!("  config         k={} top_k={} nc_threshold={}", r.config.k_sections, r.config.top_k, r.config.nc_threshold);
    say!("  inputs_seen    {}", r.inputs_seen);
    say!("  KMNC           {:.4}  ({} / {} sections)", r.kmnc, c.sections_covered, c.sections_total);
    say!(
        "  NBC            {:.4}  ({} upper + {} lower of {} corners)",
        r.nbc,
        c.upper_corner_neurons,
        c.lower_corner_neurons,
        2 * c.neurons
    );
    say!("  SNAC           {:.4}  ({} / {} neurons)", r.snac, c.upper_corner_neurons, c.neurons);
    say!("  TKNC           {:.4}  ({} / {} neurons)", r.tknc, c.topk_neurons, c.neurons);
    say!("  TKNP           {}", r.tknp);
    say!("  NC             {:.4}  ({} / {} neurons)", r.nc, c.nc_neurons, c.neurons);
    Ok(())
}
