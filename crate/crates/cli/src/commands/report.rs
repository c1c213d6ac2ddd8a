// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use curveprobe_core::io::parse_jsonl;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::formats::{self, BfcRecord};
use crate::output::{companion, csv_bytes, sibling, Manifest, Run};
use crate::settings::Settings;
use crate::ReportArgs;

/// Tables the report joins, with the file name used when no manifest names one.
const SOURCES: [(&str, &str); 4] = [
    ("curvature", "bfc.jsonl"),
    ("ma", "ma.jsonl"),
    ("enrich", "enrich.json"),
    ("collapse", "collapse.jsonl"),
];

#[derive(Debug, Default, Serialize)]
struct CurvatureSide {
    num_edges: usize,
    weighted_mean: Option<f64>,
    negative_fraction: Option<f64>,
    min_bfc: Option<f64>,
}

#[derive(Debug, Serialize)]
struct MaSide {
    model: String,
    cutoff: f64,
    pairs: usize,
    flagged_pairs: usize,
    flagged_structural_pairs: usize,
}

/// The subset of a collapse record the report keeps.
#[derive(Debug, Serialize, Deserialize)]
struct CollapseSide {
    static_negative_fraction: f64,
    activation_negative_fraction: f64,
    static_spectral_gap: f64,
    activation_spectral_gap: f64,
    mean_shift: f64,
    negative_fraction_shift: f64,
    spectral_gap_shift: f64,
}

#[derive(Debug, Deserialize)]
struct CollapseLine {
    graph_id: String,
    #[serde(flatten)]
    side: CollapseSide,
}

#[derive(Debug, Default, Serialize)]
struct GraphRow {
    graph_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    curvature: Option<CurvatureSide>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ma: Option<MaSide>,
    #[serde(skip_serializing_if = "Option::is_none")]
    collapse: Option<CollapseSide>,
}

#[derive(Serialize)]
struct Report {
    sources: BTreeMap<String, String>,
    graphs: Vec<GraphRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    enrichment: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    collapse_aggregate: Option<Value>,
}

#[derive(Serialize)]
struct Row<'a> {
    graph_id: &'a str,
    num_edges: Option<usize>,
    weighted_mean: Option<f64>,
    negative_fraction: Option<f64>,
    ma_cutoff: Option<f64>,
    ma_flagged_pairs: Option<usize>,
    ma_flagged_structural_pairs: Option<usize>,
    static_spectral_gap: Option<f64>,
    activation_spectral_gap: Option<f64>,
    mean_shift: Option<f64>,
    negative_fraction_shift: Option<f64>,
}

/// Output file of each joined command, by the manifest or by convention.
fn locate(dir: &Path) -> anyhow::Result<BTreeMap<&'static str, String>> {
    let manifest = Manifest::load(dir)?;
    let mut found = BTreeMap::new();
    for (command, default) in SOURCES {
        let named = manifest.as_ref().and_then(|m| {
            m.runs
                .iter()
                .find(|(_, run)| run.command == command)
                .map(|(name, _)| name.clone())
        });
        match named {
            Some(name) => {
                found.insert(command, name);
            }
            None if dir.join(default).exists() => {
                found.insert(command, default.to_owned());
            }
            None => {}
        }
    }
    Ok(found)
}

pub fn run(args: ReportArgs, mut settings: Settings) -> anyhow::Result<()> {
    let dir: PathBuf = settings.req("dir", args.dir)?;
    let out: PathBuf = settings.or("out", args.out, dir.join("report.json"))?;
    let config = settings.finish()?;
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }

    let sources = locate(&dir)?;
    if sources.is_empty() {
        bail!(
            "{} holds no curvature, ma, enrich or collapse output",
            dir.display()
        );
    }

    let mut run = Run::new("report");
    let mut rows: BTreeMap<String, GraphRow> = BTreeMap::new();

    if let Some(name) = sources.get("curvature") {
        let path = dir.join(name);
        for r in formats::bfc_records(&run.read(&path)?, &path)? {
            let side = curvature_side(&r);
            get(&mut rows, &r.graph_id).curvature = Some(side);
        }
    }
    if let Some(name) = sources.get("ma") {
        let path = dir.join(name);
        for r in formats::ma_reports(&run.read(&path)?, &path)? {
            get(&mut rows, &r.graph_id).ma = Some(MaSide {
                flagged_pairs: r.flagged().count(),
                flagged_structural_pairs: r.flagged().filter(|e| e.bfc.is_some()).count(),
                pairs: r.entries.len(),
                cutoff: r.cutoff,
                model: r.model,
            });
        }
    }
    let mut collapse_aggregate = None;
    if let Some(name) = sources.get("collapse") {
        let path = dir.join(name);
        let lines: Vec<CollapseLine> = parse_jsonl(&run.read(&path)?[..])
            .with_context(|| format!("parsing {}", path.display()))?;
        for line in lines {
            get(&mut rows, &line.graph_id).collapse = Some(line.side);
        }
        let aggregate = companion(&path, "aggregate", "json");
        if aggregate.exists() {
            collapse_aggregate = Some(read_json(&mut run, &aggregate)?);
        }
    }
    let enrichment = match sources.get("enrich") {
        Some(name) => Some(read_json(&mut run, &dir.join(name))?),
        None => None,
    };

    let graphs: Vec<GraphRow> = rows.into_values().collect();
    let table: Vec<Row> = graphs
        .iter()
        .map(|g| Row {
            graph_id: &g.graph_id,
            num_edges: g.curvature.as_ref().map(|c| c.num_edges),
            weighted_mean: g.curvature.as_ref().and_then(|c| c.weighted_mean),
            negative_fraction: g.curvature.as_ref().and_then(|c| c.negative_fraction),
            ma_cutoff: g.ma.as_ref().map(|m| m.cutoff),
            ma_flagged_pairs: g.ma.as_ref().map(|m| m.flagged_pairs),
            ma_flagged_structural_pairs: g.ma.as_ref().map(|m| m.flagged_structural_pairs),
            static_spectral_gap: g.collapse.as_ref().map(|c| c.static_spectral_gap),
            activation_spectral_gap: g.collapse.as_ref().map(|c| c.activation_spectral_gap),
            mean_shift: g.collapse.as_ref().map(|c| c.mean_shift),
            negative_fraction_shift: g.collapse.as_ref().map(|c| c.negative_fraction_shift),
        })
        .collect();
    let csv = csv_bytes(&table)?;
    drop(table);
    let report = Report {
        sources: sources
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect(),
        graphs,
        enrichment,
        collapse_aggregate,
    };
    run.add_json(out.clone(), &report)?;
    run.add(sibling(&out, "csv"), csv);
    run.commit(config)
}

fn get<'a>(rows: &'a mut BTreeMap<String, GraphRow>, id: &str) -> &'a mut GraphRow {
    rows.entry(id.to_owned()).or_insert_with(|| GraphRow {
        graph_id: id.to_owned(),
        ..Default::default()
    })
}

fn curvature_side(r: &BfcRecord) -> CurvatureSide {
    CurvatureSide {
        num_edges: r.edges.len(),
        weighted_mean: r.weighted_mean,
        negative_fraction: r.negative_fraction,
        min_bfc: r.bfc.iter().copied().reduce(f64::min),
    }
}

fn read_json(run: &mut Run, path: &Path) -> anyhow::Result<Value> {
    serde_json::from_slice(&run.read(path)?).with_context(|| format!("parsing {}", path.display()))
}
