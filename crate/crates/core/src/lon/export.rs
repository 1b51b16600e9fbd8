//! GraphML, DOT and CSV renderings of networks and their statistics tables.
//!
//! Node size is proportional to fitness and the fill colour follows the
//! node's quartile class. Output is a pure function of the input, so
//! repeated exports are byte-identical.

use std::fmt::Write;

use super::{Lon, LonNode, LonSummary, QuartileClass};
use crate::hash::to_hex;
use crate::sampler::RunStatistics;
use crate::stats::ComparisonRow;

/// DOT node width in inches per unit of fitness.
const DOT_WIDTH_PER_FITNESS: f64 = 0.02;

fn class_of(n: &LonNode) -> Option<QuartileClass> {
    n.quartile_class
}

fn runs_attr(n: &LonNode) -> String {
    n.runs.iter().map(u32::to_string).collect::<Vec<_>>().join(";")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn to_graphml(lon: &Lon) -> String {
    let pos = lon.node_positions();
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n");
    let keys = [
        ("fitness", "node", "double"),
        ("killed", "node", "boolean"),
        ("quartile_class", "node", "string"),
        ("color", "node", "string"),
        ("size", "node", "double"),
        ("runs", "node", "string"),
        ("phenotype_hash", "node", "string"),
        ("design_hash", "node", "string"),
        ("weight", "edge", "int"),
        ("delta", "edge", "double"),
        ("self_loop", "edge", "boolean"),
    ];
    for (name, domain, ty) in keys {
        let _ = writeln!(
            s,
            "  <key id=\"{name}\" for=\"{domain}\" attr.name=\"{name}\" attr.type=\"{ty}\"/>"
        );
    }
    let _ = writeln!(
        s,
        "  <graph id=\"{}\" edgedefault=\"directed\">",
        xml_escape(lon.provenance.encoding.name())
    );
    for n in &lon.nodes {
        let _ = writeln!(s, "    <node id=\"n{}\">", to_hex(n.id));
        let _ = writeln!(s, "      <data key=\"fitness\">{}</data>", n.fitness.value);
        let _ = writeln!(s, "      <data key=\"killed\">{}</data>", n.fitness.killed);
        if let Some(c) = class_of(n) {
            let _ = writeln!(s, "      <data key=\"quartile_class\">{}</data>", c.as_str());
            let _ = writeln!(s, "      <data key=\"color\">{}</data>", c.color());
        }
        let _ = writeln!(s, "      <data key=\"size\">{}</data>", n.fitness.value);
        let _ = writeln!(s, "      <data key=\"runs\">{}</data>", runs_attr(n));
        let _ = writeln!(
            s,
            "      <data key=\"phenotype_hash\">{}</data>",
            to_hex(n.phenotype_hash)
        );
        let _ = writeln!(s, "      <data key=\"design_hash\">{}</data>", to_hex(n.design_hash));
        s.push_str("    </node>\n");
    }
    for (i, e) in lon.edges.iter().enumerate() {
        let delta = (lon.nodes[pos[&e.dst]].fitness.value - lon.nodes[pos[&e.src]].fitness.value).max(0.0);
        let _ = writeln!(
            s,
            "    <edge id=\"e{i}\" source=\"n{}\" target=\"n{}\">",
            to_hex(e.src),
            to_hex(e.dst)
        );
        let _ = writeln!(s, "      <data key=\"weight\">{}</data>", e.weight);
        let _ = writeln!(s, "      <data key=\"delta\">{delta}</data>");
        let _ = writeln!(s, "      <data key=\"self_loop\">{}</data>", e.is_self_loop());
        s.push_str("    </edge>\n");
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

pub fn to_dot(lon: &Lon) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "digraph \"{}\" {{", lon.provenance.encoding.name());
    s.push_str("  node [shape=circle, style=filled, fixedsize=true, label=\"\"];\n");
    for n in &lon.nodes {
        let class = class_of(n);
        let _ = writeln!(
            s,
            "  \"n{}\" [fitness=\"{}\", killed=\"{}\", quartile_class=\"{}\", fillcolor=\"{}\", width=\"{:.4}\", runs=\"{}\"];",
            to_hex(n.id),
            n.fitness.value,
            n.fitness.killed,
            class.map_or("none", QuartileClass::as_str),
            class.map_or("#ffffff", QuartileClass::color),
            n.fitness.value * DOT_WIDTH_PER_FITNESS,
            runs_attr(n),
        );
    }
    for e in &lon.edges {
        let _ = writeln!(
            s,
            "  \"n{}\" -> \"n{}\" [weight={}];",
            to_hex(e.src),
            to_hex(e.dst),
            e.weight
        );
    }
    s.push_str("}\n");
    s
}

/// Node table: one row per local optimum.
pub fn nodes_csv(lon: &Lon) -> String {
    let mut s = String::from("id,fitness,killed,quartile_class,color,size,runs,phenotype_hash,design_hash\n");
    for n in &lon.nodes {
        let class = class_of(n);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            to_hex(n.id),
            n.fitness.value,
            n.fitness.killed,
            class.map_or("", QuartileClass::as_str),
            class.map_or("", QuartileClass::color),
            n.fitness.value,
            runs_attr(n),
            to_hex(n.phenotype_hash),
            to_hex(n.design_hash),
        );
    }
    s
}

pub fn edges_csv(lon: &Lon) -> String {
    let mut s = String::from("src,dst,weight\n");
    for e in &lon.edges {
        let _ = writeln!(s, "{},{},{}", to_hex(e.src), to_hex(e.dst), e.weight);
    }
    s
}

fn table(header: &[String], rows: Vec<(&str, Vec<String>)>) -> String {
    let mut s = format!("metric,{}\n", header.join(","));
    for (label, cells) in rows {
        let _ = writeln!(s, "{label},{}", cells.join(","));
    }
    s
}

pub const LON_STATS_ROWS: [&str; 6] = ["nodes", "edges", "components", "path length", "degree", "infeasible"];
pub const RUN_STATS_ROWS: [&str; 4] = [
    "mutation acceptance",
    "design acceptance",
    "unique designs",
    "attempted mutations",
];

/// Network statistics, one column per labelled network. Percentages are
/// plain numbers in percent; an undefined path length is written `NA`.
pub fn lon_stats_csv(columns: &[(String, LonSummary)]) -> String {
    let header: Vec<String> = columns.iter().map(|(l, _)| l.clone()).collect();
    let col = |f: &dyn Fn(&LonSummary) -> String| columns.iter().map(|(_, s)| f(s)).collect::<Vec<_>>();
    table(
        &header,
        vec![
            (LON_STATS_ROWS[0], col(&|s| s.nodes.to_string())),
            (LON_STATS_ROWS[1], col(&|s| s.edges.to_string())),
            (LON_STATS_ROWS[2], col(&|s| s.components.to_string())),
            (
                LON_STATS_ROWS[3],
                col(&|s| s.path_length.map_or("NA".into(), |p| format!("{p:.6}"))),
            ),
            (LON_STATS_ROWS[4], col(&|s| format!("{:.6}", s.degree))),
            (LON_STATS_ROWS[5], col(&|s| format!("{:.6}", s.infeasible))),
        ],
    )
}

pub fn run_stats_csv(columns: &[(String, RunStatistics)]) -> String {
    let header: Vec<String> = columns.iter().map(|(l, _)| l.clone()).collect();
    let col = |f: &dyn Fn(&RunStatistics) -> String| columns.iter().map(|(_, s)| f(s)).collect::<Vec<_>>();
    table(
        &header,
        vec![
            (RUN_STATS_ROWS[0], col(&|s| format!("{:.6}", s.mutation_acceptance))),
            (RUN_STATS_ROWS[1], col(&|s| format!("{:.6}", s.design_acceptance))),
            (RUN_STATS_ROWS[2], col(&|s| s.unique_designs.to_string())),
            (RUN_STATS_ROWS[3], col(&|s| s.attempted_mutations.to_string())),
        ],
    )
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("metric,group_a,group_b,n_a,n_b,u_statistic,p_value,stars\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.6e},{}",
            r.metric, r.group_a, r.group_b, r.n_a, r.n_b, r.u_statistic, r.p_value, r.stars
        );
    }
    s
}
