use serde_json::json;

use super::{Hypergraph, LabeledMatrix, Origin};

/// CSV with hyperedge labels as the header row and first column.
pub fn matrix_csv(labels: &[String], data: &[f64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(labels.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    let n = labels.len();
    for (i, label) in labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(data[i * n..(i + 1) * n].iter().map(|v| v.to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

impl LabeledMatrix {
    pub fn to_csv(&self) -> String {
        matrix_csv(&self.labels, &self.data)
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Bipartite incidence rendering: ellipse vertices, box hyperedges.
pub fn hypergraph_dot(g: &Hypergraph) -> String {
    let mut s = String::from("graph hypergraph {\n  node [fontsize=10];\n");
    for (i, v) in g.vertices().iter().enumerate() {
        s.push_str(&format!(
            "  v{i} [shape=ellipse, label=\"{}: {}\"];\n",
            dot_escape(&g.schema().roles()[v.role]),
            dot_escape(&v.text)
        ));
    }
    for h in g.hyperedges() {
        let style = match h.origin {
            Origin::Original => "solid",
            Origin::Mined { .. } => "dashed",
        };
        s.push_str(&format!(
            "  \"e:{}\" [shape=box, style={style}, label=\"{}\\n{}\"];\n",
            dot_escape(h.id().as_str()),
            dot_escape(h.id().as_str()),
            dot_escape(h.document().as_str())
        ));
        for v in &h.vertices {
            s.push_str(&format!(
                "  \"e:{}\" -- v{v};\n",
                dot_escape(h.id().as_str())
            ));
        }
    }
    s.push_str("}\n");
    s
}

/// JSONL snapshot: one `vertex` line per vertex, one `hyperedge` line per hyperedge.
pub fn hypergraph_snapshot(g: &Hypergraph) -> String {
    let mut s = String::new();
    for (i, v) in g.vertices().iter().enumerate() {
        let line = json!({
            "kind": "vertex",
            "id": i,
            "role": g.schema().roles()[v.role],
            "text": v.text,
        });
        s.push_str(&line.to_string());
        s.push('\n');
    }
    for h in g.hyperedges() {
        let origin = match &h.origin {
            Origin::Original => json!("original"),
            Origin::Mined { parents } => json!({ "mined": [parents.0, parents.1] }),
        };
        let line = json!({
            "kind": "hyperedge",
            "id": h.id(),
            "document_id": h.document(),
            "time_index": h.frame.time_index,
            "lineage": h.lineage,
            "vertices": h.vertices,
            "origin": origin,
        });
        s.push_str(&line.to_string());
        s.push('\n');
    }
    s
}
