use super::DecompositionTree;

const HEADER: [&str; 8] = ["Level", "Problem", "Difficulty", "δ", "Rule", "V1", "V2", "V3"];

fn mark(ok: bool) -> &'static str {
    if ok {
        "✓"
    } else {
        "✗"
    }
}

fn level_label(distance: usize, is_leaf: bool) -> String {
    match (distance, is_leaf) {
        (0, _) => "Root".into(),
        (_, true) => "Leaf".into(),
        (1, _) => "Child".into(),
        (2, _) => "Grandchild".into(),
        (n, _) => format!("{}grandchild", "Great-".repeat(n - 2)),
    }
}

fn title_case(s: &str) -> String {
    let mut chars = s.chars();
    chars.next().map(|c| c.to_uppercase().chain(chars).collect()).unwrap_or_default()
}

/// Renders the tree as an aligned text table, one row per node visit in
/// depth-first order. The root row has no rule or check columns.
pub fn render_table(tree: &DecompositionTree) -> String {
    let mut rows: Vec<[String; 8]> = Vec::new();
    let mut stack: Vec<(usize, usize, Option<usize>)> = vec![(tree.root, 0, None)];
    while let Some((node, distance, via)) = stack.pop() {
        let problem = &tree.nodes[node];
        let is_leaf = tree.children_of(node).next().is_none();
        let mut row = [
            level_label(distance, is_leaf),
            format!("d/dx[{}]", problem.expr),
            format!("D{}", problem.level),
            problem.depth.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ];
        if let Some(edge) = via.map(|i| &tree.edges[i]) {
            row[4] = title_case(edge.rule.as_str());
            row[5] = mark(edge.report.v1).into();
            row[6] = mark(edge.report.v2).into();
            row[7] = mark(edge.report.v3 == Some(edge.rule)).into();
        }
        rows.push(row);
        let children: Vec<usize> =
            (0..tree.edges.len()).filter(|&i| tree.edges[i].parent == node).collect();
        for &i in children.iter().rev() {
            stack.push((tree.edges[i].child, distance + 1, Some(i)));
        }
    }

    let mut widths = HEADER.map(|h| h.chars().count());
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        padded.join("  ").trim_end().to_string()
    };

    let mut out = String::new();
    out.push_str(&line(&HEADER.map(String::from)));
    out.push('\n');
    let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for row in &rows {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}
