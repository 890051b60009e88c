//! Reader for gmsh MSH 2.2 ASCII files.

use std::collections::HashMap;

use super::{MeshError, Point3, RawMesh};

const TRIANGLE: u32 = 2;
const QUAD: u32 = 3;
const TET: u32 = 4;
const HEX: u32 = 5;
const LINE: u32 = 1;
const POINT: u32 = 15;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self { inner: text.lines().enumerate(), last: 0 }
    }

    /// Next non-empty line with its 1-based number.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), MeshError> {
        self.next().ok_or_else(|| MeshError::Parse {
            line: self.last + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    fn expect_exact(&mut self, tag: &str) -> Result<(), MeshError> {
        let (line, l) = self.expect(tag)?;
        if l != tag {
            return Err(MeshError::Parse { line, msg: format!("expected {tag}, found {l:?}") });
        }
        Ok(())
    }

    fn count(&mut self) -> Result<(usize, usize), MeshError> {
        let (line, l) = self.expect("entry count")?;
        let n = l
            .parse()
            .map_err(|_| MeshError::Parse { line, msg: format!("invalid entry count {l:?}") })?;
        Ok((line, n))
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, MeshError> {
    let tok = tok.ok_or_else(|| MeshError::Parse { line, msg: format!("missing {what}") })?;
    tok.parse()
        .map_err(|_| MeshError::Parse { line, msg: format!("invalid {what} {tok:?}") })
}

struct Element {
    line: usize,
    kind: u32,
    physical: Option<usize>,
    nodes: Vec<usize>,
}

/// Parses MSH 2.2 ASCII text.
///
/// Volume elements must be tetrahedra (type 4) or hexahedra (type 5).
/// Triangles and quads are read as tagged boundary faces; lines and points
/// are ignored. Physical groups name the boundary patches.
pub fn parse_msh(text: &str) -> Result<RawMesh, MeshError> {
    let mut lines = Lines::new(text);
    let mut names: HashMap<usize, (usize, String)> = HashMap::new();
    let mut node_index: HashMap<usize, usize> = HashMap::new();
    let mut vertices: Vec<Point3> = Vec::new();
    let mut elements: Vec<Element> = Vec::new();
    let mut seen_format = false;
    let mut seen_nodes = false;
    let mut seen_elements = false;

    while let Some((line, header)) = lines.next() {
        match header {
            "$MeshFormat" => {
                let (vline, v) = lines.expect("format line")?;
                let version = v.split_whitespace().next().unwrap_or("");
                if !version.starts_with("2.") {
                    return Err(MeshError::Parse {
                        line: vline,
                        msg: format!("unsupported MSH version {version:?}, expected 2.2"),
                    });
                }
                let file_type: u32 = parse_num(v.split_whitespace().nth(1), vline, "file type")?;
                if file_type != 0 {
                    return Err(MeshError::Parse { line: vline, msg: "binary MSH is not supported".into() });
                }
                lines.expect_exact("$EndMeshFormat")?;
                seen_format = true;
            }
            "$PhysicalNames" => {
                let (_, n) = lines.count()?;
                for _ in 0..n {
                    let (pl, l) = lines.expect("physical name")?;
                    let mut it = l.splitn(3, char::is_whitespace);
                    let dim: usize = parse_num(it.next(), pl, "physical dimension")?;
                    let tag: usize = parse_num(it.next(), pl, "physical tag")?;
                    let name = it
                        .next()
                        .map(|s| s.trim().trim_matches('"').to_string())
                        .ok_or_else(|| MeshError::Parse { line: pl, msg: "missing physical name".into() })?;
                    names.insert(tag, (dim, name));
                }
                lines.expect_exact("$EndPhysicalNames")?;
            }
            "$Nodes" => {
                let (_, n) = lines.count()?;
                vertices.reserve(n);
                for _ in 0..n {
                    let (nl, l) = lines.expect("node")?;
                    let mut it = l.split_whitespace();
                    let id: usize = parse_num(it.next(), nl, "node id")?;
                    let x: f64 = parse_num(it.next(), nl, "x coordinate")?;
                    let y: f64 = parse_num(it.next(), nl, "y coordinate")?;
                    let z: f64 = parse_num(it.next(), nl, "z coordinate")?;
                    if node_index.insert(id, vertices.len()).is_some() {
                        return Err(MeshError::Parse { line: nl, msg: format!("duplicate node id {id}") });
                    }
                    vertices.push(Point3::new(x, y, z));
                }
                lines.expect_exact("$EndNodes")?;
                seen_nodes = true;
            }
            "$Elements" => {
                let (_, n) = lines.count()?;
                for _ in 0..n {
                    let (el, l) = lines.expect("element")?;
                    let mut it = l.split_whitespace();
                    let _id: usize = parse_num(it.next(), el, "element id")?;
                    let kind: u32 = parse_num(it.next(), el, "element type")?;
                    let ntags: usize = parse_num(it.next(), el, "tag count")?;
                    let mut tags = Vec::with_capacity(ntags);
                    for _ in 0..ntags {
                        tags.push(parse_num::<usize>(it.next(), el, "tag")?);
                    }
                    let nodes = it
                        .map(|t| parse_num::<usize>(Some(t), el, "node reference"))
                        .collect::<Result<Vec<_>, _>>()?;
                    let expected = match kind {
                        POINT => 1,
                        LINE => 2,
                        TRIANGLE => 3,
                        QUAD | TET => 4,
                        HEX => 8,
                        other => return Err(MeshError::UnsupportedElement { line: el, element_type: other }),
                    };
                    if nodes.len() != expected {
                        return Err(MeshError::Parse {
                            line: el,
                            msg: format!("element type {kind} needs {expected} nodes, found {}", nodes.len()),
                        });
                    }
                    elements.push(Element { line: el, kind, physical: tags.first().copied(), nodes });
                }
                lines.expect_exact("$EndElements")?;
                seen_elements = true;
            }
            other if other.starts_with("$End") => {
                return Err(MeshError::Parse { line, msg: format!("unexpected {other}") });
            }
            other if other.starts_with('$') => {
                let end = format!("$End{}", &other[1..]);
                loop {
                    let (_, l) = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            other => {
                return Err(MeshError::Parse { line, msg: format!("expected a section header, found {other:?}") });
            }
        }
    }
    if !seen_format {
        return Err(MeshError::Parse { line: 1, msg: "missing $MeshFormat section".into() });
    }
    if !seen_nodes || !seen_elements {
        return Err(MeshError::Parse { line: lines.last, msg: "missing $Nodes or $Elements section".into() });
    }

    let has_volume = elements.iter().any(|e| e.kind == TET || e.kind == HEX);
    let mut raw = RawMesh { vertices, ..Default::default() };
    let mut patch_of_tag: HashMap<usize, usize> = HashMap::new();
    for e in elements {
        let nodes = e
            .nodes
            .iter()
            .map(|id| node_index.get(id).copied().ok_or(MeshError::DanglingNode { line: e.line, node: *id }))
            .collect::<Result<Vec<_>, _>>()?;
        match e.kind {
            TET => raw.tets.push([nodes[0], nodes[1], nodes[2], nodes[3]]),
            HEX => raw.hexes.push(nodes.try_into().expect("eight nodes")),
            TRIANGLE | QUAD => {
                let volume_group = e
                    .physical
                    .and_then(|t| names.get(&t))
                    .is_some_and(|(dim, _)| *dim == 3);
                if !has_volume || volume_group {
                    return Err(MeshError::UnsupportedElement { line: e.line, element_type: e.kind });
                }
                if let Some(tag) = e.physical {
                    let next = raw.patch_names.len();
                    let patch = *patch_of_tag.entry(tag).or_insert(next);
                    if patch == next {
                        let name = names.get(&tag).map(|(_, n)| n.clone()).unwrap_or_else(|| format!("patch{tag}"));
                        raw.patch_names.push(name);
                    }
                    raw.boundary_elements.push((nodes, patch));
                }
            }
            _ => {}
        }
    }
    if !raw.tets.is_empty() && !raw.hexes.is_empty() {
        return Err(MeshError::MixedElements);
    }
    if raw.tets.is_empty() && raw.hexes.is_empty() {
        return Err(MeshError::NoCells);
    }
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$PhysicalNames\n2\n2 1 \"wall\"\n3 2 \"metal\"\n$EndPhysicalNames\n$Nodes\n8\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n5 0 0 1\n6 1 0 1\n7 1 1 1\n8 0 1 1\n$EndNodes\n$Elements\n2\n1 3 2 1 1 1 2 6 5\n2 5 2 2 1 1 2 3 4 5 6 7 8\n$EndElements\n";

    #[test]
    fn reads_tagged_cube() {
        let raw = parse_msh(CUBE).unwrap();
        assert_eq!(raw.hexes.len(), 1);
        assert_eq!(raw.patch_names, ["wall"]);
        assert_eq!(raw.boundary_elements.len(), 1);
    }

    #[test]
    fn reports_bad_header_line() {
        let text = CUBE.replace("$EndNodes", "$EndNode");
        match parse_msh(&text) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 19),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reports_dangling_node() {
        let text = CUBE.replace("2 5 2 2 1 1 2 3 4 5 6 7 8", "2 5 2 2 1 1 2 3 4 5 6 7 9");
        assert!(matches!(parse_msh(&text), Err(MeshError::DanglingNode { line: 23, node: 9 })));
    }

    #[test]
    fn rejects_second_order_elements() {
        let text = CUBE.replace("2 5 2 2 1", "2 12 2 2 1");
        assert!(matches!(parse_msh(&text), Err(MeshError::UnsupportedElement { element_type: 12, line: 23 })));
    }

    #[test]
    fn rejects_msh4() {
        let text = CUBE.replace("2.2 0 8", "4.1 0 8");
        assert!(matches!(parse_msh(&text), Err(MeshError::Parse { line: 2, .. })));
    }
}
