//! Plain-text graph files.
//!
//! ```text
//! version 1
//! variant standard
//! depth 3
//! seed 42
//! level 1 edges 3
//! 0 1
//! ...
//! sha256 <hex of everything above>
//! ```
//!
//! Level blocks appear in order 1..=depth for the standard variant and are
//! absent for the unbalanced one; edge lines are canonical (`a b` with a < b,
//! sorted, repeats for multiplicity), though the parser accepts either vertex
//! order. A checksum mismatch is a parse error; a well-formed file describing
//! a non-3-regular or out-of-range layer is a validation error.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::{
    assemble, layer_seed, ExpanderLayer, GraphVariant, LeveledGraph, MAX_DEPTH,
};

pub fn serialize_graph(g: &LeveledGraph) -> String {
    let mut s = String::new();
    s.push_str("version 1\n");
    s.push_str(&format!("variant {}\n", g.variant().as_str()));
    s.push_str(&format!("depth {}\n", g.depth()));
    s.push_str(&format!("seed {}\n", g.master_seed()));
    if g.variant() == GraphVariant::Standard {
        for level in 1..=g.depth() {
            let layer = g.layer(level).expect("standard graph has every layer");
            s.push_str(&format!("level {} edges {}\n", level, layer.edges.len()));
            for &(a, b) in &layer.edges {
                s.push_str(&format!("{a} {b}\n"));
            }
        }
    }
    let digest = Sha256::digest(s.as_bytes());
    s.push_str(&format!("sha256 {}\n", hex::encode(digest)));
    s
}

pub fn write_graph_file(g: &LeveledGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serialize_graph(g))?;
    Ok(())
}

pub fn read_graph_file(path: impl AsRef<Path>) -> Result<LeveledGraph> {
    let text = std::fs::read_to_string(path)?;
    deserialize_graph(&text)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

struct Cursor<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(body: &'a str) -> Self {
        Cursor {
            lines: body.lines().enumerate().map(|(i, l)| (i + 1, l)).collect(),
            pos: 0,
        }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let item = self.lines.get(self.pos).copied();
        self.pos += 1;
        item
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    /// Line number just past the end, for "unexpected end of file" errors.
    fn eof_line(&self) -> usize {
        self.lines.last().map_or(1, |(n, _)| n + 1)
    }

    /// Consumes one `<key> <value>` line and returns the value.
    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (ln, line) = self
            .next()
            .ok_or_else(|| parse_err(self.eof_line(), format!("missing '{key}' line")))?;
        match line.strip_prefix(key).and_then(|r| r.strip_prefix(' ')) {
            Some(value) if !value.is_empty() => Ok((ln, value.trim())),
            _ => Err(parse_err(ln, format!("expected '{key} <value>', got '{line}'"))),
        }
    }
}

pub fn deserialize_graph(text: &str) -> Result<LeveledGraph> {
    // --- checksum trailer first: nothing else is trusted until it matches ---
    let sha_pos = text.rfind("sha256 ").ok_or_else(|| {
        parse_err(text.lines().count().max(1), "missing sha256 trailer")
    })?;
    if sha_pos != 0 && text.as_bytes()[sha_pos - 1] != b'\n' {
        return Err(parse_err(
            text[..sha_pos].lines().count(),
            "sha256 trailer must start its own line",
        ));
    }
    let body = &text[..sha_pos];
    let sha_line = body.bytes().filter(|&b| b == b'\n').count() + 1;
    let trailer = &text[sha_pos..];
    let hex_str = trailer["sha256 ".len()..].trim_end_matches('\n').trim();
    if trailer.trim_end_matches('\n').contains('\n') {
        return Err(parse_err(sha_line + 1, "content after sha256 trailer"));
    }
    if hex_str.len() != 64 || !hex_str.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(parse_err(sha_line, "sha256 trailer is not a 64-digit hex string"));
    }
    let expect = hex::encode(Sha256::digest(body.as_bytes()));
    if !hex_str.eq_ignore_ascii_case(&expect) {
        return Err(parse_err(
            sha_line,
            format!("checksum mismatch: trailer {hex_str}, content {expect}"),
        ));
    }

    // --- header ---
    let mut cur = Cursor::new(body);
    let (ln, version) = cur.keyed("version")?;
    if version != "1" {
        return Err(parse_err(ln, format!("unsupported version '{version}'")));
    }
    let (ln, variant) = cur.keyed("variant")?;
    let variant = match variant {
        "standard" => GraphVariant::Standard,
        "unbalanced" => GraphVariant::UnbalancedTree,
        other => return Err(parse_err(ln, format!("unknown variant '{other}'"))),
    };
    let (ln, depth_str) = cur.keyed("depth")?;
    let depth: u32 = depth_str
        .parse()
        .map_err(|_| parse_err(ln, format!("depth is not a u32: '{depth_str}'")))?;
    if depth > MAX_DEPTH {
        return Err(Error::validation(format!(
            "depth {depth} exceeds the supported maximum {MAX_DEPTH}"
        )));
    }
    let (ln, seed_str) = cur.keyed("seed")?;
    let seed: u64 = seed_str
        .parse()
        .map_err(|_| parse_err(ln, format!("seed is not a u64: '{seed_str}'")))?;

    // --- level blocks ---
    let mut layers = Vec::new();
    if variant == GraphVariant::Standard {
        layers.push(ExpanderLayer {
            level: 0,
            num_vertices: 1,
            edges: Vec::new(),
            model: None,
            generator_seed: layer_seed(seed, 0),
            certificate: None,
        });
        for level in 1..=depth {
            let (ln, line) = cur.next().ok_or_else(|| {
                parse_err(cur.eof_line(), format!("missing block for level {level}"))
            })?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 4 || toks[0] != "level" || toks[2] != "edges" {
                return Err(parse_err(
                    ln,
                    format!("expected 'level {level} edges <k>', got '{line}'"),
                ));
            }
            let n: u32 = toks[1]
                .parse()
                .map_err(|_| parse_err(ln, format!("level is not a u32: '{}'", toks[1])))?;
            if n != level {
                return Err(parse_err(
                    ln,
                    format!("level blocks must appear in order; expected {level}, got {n}"),
                ));
            }
            let k: usize = toks[3]
                .parse()
                .map_err(|_| parse_err(ln, format!("edge count is not a usize: '{}'", toks[3])))?;
            let size = 1u64 << level;
            if k as u64 != 3 * size / 2 {
                return Err(Error::validation(format!(
                    "level {level} declares {k} edges; a 3-regular layer on {size} vertices has {}",
                    3 * size / 2
                )));
            }
            let mut edges = Vec::with_capacity(k);
            for _ in 0..k {
                let (ln, line) = cur.next().ok_or_else(|| {
                    parse_err(cur.eof_line(), format!("edge block of level {level} is truncated"))
                })?;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != 2 {
                    return Err(parse_err(ln, format!("expected 'i j' edge line, got '{line}'")));
                }
                let a: u32 = toks[0]
                    .parse()
                    .map_err(|_| parse_err(ln, format!("vertex is not a u32: '{}'", toks[0])))?;
                let b: u32 = toks[1]
                    .parse()
                    .map_err(|_| parse_err(ln, format!("vertex is not a u32: '{}'", toks[1])))?;
                if a as u64 >= size || b as u64 >= size {
                    return Err(Error::validation(format!(
                        "edge ({a}, {b}) out of range for level {level} (size {size})"
                    )));
                }
                edges.push((a.min(b), a.max(b)));
            }
            edges.sort_unstable();
            let layer = ExpanderLayer {
                level,
                num_vertices: size,
                edges,
                model: None,
                generator_seed: layer_seed(seed, level),
                certificate: None,
            };
            layer.check_degrees()?;
            layers.push(layer);
        }
    }
    if let Some((ln, line)) = cur.peek() {
        return Err(parse_err(ln, format!("unexpected trailing content: '{line}'")));
    }

    Ok(assemble(variant, depth, seed, layers))
}

// ============================================================================
// tests
// ============================================================================
