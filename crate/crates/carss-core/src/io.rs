//! Instance and tour file I/O.
//!
//! Native text format:
//! ```text
//! carss-tsp v1
//! n <count>
//! <x> <y>        (n lines, full-precision decimals)
//! ```
//! Also reads the TSPLIB subset NAME / TYPE / DIMENSION /
//! EDGE_WEIGHT_TYPE: EUC_2D / NODE_COORD_SECTION; any other keyword is an
//! unsupported-feature error. TSPLIB vertex indices are 1-based in files and
//! converted to 0-based at this boundary.

use crate::error::{Error, Result};
use crate::instance::{Instance, Point};
use crate::tour::Tour;
use std::fmt::Write as _;
use std::path::Path;

const NATIVE_HEADER: &str = "carss-tsp v1";

/// Serialize an instance in the native format. `f64` Display prints the
/// shortest decimal that round-trips, so write-then-read is bit-identical.
pub fn instance_to_string(inst: &Instance) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{NATIVE_HEADER}");
    let _ = writeln!(s, "n {}", inst.n());
    for p in inst.coords() {
        let _ = writeln!(s, "{} {}", p[0], p[1]);
    }
    s
}

pub fn write_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, instance_to_string(inst))?;
    Ok(())
}

/// Read an instance from a file, dispatching on the first line between the
/// native format and the TSPLIB subset.
pub fn read_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let fallback_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".to_string());
    parse_instance(&text, &fallback_id)
}

/// Parse instance text (native or TSPLIB). `fallback_id` is used when the
/// format carries no name.
pub fn parse_instance(text: &str, fallback_id: &str) -> Result<Instance> {
    let first = text.lines().next().unwrap_or("").trim();
    if first == NATIVE_HEADER {
        parse_native(text, fallback_id)
    } else {
        parse_tsplib(text, fallback_id)
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_coord(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| parse_err(line, format!("non-numeric coordinate '{tok}'")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite coordinate '{tok}'")));
    }
    Ok(v)
}

fn parse_native(text: &str, id: &str) -> Result<Instance> {
    let mut n: Option<usize> = None;
    let mut coords: Vec<Point> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if idx == 0 {
            continue; // header already matched
        }
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("n ") {
            if n.is_some() {
                return Err(parse_err(lineno, "duplicate dimension line"));
            }
            n = Some(
                rest.trim()
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad vertex count '{rest}'")))?,
            );
            continue;
        }
        let Some(n) = n else {
            return Err(parse_err(lineno, "coordinate line before 'n <count>'"));
        };
        if coords.len() >= n {
            return Err(parse_err(
                lineno,
                format!("more than {n} coordinate lines"),
            ));
        }
        let mut toks = line.split_whitespace();
        let (Some(xs), Some(ys), None) = (toks.next(), toks.next(), toks.next()) else {
            return Err(parse_err(lineno, "expected exactly 'x y'"));
        };
        coords.push([parse_coord(xs, lineno)?, parse_coord(ys, lineno)?]);
    }
    let n = n.ok_or_else(|| parse_err(1, "missing 'n <count>' line"))?;
    if coords.len() != n {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {n} coordinate lines, found {}", coords.len()),
        ));
    }
    Instance::new(id, coords)
}

fn parse_tsplib(text: &str, fallback_id: &str) -> Result<Instance> {
    let mut name: Option<String> = None;
    let mut dimension: Option<usize> = None;
    let mut edge_weight_type: Option<String> = None;
    let mut coords: Vec<Option<Point>> = Vec::new();
    let mut in_coords = false;
    let mut seen = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line == "EOF" {
            break;
        }
        if in_coords {
            let Some(dim) = dimension else {
                return Err(parse_err(lineno, "NODE_COORD_SECTION before DIMENSION"));
            };
            if seen >= dim {
                return Err(parse_err(
                    lineno,
                    format!("more than {dim} coordinate lines"),
                ));
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(parse_err(lineno, "expected '<index> <x> <y>'"));
            }
            let one_based: usize = toks[0]
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad vertex index '{}'", toks[0])))?;
            if one_based == 0 || one_based > dim {
                return Err(parse_err(
                    lineno,
                    format!("vertex index {one_based} out of range 1..={dim}"),
                ));
            }
            let slot = &mut coords[one_based - 1];
            if slot.is_some() {
                return Err(parse_err(
                    lineno,
                    format!("duplicate coordinates for vertex {one_based}"),
                ));
            }
            *slot = Some([parse_coord(toks[1], lineno)?, parse_coord(toks[2], lineno)?]);
            seen += 1;
            continue;
        }
        let (key, value) = match line.split_once(':') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (line, ""),
        };
        match key {
            "NAME" => name = Some(value.to_string()),
            "TYPE" => {
                if value != "TSP" {
                    return Err(Error::Unsupported(format!("TYPE: {value}")));
                }
            }
            "DIMENSION" => {
                if dimension.is_some() {
                    return Err(parse_err(lineno, "duplicate DIMENSION line"));
                }
                let d: usize = value
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad DIMENSION '{value}'")))?;
                dimension = Some(d);
                coords = vec![None; d];
            }
            "EDGE_WEIGHT_TYPE" => {
                if value != "EUC_2D" {
                    return Err(Error::Unsupported(format!("EDGE_WEIGHT_TYPE: {value}")));
                }
                edge_weight_type = Some(value.to_string());
            }
            "NODE_COORD_SECTION" => {
                if edge_weight_type.is_none() {
                    return Err(Error::Unsupported(
                        "NODE_COORD_SECTION without EDGE_WEIGHT_TYPE: EUC_2D".into(),
                    ));
                }
                in_coords = true;
            }
            other => return Err(Error::Unsupported(format!("TSPLIB keyword '{other}'"))),
        }
    }

    let dim = dimension.ok_or_else(|| parse_err(1, "missing DIMENSION"))?;
    if seen != dim {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {dim} coordinate lines, found {seen}"),
        ));
    }
    let coords: Vec<Point> = coords.into_iter().map(|c| c.unwrap()).collect();
    Instance::new(name.unwrap_or_else(|| fallback_id.to_string()), coords)
}

/// Tour output format: one line of n space-separated indices, then
/// `length <value>`.
pub fn tour_to_string(tour: &Tour) -> String {
    let mut s = String::new();
    let order: Vec<String> = tour.order().iter().map(|v| v.to_string()).collect();
    let _ = writeln!(s, "{}", order.join(" "));
    let _ = writeln!(s, "length {}", tour.length());
    s
}

pub fn write_tour(tour: &Tour, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, tour_to_string(tour))?;
    Ok(())
}
