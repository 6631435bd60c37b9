use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use seldiff::optimize::FiniteSumProblem;
use seldiff::verify::PiecewisePath;
use seldiff::Prog;
use seldiff_dsl::{compile, parse, source_hash, CompileArtifact};

pub fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn diagnostics(path: &Path, src: &str, diags: &[seldiff_dsl::Diagnostic]) -> anyhow::Error {
    let name = path.display().to_string();
    let text: Vec<String> = diags.iter().map(|d| d.render(&name, src)).collect();
    anyhow!("{}", text.join("\n"))
}

/// Compiles each named function of one file.
pub fn functions(path: &Path, names: &[String]) -> Result<Vec<CompileArtifact<f64>>> {
    let src = read(path)?;
    let file = parse(&src).map_err(|d| diagnostics(path, &src, &d))?;
    let hash = source_hash(&src);
    names
        .iter()
        .map(|n| compile(&file, n, &hash).map_err(|d| diagnostics(path, &src, &d)))
        .collect()
}

pub fn function(path: &Path, name: &str) -> Result<CompileArtifact<f64>> {
    Ok(functions(path, &[name.to_string()])?.remove(0))
}

pub fn problem(path: &Path, names: &[String]) -> Result<(FiniteSumProblem<f64>, String)> {
    let arts = functions(path, names)?;
    let hash = arts[0].source_hash.clone();
    let progs: Vec<Prog> = arts.into_iter().map(|a| a.program).collect();
    Ok((FiniteSumProblem::new(progs)?, hash))
}

pub fn check_point(art: &CompileArtifact<f64>, x: &[f64]) -> Result<()> {
    if x.len() != art.params.len() {
        bail!("`{}` takes {} coordinate(s) ({}), got {}", art.function, art.params.len(), art.params.join(", "), x.len());
    }
    Ok(())
}

/// A JSON array of vertices, or an object with `vertices` and optional
/// `breakpoints` and `schema_version`.
pub fn path(file: &Path) -> Result<PiecewisePath<f64>> {
    let text = read(file)?;
    let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("{} is not JSON", file.display()))?;
    let path = if v.is_array() {
        let vertices: Vec<Vec<f64>> = serde_json::from_value(v).context("path must be an array of vertices")?;
        PiecewisePath::new(vertices)?
    } else {
        match v.get("schema_version").map(|s| s.as_u64()) {
            None | Some(Some(1)) => {}
            Some(other) => bail!("unsupported path schema_version {other:?}"),
        }
        let vertices: Vec<Vec<f64>> =
            serde_json::from_value(v["vertices"].clone()).context("`vertices` must be an array of points")?;
        match v.get("breakpoints") {
            Some(b) => PiecewisePath::with_breakpoints(serde_json::from_value(b.clone())?, vertices)?,
            None => PiecewisePath::new(vertices)?,
        }
    };
    Ok(path)
}

/// Broadcasts a one-element box corner to `dim` coordinates.
pub fn corner(v: &[f64], dim: usize) -> Result<Vec<f64>> {
    match v.len() {
        1 => Ok(vec![v[0]; dim]),
        n if n == dim => Ok(v.to_vec()),
        n => bail!("box corner has {n} coordinates, expected 1 or {dim}"),
    }
}
