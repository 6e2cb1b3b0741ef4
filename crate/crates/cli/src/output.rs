//! Input/output plumbing shared by the commands.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{data, Result};

/// Identifies the configuration that produced an output.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub command: &'static str,
    pub hash: String,
    pub config_json: String,
}

impl Provenance {
    pub fn new(command: &'static str, cfg: &RunConfig) -> Self {
        Self { command, hash: cfg.hash(command), config_json: cfg.to_json() }
    }

    /// Comment block placed at the top of text outputs.
    pub fn write_header(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "# influence {} {}", self.command, env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "# config_sha256: {}", self.hash)?;
        writeln!(w, "# config: {}", self.config_json)
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "command": self.command,
            "config_sha256": self.hash,
            "config": serde_json::from_str::<serde_json::Value>(&self.config_json).expect("config is JSON"),
        })
    }
}

/// Prints the effective configuration to stderr.
pub fn echo_config(command: &str, cfg: &RunConfig) {
    eprintln!("# effective configuration for `{command}` (sha256 {})", cfg.hash(command));
    eprint!("{}", cfg.to_toml());
    eprintln!();
}

pub fn open_input(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| data(format!("cannot open {}: {e}", path.display())))
}

/// A file, or stdout for `-`.
pub fn create_output(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufWriter::new(io::stdout())));
    }
    let f = File::create(path).map_err(|e| data(format!("cannot create {}: {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(f)))
}

/// Opens `path` and writes the provenance block.
pub fn create_with_header(path: &Path, prov: &Provenance) -> Result<Box<dyn Write>> {
    let mut w = create_output(path)?;
    prov.write_header(&mut w)?;
    Ok(w)
}

/// Reads `(id, score)` rows from a CSV whose first column is the id. The score
/// column is `column` if given, else the first of `score`, `theta`.
pub fn read_scores(path: &Path, column: Option<&str>) -> Result<Vec<(String, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(open_input(path)?);
    let headers = rdr.headers()?.clone();
    let col = match column {
        Some(c) => headers.iter().position(|h| h == c),
        None => headers.iter().position(|h| h == "score").or_else(|| headers.iter().position(|h| h == "theta")),
    }
    .ok_or_else(|| data(format!("{}: no score column among {:?}", path.display(), headers.iter().collect::<Vec<_>>())))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |m: String| data(format!("{} row {}: {m}", path.display(), i + 1));
        let id = rec.get(0).ok_or_else(|| bad("missing id".into()))?.to_string();
        let score: f64 = rec
            .get(col)
            .ok_or_else(|| bad("missing score".into()))?
            .parse()
            .map_err(|e| bad(format!("bad score: {e}")))?;
        if !score.is_finite() {
            return Err(bad(format!("non-finite score {score}")));
        }
        if !seen.insert(id.clone()) {
            return Err(bad(format!("duplicate id {id:?}")));
        }
        out.push((id, score));
    }
    Ok(out)
}
