use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use openext::{Error, Result, ToleranceConfig};
use sha2::{Digest, Sha256};

pub const TOLERANCE_ENV: &str = "OPENEXT_TOLERANCES";

/// Bytes of an input file, or of standard input for `-`.
pub struct Input {
    pub bytes: Vec<u8>,
}

impl Input {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = if path.as_os_str() == "-" {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf)?;
            buf
        } else {
            fs::read(path).map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))?
        };
        Ok(Self { bytes })
    }

    pub fn text(&self) -> Result<&str> {
        std::str::from_utf8(&self.bytes).map_err(|_| Error::Validation("input is not UTF-8".into()))
    }

    pub fn digest(&self) -> String {
        digest(&self.bytes)
    }
}

pub fn digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

/// Per-field tolerance overrides from the command line.
#[derive(Debug, Clone, Default)]
pub struct ToleranceOverrides {
    pub file: Option<PathBuf>,
    pub herm: Option<f64>,
    pub orth: Option<f64>,
    pub rank: Option<f64>,
    pub eig_cluster: Option<f64>,
    pub residual: Option<f64>,
}

/// Defaults, then the file named by `--tolerances` (or the environment
/// variable), then individual flags.
pub fn resolve_tolerances(o: &ToleranceOverrides) -> Result<ToleranceConfig> {
    let file = o
        .file
        .clone()
        .or_else(|| std::env::var_os(TOLERANCE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
    let mut tol = match file {
        Some(path) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| Error::Validation(format!("cannot read tolerances {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Validation(format!("tolerances {}: {e}", path.display())))?
        }
        None => ToleranceConfig::default(),
    };
    let fields = [
        (o.herm, &mut tol.herm),
        (o.orth, &mut tol.orth),
        (o.rank, &mut tol.rank),
        (o.eig_cluster, &mut tol.eig_cluster),
        (o.residual, &mut tol.residual),
    ];
    for (value, slot) in fields {
        if let Some(v) = value {
            *slot = v;
        }
    }
    tol.validate()?;
    Ok(tol)
}

/// Writes to standard output, or atomically to `out` through a temporary
/// file in the same directory.
pub fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) => write_atomic(path, text)?,
    }
    Ok(())
}

pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
